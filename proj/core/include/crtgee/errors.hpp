#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace crtgee {

/// A value fell outside the domain of a link, variance function or distribution.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Caller combined inputs that cannot go together (kind mismatch, wrong measure).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The trial design cannot support the requested estimate.
class UnsupportedDesign : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateVariance : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GeneratorInvalid : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// (I - Q_i) for one cluster is not invertible / has no principal inverse root.
class CorrectionSingularity : public std::runtime_error {
 public:
  CorrectionSingularity(std::size_t cluster, std::string kind, double eigenvalue);

  std::size_t cluster() const noexcept { return cluster_; }
  const std::string& kind() const noexcept { return kind_; }
  double eigenvalue() const noexcept { return eigenvalue_; }

 private:
  std::size_t cluster_;
  std::string kind_;
  double eigenvalue_;
};

enum class FailureReason { IterationLimit, StepHalvingExhausted, SingularInformation };

const char* to_string(FailureReason reason);

/// Fisher scoring did not reach a solution. Carries the state at failure.
class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(FailureReason reason, int iterations, std::vector<double> last_beta);

  FailureReason reason() const noexcept { return reason_; }
  int iterations() const noexcept { return iterations_; }
  const std::vector<double>& last_beta() const noexcept { return last_beta_; }

 private:
  FailureReason reason_;
  int iterations_;
  std::vector<double> last_beta_;
};

}  // namespace crtgee
