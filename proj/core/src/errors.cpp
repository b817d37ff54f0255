#include "crtgee/errors.hpp"

#include <sstream>
#include <utility>

namespace crtgee {

namespace {

std::string correction_message(std::size_t cluster, const std::string& kind, double eigenvalue) {
  std::ostringstream os;
  os << kind << " correction undefined for cluster " << cluster << ": I - Q_i has eigenvalue " << eigenvalue;
  return os.str();
}

std::string nonconvergence_message(FailureReason reason, int iterations) {
  std::ostringstream os;
  os << "GEE did not converge (" << to_string(reason) << ") after " << iterations << " iterations";
  return os.str();
}

}  // namespace

CorrectionSingularity::CorrectionSingularity(std::size_t cluster, std::string kind, double eigenvalue)
    : std::runtime_error(correction_message(cluster, kind, eigenvalue)),
      cluster_(cluster),
      kind_(std::move(kind)),
      eigenvalue_(eigenvalue) {}

const char* to_string(FailureReason reason) {
  switch (reason) {
    case FailureReason::IterationLimit:
      return "iteration limit";
    case FailureReason::StepHalvingExhausted:
      return "step-halving exhausted";
    case FailureReason::SingularInformation:
      return "singular information matrix";
  }
  return "unknown";
}

NonConvergence::NonConvergence(FailureReason reason, int iterations, std::vector<double> last_beta)
    : std::runtime_error(nonconvergence_message(reason, iterations)),
      reason_(reason),
      iterations_(iterations),
      last_beta_(std::move(last_beta)) {}

}  // namespace crtgee
