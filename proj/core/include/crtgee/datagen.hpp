#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "crtgee/trial.hpp"

namespace crtgee {

/// Deterministic substream keyed by (root seed, scenario, replicate).
/// The same triple always yields the same sequence, independent of which
/// thread draws it or in what order other streams are used.
class RngStream {
 public:
  using result_type = std::mt19937_64::result_type;

  RngStream(std::uint64_t seed, std::uint64_t scenario, std::uint64_t replicate);

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  bool bernoulli(double p) { return uniform() < p; }
  double gamma(double shape, double scale);

 private:
  std::mt19937_64 engine_;
};

/// b_j = rho / (1 + (j - 2) rho), the conditional-linear coefficient for the
/// j-th outcome (j >= 2) under exchangeable correlation rho.
double qaqish_coeff(double rho, std::size_t j);

/// Sequential conditional-linear sampler: y_1 ~ Bern(mu); for j >= 2,
/// y_j ~ Bern(mu + b_j sum_{i<j} (y_i - mu)). Every y_j has mean mu and
/// every pair has correlation rho.
std::vector<std::uint8_t> generate_cluster(double mu, double rho, std::size_t size, RngStream& stream);

/// Gamma(shape 1/cv^2, scale mean*cv^2) draws rounded to nearest integer,
/// floored at 2.
std::vector<std::size_t> gamma_cluster_sizes(double mean_size, double cv, std::size_t n, RngStream& stream);

/// Rounding and floor rule applied to a single continuous size draw.
std::size_t round_cluster_size(double draw);

struct ClusterSizeSpec {
  double mean = 30.0;  // fixed size M when cv == 0
  double cv = 0.0;     // 0 means fixed

  bool variable() const { return cv > 0.0; }
  static ClusterSizeSpec fixed(std::size_t m) { return {static_cast<double>(m), 0.0}; }
  static ClusterSizeSpec gamma(double mean, double cv) { return {mean, cv}; }
};

struct Scenario {
  std::size_t id = 0;  // also keys the random substreams
  std::size_t n_clusters = 10;
  ClusterSizeSpec cluster_size;
  double pi0 = 0.3;
  double pi1 = 0.3;
  double icc = 0.01;
  std::size_t replicates = 1000;
  std::uint64_t seed = 1;

  /// Throws UsageError describing the first invalid field.
  void validate() const;
};

/// First N/2 clusters control (mean pi0), the rest intervention (mean pi1).
TrialDataset generate_trial(const Scenario& scenario, std::size_t replicate);

}  // namespace crtgee
