#include "crtgee/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "crtgee/errors.hpp"

namespace crtgee {

namespace {

constexpr std::uint32_t kStreamTag = 0x43525447u;  // "CRTG"

std::uint32_t lo32(std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); }
std::uint32_t hi32(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

std::string cluster_label(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "c%04zu", index + 1);
  return buf;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t scenario, std::uint64_t replicate) {
  std::seed_seq seq{kStreamTag, lo32(seed), hi32(seed), lo32(scenario), hi32(scenario), lo32(replicate),
                    hi32(replicate)};
  engine_.seed(seq);
}

double RngStream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double RngStream::gamma(double shape, double scale) {
  std::gamma_distribution<double> dist(shape, scale);
  return dist(engine_);
}

double qaqish_coeff(double rho, std::size_t j) {
  if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("correlation must lie in [0, 1)");
  if (j < 2) throw DomainError("conditional coefficient defined for j >= 2");
  return rho / (1.0 + (static_cast<double>(j) - 2.0) * rho);
}

std::vector<std::uint8_t> generate_cluster(double mu, double rho, std::size_t size, RngStream& stream) {
  if (!(mu > 0.0 && mu < 1.0)) throw DomainError("cluster mean must lie in (0, 1)");
  if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("correlation must lie in [0, 1)");
  std::vector<std::uint8_t> y(size);
  double centred_sum = 0.0;  // sum_{i<j} (y_i - mu)
  for (std::size_t j = 1; j <= size; ++j) {
    double lambda = mu;
    if (j >= 2) lambda += qaqish_coeff(rho, j) * centred_sum;
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
      throw GeneratorInvalid("conditional mean " + std::to_string(lambda) + " outside [0, 1]");
    }
    const bool event = stream.bernoulli(lambda);
    y[j - 1] = event ? 1 : 0;
    centred_sum += (event ? 1.0 : 0.0) - mu;
  }
  return y;
}

std::size_t round_cluster_size(double draw) {
  const double rounded = std::nearbyint(draw);
  return rounded < 2.0 ? 2 : static_cast<std::size_t>(rounded);
}

std::vector<std::size_t> gamma_cluster_sizes(double mean_size, double cv, std::size_t n, RngStream& stream) {
  if (!(mean_size >= 2.0)) throw DomainError("mean cluster size must be at least 2");
  if (!(cv > 0.0)) throw DomainError("cluster-size CV must be positive");
  const double shape = 1.0 / (cv * cv);
  const double scale = mean_size * cv * cv;
  std::vector<std::size_t> sizes(n);
  for (auto& s : sizes) s = round_cluster_size(stream.gamma(shape, scale));
  return sizes;
}

void Scenario::validate() const {
  if (n_clusters < 2 || n_clusters % 2 != 0) throw UsageError("n_clusters must be even and at least 2");
  if (cluster_size.variable()) {
    if (!(cluster_size.mean >= 2.0)) throw UsageError("mean cluster size must be at least 2");
  } else if (!(cluster_size.mean >= 1.0) || cluster_size.mean != std::floor(cluster_size.mean)) {
    throw UsageError("fixed cluster size must be a positive integer");
  }
  if (!(cluster_size.cv >= 0.0)) throw UsageError("cv must be non-negative");
  if (!(pi0 > 0.0 && pi0 < 1.0)) throw UsageError("pi0 must lie in (0, 1)");
  if (!(pi1 > 0.0 && pi1 < 1.0)) throw UsageError("pi1 must lie in (0, 1)");
  if (!(icc >= 0.0 && icc < 1.0)) throw UsageError("icc must lie in [0, 1)");
  if (replicates < 1) throw UsageError("replicates must be at least 1");
}

TrialDataset generate_trial(const Scenario& scenario, std::size_t replicate) {
  scenario.validate();
  RngStream stream(scenario.seed, scenario.id, replicate);
  const std::size_t n = scenario.n_clusters;
  std::vector<std::size_t> sizes;
  if (scenario.cluster_size.variable()) {
    sizes = gamma_cluster_sizes(scenario.cluster_size.mean, scenario.cluster_size.cv, n, stream);
  } else {
    sizes.assign(n, static_cast<std::size_t>(scenario.cluster_size.mean));
  }
  std::vector<Cluster> clusters(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& c = clusters[i];
    c.id = cluster_label(i);
    c.arm = i < n / 2 ? Arm::Control : Arm::Intervention;
    const double mu = c.arm == Arm::Control ? scenario.pi0 : scenario.pi1;
    c.outcomes = generate_cluster(mu, scenario.icc, sizes[i], stream);
  }
  return TrialDataset(std::move(clusters));
}

}  // namespace crtgee
