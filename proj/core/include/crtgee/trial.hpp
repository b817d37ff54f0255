#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace crtgee {

enum class Arm : std::uint8_t { Control = 0, Intervention = 1 };

struct Cluster {
  std::string id;
  Arm arm = Arm::Control;
  std::vector<std::uint8_t> outcomes;  // each 0 or 1

  std::size_t size() const { return outcomes.size(); }
  std::size_t events() const;
};

struct ArmSummary {
  std::size_t clusters = 0;
  std::size_t observations = 0;
  std::size_t events = 0;

  double proportion() const {
    return observations == 0 ? 0.0 : static_cast<double>(events) / static_cast<double>(observations);
  }
};

/// Clusters of a two-arm trial. Validated on construction: N >= 2, every
/// cluster non-empty with 0/1 outcomes, and both arms represented.
class TrialDataset {
 public:
  TrialDataset() = default;
  explicit TrialDataset(std::vector<Cluster> clusters);

  const std::vector<Cluster>& clusters() const { return clusters_; }
  std::size_t n_clusters() const { return clusters_.size(); }
  std::size_t n_observations() const { return n_obs_; }
  std::size_t max_cluster_size() const { return max_size_; }

  ArmSummary arm_summary(Arm arm) const;
  ArmSummary pooled_summary() const;

 private:
  std::vector<Cluster> clusters_;
  std::size_t n_obs_ = 0;
  std::size_t max_size_ = 0;
};

}  // namespace crtgee
