#include "crtgee/trial.hpp"

#include <algorithm>
#include <numeric>
#include <utility>

#include "crtgee/errors.hpp"

namespace crtgee {

std::size_t Cluster::events() const {
  return static_cast<std::size_t>(std::count(outcomes.begin(), outcomes.end(), std::uint8_t{1}));
}

TrialDataset::TrialDataset(std::vector<Cluster> clusters) : clusters_(std::move(clusters)) {
  if (clusters_.size() < 2) {
    throw UnsupportedDesign("trial needs at least 2 clusters");
  }
  bool has_control = false;
  bool has_intervention = false;
  for (const auto& c : clusters_) {
    if (c.outcomes.empty()) {
      throw UnsupportedDesign("cluster '" + c.id + "' has no observations");
    }
    for (auto y : c.outcomes) {
      if (y > 1) throw DomainError("cluster '" + c.id + "' has a non-binary outcome");
    }
    has_control |= c.arm == Arm::Control;
    has_intervention |= c.arm == Arm::Intervention;
    n_obs_ += c.size();
    max_size_ = std::max(max_size_, c.size());
  }
  if (!has_control || !has_intervention) {
    throw UnsupportedDesign("both arms need at least one cluster; the arm effect is not estimable");
  }
}

ArmSummary TrialDataset::arm_summary(Arm arm) const {
  ArmSummary s;
  for (const auto& c : clusters_) {
    if (c.arm != arm) continue;
    ++s.clusters;
    s.observations += c.size();
    s.events += c.events();
  }
  return s;
}

ArmSummary TrialDataset::pooled_summary() const {
  ArmSummary s;
  for (const auto& c : clusters_) {
    ++s.clusters;
    s.observations += c.size();
    s.events += c.events();
  }
  return s;
}

}  // namespace crtgee
