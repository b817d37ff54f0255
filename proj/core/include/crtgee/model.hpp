#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace crtgee {

enum class Family { Binomial, Poisson, Gaussian };
enum class Link { Log, Identity, Logit };
enum class MeanModel { InterceptPlusArm, InterceptOnly };
enum class EffectMeasure { RR, RD, OR };

std::string_view to_string(Family family);
std::string_view to_string(Link link);
std::string_view to_string(EffectMeasure measure);
std::optional<Family> parse_family(std::string_view text);
std::optional<Link> parse_link(std::string_view text);

/// g(mu). Throws DomainError for mu <= 0 (Log) or mu outside (0,1) (Logit).
double link_apply(Link link, double mu);
/// g^{-1}(eta).
double link_inverse(Link link, double eta);
/// d mu / d eta evaluated at eta.
double link_mu_deriv(Link link, double eta);

/// V(mu): mu(1-mu), mu, or 1. Dispersion is carried separately.
double variance_function(Family family, double mu);

/// Whether mu lies in the open mean range of the family.
bool mean_in_range(Family family, double mu);

/// Effect scale implied by a link: Log -> RR, Identity -> RD, Logit -> OR.
EffectMeasure effect_measure_for(Link link);

/// One of the six supported family/link combinations together with the
/// mean model. Construction rejects any other pair.
class ModelSpec {
 public:
  ModelSpec(Family family, Link link, MeanModel mean_model = MeanModel::InterceptPlusArm);

  Family family() const { return family_; }
  Link link() const { return link_; }
  MeanModel mean_model() const { return mean_model_; }
  std::size_t n_params() const { return mean_model_ == MeanModel::InterceptPlusArm ? 2 : 1; }

  /// "poisson-log", "binomial-identity", ...
  std::string name() const;
  static ModelSpec parse(std::string_view name);

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;

 private:
  Family family_;
  Link link_;
  MeanModel mean_model_;
};

/// The six analysis models in the order Binomial-Log, Binomial-Identity,
/// Binomial-Logit, Poisson-Log, Poisson-Identity, Gaussian-Identity.
const std::array<ModelSpec, 6>& all_models();

}  // namespace crtgee
