#include "crtgee/model.hpp"

#include <cmath>
#include <sstream>

#include "crtgee/errors.hpp"

namespace crtgee {

namespace {

[[noreturn]] void domain_fail(const char* what, double value) {
  std::ostringstream os;
  os.precision(17);
  os << what << " (value " << value << ")";
  throw DomainError(os.str());
}

}  // namespace

std::string_view to_string(Family family) {
  switch (family) {
    case Family::Binomial:
      return "binomial";
    case Family::Poisson:
      return "poisson";
    case Family::Gaussian:
      return "gaussian";
  }
  return "?";
}

std::string_view to_string(Link link) {
  switch (link) {
    case Link::Log:
      return "log";
    case Link::Identity:
      return "identity";
    case Link::Logit:
      return "logit";
  }
  return "?";
}

std::string_view to_string(EffectMeasure measure) {
  switch (measure) {
    case EffectMeasure::RR:
      return "RR";
    case EffectMeasure::RD:
      return "RD";
    case EffectMeasure::OR:
      return "OR";
  }
  return "?";
}

std::optional<Family> parse_family(std::string_view text) {
  if (text == "binomial") return Family::Binomial;
  if (text == "poisson") return Family::Poisson;
  if (text == "gaussian") return Family::Gaussian;
  return std::nullopt;
}

std::optional<Link> parse_link(std::string_view text) {
  if (text == "log") return Link::Log;
  if (text == "identity") return Link::Identity;
  if (text == "logit") return Link::Logit;
  return std::nullopt;
}

double link_apply(Link link, double mu) {
  switch (link) {
    case Link::Log:
      if (!(mu > 0.0)) domain_fail("log link needs mu > 0", mu);
      return std::log(mu);
    case Link::Identity:
      return mu;
    case Link::Logit:
      if (!(mu > 0.0 && mu < 1.0)) domain_fail("logit link needs 0 < mu < 1", mu);
      return std::log(mu) - std::log1p(-mu);
  }
  return mu;
}

double link_inverse(Link link, double eta) {
  switch (link) {
    case Link::Log:
      return std::exp(eta);
    case Link::Identity:
      return eta;
    case Link::Logit:
      if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
      {
        const double e = std::exp(eta);
        return e / (1.0 + e);
      }
  }
  return eta;
}

double link_mu_deriv(Link link, double eta) {
  switch (link) {
    case Link::Log:
      return std::exp(eta);
    case Link::Identity:
      return 1.0;
    case Link::Logit: {
      const double mu = link_inverse(Link::Logit, eta);
      return mu * (1.0 - mu);
    }
  }
  return 1.0;
}

double variance_function(Family family, double mu) {
  switch (family) {
    case Family::Binomial:
      if (!(mu > 0.0 && mu < 1.0)) domain_fail("binomial variance needs 0 < mu < 1", mu);
      return mu * (1.0 - mu);
    case Family::Poisson:
      if (!(mu > 0.0)) domain_fail("poisson variance needs mu > 0", mu);
      return mu;
    case Family::Gaussian:
      return 1.0;
  }
  return 1.0;
}

bool mean_in_range(Family family, double mu) {
  switch (family) {
    case Family::Binomial:
      return mu > 0.0 && mu < 1.0;
    case Family::Poisson:
      return mu > 0.0 && std::isfinite(mu);
    case Family::Gaussian:
      return std::isfinite(mu);
  }
  return false;
}

EffectMeasure effect_measure_for(Link link) {
  switch (link) {
    case Link::Log:
      return EffectMeasure::RR;
    case Link::Identity:
      return EffectMeasure::RD;
    case Link::Logit:
      return EffectMeasure::OR;
  }
  return EffectMeasure::RR;
}

ModelSpec::ModelSpec(Family family, Link link, MeanModel mean_model)
    : family_(family), link_(link), mean_model_(mean_model) {
  const bool ok = family == Family::Binomial ||
                  (family == Family::Poisson && link != Link::Logit) ||
                  (family == Family::Gaussian && link == Link::Identity);
  if (!ok) {
    throw UsageError("unsupported model " + std::string(to_string(family)) + "-" + std::string(to_string(link)));
  }
}

std::string ModelSpec::name() const {
  return std::string(to_string(family_)) + "-" + std::string(to_string(link_));
}

ModelSpec ModelSpec::parse(std::string_view name) {
  const auto dash = name.find('-');
  if (dash == std::string_view::npos) throw UsageError("model name must be <family>-<link>: " + std::string(name));
  const auto family = parse_family(name.substr(0, dash));
  const auto link = parse_link(name.substr(dash + 1));
  if (!family || !link) throw UsageError("unknown model " + std::string(name));
  return ModelSpec(*family, *link);
}

const std::array<ModelSpec, 6>& all_models() {
  static const std::array<ModelSpec, 6> models = {
      ModelSpec(Family::Binomial, Link::Log),      ModelSpec(Family::Binomial, Link::Identity),
      ModelSpec(Family::Binomial, Link::Logit),    ModelSpec(Family::Poisson, Link::Log),
      ModelSpec(Family::Poisson, Link::Identity),  ModelSpec(Family::Gaussian, Link::Identity)};
  return models;
}

}  // namespace crtgee
