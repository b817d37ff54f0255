#include "crtgee/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "crtgee/errors.hpp"

namespace crtgee::io {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, sep)) out.push_back(trim(field));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// Doubles in JSON: NaN and infinities become null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number_from(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

json pair_json(const std::pair<double, double>& p) { return json::array({number(p.first), number(p.second)}); }
std::pair<double, double> pair_from(const json& j) { return {number_from(j.at(0)), number_from(j.at(1))}; }

json arm_json(const ArmReport& a) {
  return {{"clusters", a.clusters}, {"observations", a.observations}, {"events", a.events},
          {"proportion", number(a.proportion)}};
}

ArmReport arm_from(const json& j) {
  ArmReport a;
  a.clusters = j.at("clusters").get<std::size_t>();
  a.observations = j.at("observations").get<std::size_t>();
  a.events = j.at("events").get<std::size_t>();
  a.proportion = number_from(j.at("proportion"));
  return a;
}

ArmReport arm_report(const ArmSummary& s) {
  return {s.clusters, s.observations, s.events, s.proportion()};
}

}  // namespace

InputError::InputError(std::size_t line, const std::string& message)
    : std::runtime_error(line == 0 ? message : "line " + std::to_string(line) + ": " + message), line_(line) {}

ConfigError::ConfigError(std::string key, const std::string& message)
    : std::runtime_error("config key '" + key + "': " + message), key_(std::move(key)) {}

// ---------------------------------------------------------------------------
// Trial CSV

TrialDataset parse_trial_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::map<std::string, Cluster> clusters;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (!have_header) {
      if (line != "cluster_id,arm,outcome") {
        throw InputError(line_no, "expected header 'cluster_id,arm,outcome'");
      }
      have_header = true;
      continue;
    }
    const auto fields = split(line, ',');
    if (fields.size() != 3) {
      throw InputError(line_no, "expected 3 fields, found " + std::to_string(fields.size()));
    }
    const auto& id = fields[0];
    if (id.empty()) throw InputError(line_no, "empty cluster_id");
    if (fields[1] != "0" && fields[1] != "1") throw InputError(line_no, "arm must be 0 or 1, got '" + fields[1] + "'");
    if (fields[2] != "0" && fields[2] != "1") {
      throw InputError(line_no, "outcome must be 0 or 1, got '" + fields[2] + "'");
    }
    const Arm arm = fields[1] == "1" ? Arm::Intervention : Arm::Control;
    auto [it, inserted] = clusters.try_emplace(id);
    if (inserted) {
      it->second.id = id;
      it->second.arm = arm;
    } else if (it->second.arm != arm) {
      throw InputError(line_no, "cluster '" + id + "' appears in both arms");
    }
    it->second.outcomes.push_back(fields[2] == "1" ? 1 : 0);
    ++rows;
  }
  if (!have_header) throw InputError(0, "empty file; header 'cluster_id,arm,outcome' required");
  if (rows == 0) throw InputError(0, "no data rows");
  std::vector<Cluster> out;
  out.reserve(clusters.size());
  for (auto& [id, c] : clusters) out.push_back(std::move(c));
  return TrialDataset(std::move(out));
}

TrialDataset read_trial_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(0, "cannot open " + path);
  return parse_trial_csv(in);
}

void write_trial_csv(std::ostream& out, const TrialDataset& data) {
  out << "cluster_id,arm,outcome\n";
  for (const auto& c : data.clusters()) {
    for (auto y : c.outcomes) out << c.id << ',' << static_cast<int>(c.arm) << ',' << static_cast<int>(y) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Analysis

AnalysisReport analyze(const TrialDataset& data, const ModelSpec& spec, const AnalyzeOptions& opts) {
  if (!(opts.level > 0.0 && opts.level < 1.0)) throw UsageError("confidence level must lie in (0, 1)");
  AnalysisReport rep;
  rep.model = spec.name();
  rep.effect_measure = std::string(to_string(effect_measure_for(spec.link())));
  rep.reference = opts.z_reference ? "z" : "t";
  rep.level = opts.level;
  rep.control = arm_report(data.arm_summary(Arm::Control));
  rep.intervention = arm_report(data.arm_summary(Arm::Intervention));
  rep.n_clusters = data.n_clusters();
  rep.n_observations = data.n_observations();

  GeeFit fit;
  try {
    fit = fit_gee(data, spec, WorkingCorrelation::exchangeable(), opts.fit);
  } catch (const NonConvergence& e) {
    rep.converged = false;
    rep.iterations = e.iterations();
    rep.failure = to_string(e.reason());
    rep.beta = e.last_beta();
    rep.icc = kNaN;
    rep.phi = kNaN;
    rep.estimate_effect = kNaN;
    return rep;
  }
  rep.converged = true;
  rep.iterations = fit.iterations;
  rep.icc = fit.alpha;
  rep.phi = fit.phi;
  rep.icc_clamped = fit.alpha_clamped;
  rep.beta.assign(fit.beta.data(), fit.beta.data() + fit.beta.size());
  rep.estimate_effect = spec.link() == Link::Identity ? fit.beta(1) : std::exp(fit.beta(1));

  const double alpha_level = 1.0 - opts.level;
  const auto measure = effect_measure_for(spec.link());
  for (auto kind : opts.kinds) {
    EstimateReport er;
    er.kind = kind;
    try {
      const std::array<VarianceKind, 1> one = {kind};
      const auto v = std::move(compute_variances(fit, one, opts.fg_bound).front());
      er.variance = v.cov(1, 1);
      er.se = v.se(1);
      er.q_max = v.diagnostics.q_max;
      const auto inf = opts.z_reference ? wald_inference_z(fit, v, measure, alpha_level)
                                        : wald_inference(fit, v, measure, alpha_level);
      er.t_stat = inf.t_stat;
      er.df = inf.df;
      er.p_value = inf.p_value;
      er.ci_link = inf.ci_link;
      er.ci_effect = inf.ci_effect;
    } catch (const std::exception& e) {
      er.error = e.what();
      er.t_stat = er.df = er.p_value = kNaN;
      er.ci_link = er.ci_effect = {kNaN, kNaN};
      if (er.se == 0.0 && er.variance == 0.0) er.se = er.variance = kNaN;
    }
    rep.estimates.push_back(std::move(er));
  }
  return rep;
}

std::string serialize_report(const AnalysisReport& r) {
  json j;
  j["model"] = r.model;
  j["effect_measure"] = r.effect_measure;
  j["reference"] = r.reference;
  j["level"] = r.level;
  j["arms"] = {{"control", arm_json(r.control)}, {"intervention", arm_json(r.intervention)}};
  j["n_clusters"] = r.n_clusters;
  j["n_observations"] = r.n_observations;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["failure"] = r.failure;
  j["icc"] = number(r.icc);
  j["icc_clamped"] = r.icc_clamped;
  j["phi"] = number(r.phi);
  json beta = json::array();
  for (double b : r.beta) beta.push_back(number(b));
  j["beta"] = beta;
  j["estimate_effect"] = number(r.estimate_effect);
  json est = json::array();
  for (const auto& e : r.estimates) {
    json x = {{"estimator", std::string(to_string(e.kind))},
              {"se", number(e.se)},
              {"variance", number(e.variance)},
              {"t", number(e.t_stat)},
              {"df", number(e.df)},
              {"p_value", number(e.p_value)},
              {"ci_link", pair_json(e.ci_link)},
              {"ci_effect", pair_json(e.ci_effect)},
              {"q_max", number(e.q_max)}};
    if (!e.error.empty()) x["error"] = e.error;
    est.push_back(std::move(x));
  }
  j["estimates"] = est;
  return j.dump(2) + "\n";
}

AnalysisReport parse_report(const std::string& text) {
  AnalysisReport r;
  try {
    const json j = json::parse(text);
    r.model = j.at("model").get<std::string>();
    r.effect_measure = j.at("effect_measure").get<std::string>();
    r.reference = j.at("reference").get<std::string>();
    r.level = j.at("level").get<double>();
    r.control = arm_from(j.at("arms").at("control"));
    r.intervention = arm_from(j.at("arms").at("intervention"));
    r.n_clusters = j.at("n_clusters").get<std::size_t>();
    r.n_observations = j.at("n_observations").get<std::size_t>();
    r.converged = j.at("converged").get<bool>();
    r.iterations = j.at("iterations").get<int>();
    r.failure = j.at("failure").get<std::string>();
    r.icc = number_from(j.at("icc"));
    r.icc_clamped = j.at("icc_clamped").get<bool>();
    r.phi = number_from(j.at("phi"));
    for (const auto& b : j.at("beta")) r.beta.push_back(number_from(b));
    r.estimate_effect = number_from(j.at("estimate_effect"));
    for (const auto& x : j.at("estimates")) {
      EstimateReport e;
      const auto kind = parse_variance_kind(x.at("estimator").get<std::string>());
      if (!kind) throw InputError(0, "unknown estimator in report");
      e.kind = *kind;
      e.se = number_from(x.at("se"));
      e.variance = number_from(x.at("variance"));
      e.t_stat = number_from(x.at("t"));
      e.df = number_from(x.at("df"));
      e.p_value = number_from(x.at("p_value"));
      e.ci_link = pair_from(x.at("ci_link"));
      e.ci_effect = pair_from(x.at("ci_effect"));
      e.q_max = number_from(x.at("q_max"));
      if (x.contains("error")) e.error = x.at("error").get<std::string>();
      r.estimates.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw InputError(0, std::string("malformed report: ") + e.what());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Grid configuration

namespace {

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {"n_clusters", "cluster_sizes", "cvs",       "pi0",
                                                "icc",        "models",        "replicates", "seed",
                                                "output",     "threads",       "fg_bound",  "max_iter",
                                                "alpha_level"};
  return keys;
}

template <typename T, typename Check>
std::vector<T> number_list(const json& doc, const std::string& key, Check check, const char* rule) {
  const auto& v = doc.at(key);
  if (!v.is_array() || v.empty()) throw ConfigError(key, "must be a non-empty array");
  std::vector<T> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError(key, "entries must be numbers");
    if constexpr (std::is_integral_v<T>) {
      if (!x.is_number_integer() || x.get<long long>() < 0) throw ConfigError(key, "entries must be non-negative integers");
    }
    const T value = x.get<T>();
    if (!check(value)) throw ConfigError(key, rule);
    out.push_back(value);
  }
  return out;
}

}  // namespace

GridConfig parse_grid_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("<document>", std::string("not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("<document>", "top level must be an object");
  for (const auto& [key, value] : doc.items()) {
    if (std::find(config_keys().begin(), config_keys().end(), key) == config_keys().end()) {
      throw ConfigError(key, "unknown key");
    }
  }
  for (const char* required : {"n_clusters", "cluster_sizes", "pi0", "icc", "output"}) {
    if (!doc.contains(required)) throw ConfigError(required, "missing required key");
  }

  GridConfig cfg;
  auto& g = cfg.grid;
  g.n_clusters = number_list<std::size_t>(
      doc, "n_clusters", [](std::size_t n) { return n >= 2 && n % 2 == 0; }, "must be even and at least 2");
  g.cvs = doc.contains("cvs") ? number_list<double>(doc, "cvs", [](double v) { return v >= 0.0; }, "must be >= 0")
                              : std::vector<double>{0.0};
  const bool any_fixed = std::any_of(g.cvs.begin(), g.cvs.end(), [](double v) { return v == 0.0; });
  g.cluster_sizes = number_list<double>(
      doc, "cluster_sizes",
      [any_fixed](double m) { return m >= 2.0 && (!any_fixed || m == std::floor(m)); },
      "must be >= 2 (and integers when a cv of 0 is present)");
  g.pi0 = number_list<double>(doc, "pi0", [](double v) { return v > 0.0 && v < 1.0; }, "must lie in (0, 1)");
  g.icc = number_list<double>(doc, "icc", [](double v) { return v >= 0.0 && v < 1.0; }, "must lie in [0, 1)");

  if (doc.contains("models")) {
    const auto& m = doc.at("models");
    if (!m.is_array() || m.empty()) throw ConfigError("models", "must be a non-empty array of names");
    for (const auto& name : m) {
      if (!name.is_string()) throw ConfigError("models", "entries must be strings like \"poisson-log\"");
      try {
        g.models.push_back(ModelSpec::parse(name.get<std::string>()));
      } catch (const UsageError& e) {
        throw ConfigError("models", e.what());
      }
    }
  } else {
    g.models.assign(all_models().begin(), all_models().end());
  }

  auto positive_int = [&](const char* key, long long min) -> long long {
    const auto& v = doc.at(key);
    if (!v.is_number_integer() || v.get<long long>() < min) {
      throw ConfigError(key, "must be an integer >= " + std::to_string(min));
    }
    return v.get<long long>();
  };
  if (doc.contains("replicates")) g.replicates = static_cast<std::size_t>(positive_int("replicates", 1));
  if (doc.contains("seed")) {
    const auto& v = doc.at("seed");
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw ConfigError("seed", "must be a non-negative integer");
    }
    g.seed = v.get<std::uint64_t>();
  }
  if (doc.contains("threads")) cfg.threads = static_cast<unsigned>(positive_int("threads", 1));
  if (doc.contains("max_iter")) g.settings.fit.max_iter = static_cast<int>(positive_int("max_iter", 1));
  if (doc.contains("fg_bound")) {
    const auto& v = doc.at("fg_bound");
    if (!v.is_number() || !(v.get<double>() > 0.0 && v.get<double>() <= 1.0)) {
      throw ConfigError("fg_bound", "must lie in (0, 1]");
    }
    g.settings.fg_bound = v.get<double>();
  }
  if (doc.contains("alpha_level")) {
    const auto& v = doc.at("alpha_level");
    if (!v.is_number() || !(v.get<double>() > 0.0 && v.get<double>() < 1.0)) {
      throw ConfigError("alpha_level", "must lie in (0, 1)");
    }
    g.settings.alpha_level = v.get<double>();
  }
  const auto& out = doc.at("output");
  if (!out.is_string() || out.get<std::string>().empty()) throw ConfigError("output", "must be a non-empty path");
  cfg.output = out.get<std::string>();
  return cfg;
}

GridConfig read_grid_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("<document>", "cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_grid_config(os.str());
}

// ---------------------------------------------------------------------------
// Results file

const std::vector<std::string>& results_columns() {
  static const std::vector<std::string> cols = {
      "scenario_id", "n_clusters", "cluster_size", "cv",     "pi0",     "icc",      "family", "link", "estimator",
      "n_rep",       "n_conv",     "conv_rate",    "esd",    "mean_se", "pct_bias", "type1",  "acceptable"};
  return cols;
}

std::string results_header() { return join(results_columns(), ','); }

std::string format_number(double value) {
  if (std::isnan(value)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

double parse_number(const std::string& text) {
  if (text == "NA") return kNaN;
  double v = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) throw InputError(0, "not a number: '" + text + "'");
  return v;
}

std::vector<ResultRow> to_rows(const ScenarioResult& res) {
  std::vector<ResultRow> rows;
  for (const auto& e : res.estimators) {
    ResultRow r;
    r.scenario_id = res.scenario.id;
    r.n_clusters = res.scenario.n_clusters;
    r.cluster_size = res.scenario.cluster_size.mean;
    r.cv = res.scenario.cluster_size.cv;
    r.pi0 = res.scenario.pi0;
    r.icc = res.scenario.icc;
    r.family = std::string(to_string(res.spec.family()));
    r.link = std::string(to_string(res.spec.link()));
    r.estimator = std::string(to_string(e.kind));
    r.n_rep = res.n_replicates;
    r.n_conv = res.n_converged;
    r.conv_rate = res.convergence_rate;
    r.esd = res.esd;
    r.mean_se = e.mean_se;
    r.pct_bias = e.percent_bias;
    r.type1 = e.type1_error;
    r.acceptable = e.acceptable;
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string format_row(const ResultRow& r) {
  return join({std::to_string(r.scenario_id), std::to_string(r.n_clusters), format_number(r.cluster_size),
               format_number(r.cv), format_number(r.pi0), format_number(r.icc), r.family, r.link, r.estimator,
               std::to_string(r.n_rep), std::to_string(r.n_conv), format_number(r.conv_rate), format_number(r.esd),
               format_number(r.mean_se), format_number(r.pct_bias), format_number(r.type1),
               r.acceptable ? "1" : "0"},
              ',');
}

std::vector<ResultRow> read_results(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<ResultRow> rows;
  bool have_header = false;
  auto to_count = [&](const std::string& s) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw InputError(line_no, "not a count: '" + s + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (!have_header) {
      if (line != results_header()) throw InputError(line_no, "results header does not match the expected schema");
      have_header = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != results_columns().size()) {
      throw InputError(line_no, "expected " + std::to_string(results_columns().size()) + " fields, found " +
                                    std::to_string(f.size()));
    }
    ResultRow r;
    try {
      r.scenario_id = to_count(f[0]);
      r.n_clusters = to_count(f[1]);
      r.cluster_size = parse_number(f[2]);
      r.cv = parse_number(f[3]);
      r.pi0 = parse_number(f[4]);
      r.icc = parse_number(f[5]);
      r.family = f[6];
      r.link = f[7];
      r.estimator = f[8];
      r.n_rep = to_count(f[9]);
      r.n_conv = to_count(f[10]);
      r.conv_rate = parse_number(f[11]);
      r.esd = parse_number(f[12]);
      r.mean_se = parse_number(f[13]);
      r.pct_bias = parse_number(f[14]);
      r.type1 = parse_number(f[15]);
    } catch (const InputError& e) {
      if (e.line() != 0) throw;
      throw InputError(line_no, e.what());
    }
    if (f[16] != "0" && f[16] != "1") throw InputError(line_no, "acceptable must be 0 or 1");
    r.acceptable = f[16] == "1";
    if (!parse_family(r.family) || !parse_link(r.link)) throw InputError(line_no, "unknown family or link");
    if (!parse_variance_kind(r.estimator)) throw InputError(line_no, "unknown estimator '" + r.estimator + "'");
    rows.push_back(std::move(r));
  }
  if (!have_header) throw InputError(0, "results file is empty");
  return rows;
}

std::set<std::size_t> completed_scenarios(const std::vector<ResultRow>& rows, std::size_t rows_per_scenario) {
  std::map<std::size_t, std::size_t> counts;
  for (const auto& r : rows) ++counts[r.scenario_id];
  std::set<std::size_t> done;
  for (const auto& [id, n] : counts) {
    if (n == rows_per_scenario) done.insert(id);
  }
  return done;
}

// ---------------------------------------------------------------------------
// Pivot

const std::vector<std::string>& groupable_columns() {
  static const std::vector<std::string> cols = {"scenario_id", "n_clusters", "cluster_size", "cv",       "pi0",
                                                "icc",         "family",     "link",         "estimator"};
  return cols;
}

namespace {

std::string key_value(const ResultRow& r, const std::string& col) {
  if (col == "scenario_id") return std::to_string(r.scenario_id);
  if (col == "n_clusters") return std::to_string(r.n_clusters);
  if (col == "cluster_size") return format_number(r.cluster_size);
  if (col == "cv") return format_number(r.cv);
  if (col == "pi0") return format_number(r.pi0);
  if (col == "icc") return format_number(r.icc);
  if (col == "family") return r.family;
  if (col == "link") return r.link;
  return r.estimator;
}

struct MeanAcc {
  double sum = 0.0;
  std::size_t n = 0;
  void add(double v) {
    if (std::isfinite(v)) {
      sum += v;
      ++n;
    }
  }
  double value() const { return n == 0 ? kNaN : sum / static_cast<double>(n); }
};

struct Group {
  std::vector<std::string> key;
  std::size_t rows = 0;
  std::size_t n_rep = 0;
  std::size_t n_conv = 0;
  MeanAcc conv_rate, esd, mean_se, pct_bias, type1, acceptable;
};

}  // namespace

std::string pivot_results(const std::vector<ResultRow>& rows, const std::vector<std::string>& by) {
  std::vector<std::string> keys;
  for (const auto& col : by) {
    if (std::find(groupable_columns().begin(), groupable_columns().end(), col) == groupable_columns().end()) {
      throw InputError(0, "cannot group by '" + col + "'");
    }
    if (std::find(keys.begin(), keys.end(), col) == keys.end()) keys.push_back(col);
  }
  for (const char* always : {"family", "link", "estimator"}) {
    if (std::find(keys.begin(), keys.end(), always) == keys.end()) keys.emplace_back(always);
  }

  std::vector<Group> groups;
  std::map<std::vector<std::string>, std::size_t> index;
  for (const auto& r : rows) {
    if (type1_acceptable(r.type1) != r.acceptable) {
      throw InputError(0, "scenario " + std::to_string(r.scenario_id) + " " + r.estimator +
                              ": acceptable flag disagrees with type1 " + format_number(r.type1));
    }
    std::vector<std::string> key;
    key.reserve(keys.size());
    for (const auto& k : keys) key.push_back(key_value(r, k));
    auto [it, inserted] = index.try_emplace(key, groups.size());
    if (inserted) {
      groups.emplace_back();
      groups.back().key = key;
    }
    auto& g = groups[it->second];
    ++g.rows;
    g.n_rep += r.n_rep;
    g.n_conv += r.n_conv;
    g.conv_rate.add(r.conv_rate);
    g.esd.add(r.esd);
    g.mean_se.add(r.mean_se);
    g.pct_bias.add(r.pct_bias);
    g.type1.add(r.type1);
    g.acceptable.add(r.acceptable ? 1.0 : 0.0);
  }

  std::ostringstream os;
  std::vector<std::string> header = keys;
  for (const char* c : {"n_rows", "n_rep", "n_conv", "conv_rate", "esd", "mean_se", "pct_bias", "type1",
                        "acceptable_share"}) {
    header.emplace_back(c);
  }
  os << join(header, ',') << '\n';
  for (const auto& g : groups) {
    std::vector<std::string> cells = g.key;
    cells.push_back(std::to_string(g.rows));
    cells.push_back(std::to_string(g.n_rep));
    cells.push_back(std::to_string(g.n_conv));
    for (const auto* acc : {&g.conv_rate, &g.esd, &g.mean_se, &g.pct_bias, &g.type1, &g.acceptable}) {
      cells.push_back(format_number(acc->value()));
    }
    os << join(cells, ',') << '\n';
  }
  return os.str();
}

}  // namespace crtgee::io
