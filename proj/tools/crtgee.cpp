// crtgee: analyse cluster randomized trials with bias-corrected GEE sandwich
// estimators and run Type I error simulation grids.
//
// Exit codes: 0 success, 1 bad input or configuration, 2 the model did not
// converge (the analysis report is still written).

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "crtgee/errors.hpp"
#include "crtgee/io.hpp"

namespace {

constexpr int kExitInput = 1;
constexpr int kExitNonConvergence = 2;

unsigned default_threads() {
  if (const char* env = std::getenv("CRTGEE_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring invalid CRTGEE_THREADS='" << env << "'\n";
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw crtgee::io::InputError(0, "cannot write " + path);
  out << text;
}

struct AnalyzeArgs {
  std::string data;
  std::string family = "poisson";
  std::string link = "log";
  std::vector<std::string> corrections;
  double level = 0.95;
  double fg_bound = 0.75;
  int max_iter = 50;
  bool z = false;
  std::string out;
};

int run_analyze(const AnalyzeArgs& a) {
  using namespace crtgee;
  const auto family = parse_family(a.family);
  const auto link = parse_link(a.link);
  if (!family || !link) throw UsageError("unknown family or link");
  const ModelSpec spec(*family, *link);

  io::AnalyzeOptions opts;
  opts.level = a.level;
  opts.fg_bound = a.fg_bound;
  opts.z_reference = a.z;
  opts.fit.max_iter = a.max_iter;
  if (!a.corrections.empty()) {
    opts.kinds.clear();
    for (const auto& name : a.corrections) {
      const auto kind = parse_variance_kind(name);
      if (!kind) throw UsageError("unknown estimator '" + name + "' (use mb, robust, kc, md, fg, mbn, avg)");
      opts.kinds.push_back(*kind);
    }
  }

  const TrialDataset data = io::read_trial_csv(a.data);
  const auto report = io::analyze(data, spec, opts);
  write_output(a.out, io::serialize_report(report));
  if (!report.converged) {
    std::cerr << "model did not converge: " << report.failure << '\n';
    return kExitNonConvergence;
  }
  return 0;
}

struct SimulateArgs {
  std::string config;
  unsigned threads = 0;
  bool resume = false;
  std::string out;
};

int run_simulate(const SimulateArgs& a) {
  using namespace crtgee;
  io::GridConfig cfg = io::read_grid_config(a.config);
  if (!a.out.empty()) cfg.output = a.out;
  const unsigned threads = a.threads > 0 ? a.threads : cfg.threads.value_or(default_threads());
  const std::size_t rows_per_scenario = cfg.grid.models.size() * kAllVarianceKinds.size();

  std::set<std::size_t> done;
  std::vector<io::ResultRow> kept;
  if (a.resume && std::filesystem::exists(cfg.output)) {
    std::ifstream file(cfg.output, std::ios::binary);
    std::ostringstream buf;
    buf << file.rdbuf();
    std::string text = buf.str();
    text.erase(text.rfind('\n') == std::string::npos ? 0 : text.rfind('\n') + 1);  // drop a torn last line
    std::istringstream in(text);
    const auto rows = text.empty() ? std::vector<io::ResultRow>{} : io::read_results(in);
    done = io::completed_scenarios(rows, rows_per_scenario);
    for (const auto& r : rows) {
      if (done.contains(r.scenario_id)) kept.push_back(r);
    }
    std::cerr << "resuming: " << done.size() << " of " << cfg.grid.n_scenarios() << " scenarios already complete\n";
  }

  const auto parent = std::filesystem::path(cfg.output).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(cfg.output, std::ios::binary | std::ios::trunc);
  if (!out) throw io::InputError(0, "cannot write " + cfg.output);
  out << io::results_header() << '\n';
  for (const auto& r : kept) out << io::format_row(r) << '\n';
  out.flush();

  std::size_t finished = done.size();
  const std::size_t total = cfg.grid.n_scenarios();
  run_grid(cfg.grid, threads, done, [&](const std::vector<ScenarioResult>& results) {
    for (const auto& res : results) {
      for (const auto& row : io::to_rows(res)) out << io::format_row(row) << '\n';
    }
    out.flush();
    ++finished;
    std::cerr << "scenario " << results.front().scenario.id << " done (" << finished << "/" << total << ")\n";
  });
  return 0;
}

struct ReportArgs {
  std::string results;
  std::vector<std::string> by{"estimator"};
  std::string out;
};

int run_report(const ReportArgs& a) {
  std::ifstream in(a.results);
  if (!in) throw crtgee::io::InputError(0, "cannot open " + a.results);
  const auto rows = crtgee::io::read_results(in);
  write_output(a.out, crtgee::io::pivot_results(rows, a.by));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GEE risk ratios, risk differences and odds ratios for cluster randomized trials"};
  app.require_subcommand(1);

  AnalyzeArgs analyze_args;
  auto* analyze = app.add_subcommand("analyze", "Fit one model to a trial CSV and report corrected inference");
  analyze->add_option("--data", analyze_args.data, "CSV with header cluster_id,arm,outcome")->required();
  analyze->add_option("--family", analyze_args.family, "binomial | poisson | gaussian")->capture_default_str();
  analyze->add_option("--link", analyze_args.link, "log | identity | logit")->capture_default_str();
  analyze->add_option("--corrections", analyze_args.corrections, "Estimators: mb,robust,kc,md,fg,mbn,avg (default all)")
      ->delimiter(',');
  analyze->add_option("--level", analyze_args.level, "Confidence level")->capture_default_str();
  analyze->add_option("--fg-r", analyze_args.fg_bound, "Fay-Graubard bound r")->capture_default_str();
  analyze->add_option("--max-iter", analyze_args.max_iter, "Fisher scoring iteration limit")->capture_default_str();
  analyze->add_flag("--z", analyze_args.z, "Normal reference instead of t (diagnostic only)");
  analyze->add_option("--out", analyze_args.out, "Report path (default stdout)");

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Run a factorial simulation grid from a JSON config");
  simulate->add_option("--config", sim_args.config, "Grid configuration (JSON)")->required();
  simulate->add_option("--threads", sim_args.threads,
                       "Worker threads (default: config, then $CRTGEE_THREADS, then hardware)");
  simulate->add_flag("--resume", sim_args.resume, "Keep completed scenarios from an existing results file");
  simulate->add_option("--out", sim_args.out, "Override the config's output path");

  ReportArgs report_args;
  auto* report = app.add_subcommand("report", "Pivot a results file into plot-ready summaries");
  report->add_option("--results", report_args.results, "Results file written by simulate")->required();
  report->add_option("--by", report_args.by, "Grouping columns, e.g. icc,n_clusters")->delimiter(',');
  report->add_option("--out", report_args.out, "Output path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analyze) return run_analyze(analyze_args);
    if (*simulate) return run_simulate(sim_args);
    if (*report) return run_report(report_args);
  } catch (const crtgee::io::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return 0;
}
