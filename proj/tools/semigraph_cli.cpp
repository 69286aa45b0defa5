// semigraph: experiment runners, renewal checks and the interbank market.
// Exit status: 0 ok, 1 runtime failure, 2 usage or configuration error.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "semigraph/semigraph.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace semigraph;

namespace {

constexpr const char* kVersion = "1.0.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 1;
  unsigned threads = default_thread_count();
  std::string out_dir;
  std::string command_line;
};

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string digest(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Collects outputs of one run and writes <command>.manifest.json at the end.
class Run {
 public:
  Run(const Globals& g, std::string command, json config)
      : g_(g), command_(std::move(command)), config_(std::move(config)), started_(timestamp()) {
    fs::create_directories(dir());
  }

  fs::path dir() const { return g_.out_dir.empty() ? fs::path(".") : fs::path(g_.out_dir); }

  fs::path output(const std::string& name) {
    fs::path p = fs::path(name).is_absolute() ? fs::path(name) : dir() / name;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    outputs_.push_back(p.string());
    return p;
  }

  std::ofstream open(const std::string& name) {
    std::ofstream os(output(name), std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + name);
    return os;
  }

  void finish() const {
    const json manifest{{"command", command_},
                        {"command_line", g_.command_line},
                        {"config", config_},
                        {"config_digest", digest(config_.dump())},
                        {"seed", g_.seed},
                        {"threads", g_.threads},
                        {"version", kVersion},
                        {"started_at", started_},
                        {"finished_at", timestamp()},
                        {"outputs", outputs_}};
    std::ofstream os(dir() / (command_ + ".manifest.json"));
    os << manifest.dump(2) << '\n';
  }

 private:
  const Globals& g_;
  std::string command_;
  json config_;
  std::string started_;
  std::vector<std::string> outputs_;
};

struct LawFlags {
  std::optional<double> beta;
  std::optional<double> rate;
  double scale = 1.0;

  SojournLaw law(double default_beta) const {
    if (beta && rate) throw UsageError("--beta and --rate are mutually exclusive");
    try {
      if (rate) return SojournLaw::exponential(*rate);
      return SojournLaw::mittag_leffler(beta.value_or(default_beta), scale);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
};

void add_law_flags(CLI::App* cmd, LawFlags& f) {
  cmd->add_option("--beta", f.beta, "Mittag-Leffler index in (0, 1]");
  cmd->add_option("--rate", f.rate, "exponential sojourn rate");
  cmd->add_option("--scale", f.scale, "Mittag-Leffler time scale");
}

struct ExampleFlags {
  std::size_t m = 10;
  std::size_t reps = 10000;
  std::size_t max_transitions = 1'000'000;
  std::string out;
  bool emit_quantiles = false;
  LawFlags law;
};

int cmd_example(const Globals& g, Example which, const ExampleFlags& f) {
  const std::string name = which == Example::TriangleA ? "example-a" : "example-b";
  ExperimentConfig cfg;
  cfg.example = which;
  cfg.m = f.m;
  cfg.law = f.law.law(0.99);
  cfg.reps = f.reps;
  cfg.master_seed = g.seed;
  cfg.max_transitions = f.max_transitions;
  cfg.threads = g.threads;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const json config{{"example", name}, {"m", cfg.m}, {"law", cfg.law.to_json()}, {"reps", cfg.reps},
                    {"max_transitions", cfg.max_transitions}};
  Run run(g, name, config);
  const auto res = run_experiment(cfg);
  {
    auto os = run.open(f.out.empty() ? name + ".csv" : f.out);
    write_samples_csv(os, res.samples);
  }
  if (f.emit_quantiles) {
    auto os = run.open(name + "_quantiles.csv");
    const std::string label = name + " m=" + std::to_string(cfg.m) + " " + cfg.law.to_json().dump();
    write_quantile_csv(os, label, quantile_grid(res.stopping_times()));
  }
  std::cout << SummaryStats::header() << '\n' << res.stats.line() << '\n';
  if (res.stats.censored_count > 0)
    std::cout << "censored: " << res.stats.censored_count << " of " << cfg.reps << '\n';
  run.finish();
  return 0;
}

struct ErgodicityFlags {
  double lambda_a = 1.0;
  double lambda_b = 2.0;
  double horizon = 1e4;
  std::size_t reps = 10000;
};

int cmd_ergodicity(const Globals& g, const ErgodicityFlags& f) {
  if (!(f.lambda_a > 0.0) || !(f.lambda_b > 0.0) || !(f.horizon > 0.0) || f.reps == 0)
    throw UsageError("rates, horizon and reps must be positive");
  const json config{{"lambda_a", f.lambda_a}, {"lambda_b", f.lambda_b}, {"horizon", f.horizon}, {"reps", f.reps}};
  Run run(g, "ergodicity", config);
  const auto r = ergodicity_experiment(f.lambda_a, f.lambda_b, f.horizon, f.reps, g.seed, g.threads);
  auto os = run.open("ergodicity.csv");
  os << "quantity,state_a,state_b,std_error\n";
  os << "time_fraction," << format_real(r.time_fraction_a) << ',' << format_real(1.0 - r.time_fraction_a) << ",\n";
  os << "ensemble_at_horizon," << format_real(r.ensemble[0]) << ',' << format_real(r.ensemble[1]) << ','
     << format_real(r.ensemble_stderr[0]) << '\n';
  os << "ensemble_at_jump_" << r.jump_step << ',' << format_real(r.jump_ensemble[0]) << ','
     << format_real(r.jump_ensemble[1]) << ',' << format_real(r.jump_ensemble_stderr[0]) << '\n';
  os << "chain_marginal_step_50," << format_real(r.invariant[0]) << ',' << format_real(r.invariant[1]) << ",\n";
  std::printf("single-path time fraction in A: %.4f\n", r.time_fraction_a);
  std::printf("ensemble law of Y(horizon):     (%.4f, %.4f) +- %.4f\n", r.ensemble[0], r.ensemble[1],
              r.ensemble_stderr[0]);
  std::printf("ensemble law of X_%zu:         (%.4f, %.4f) +- %.4f\n", r.jump_step, r.jump_ensemble[0],
              r.jump_ensemble[1], r.jump_ensemble_stderr[0]);
  std::printf("chain marginal at step 50:      (%.12f, %.12f)\n", r.invariant[0], r.invariant[1]);
  run.finish();
  return 0;
}

struct RenewalFlags {
  LawFlags law;
  double horizon = 100.0;
  std::size_t reps = 10000;
  std::size_t points = 10;
};

int cmd_renewal_check(const Globals& g, const RenewalFlags& f) {
  if (!f.law.beta && !f.law.rate) throw UsageError("renewal-check needs --rate or --beta");
  const SojournLaw law = f.law.law(1.0);
  if (!(f.horizon > 0.0) || f.reps == 0 || f.points == 0) throw UsageError("horizon, reps and points must be positive");
  const json config{{"law", law.to_json()}, {"horizon", f.horizon}, {"reps", f.reps}, {"points", f.points}};
  Run run(g, "renewal-check", config);
  std::vector<double> grid;
  for (std::size_t k = 1; k <= f.points; ++k) grid.push_back(f.horizon * static_cast<double>(k) / f.points);
  const auto est = estimate_renewal_function(law, grid, f.reps, g.seed, g.threads);
  auto os = run.open("renewal-check.csv");
  os << "t,H,std_error,H_over_t\n";
  std::printf("%12s %14s %12s %12s\n", "t", "H(t)", "std.err", "H(t)/t");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    os << format_real(grid[k]) << ',' << format_real(est.mean[k]) << ',' << format_real(est.std_error[k]) << ','
       << format_real(est.mean[k] / grid[k]) << '\n';
    std::printf("%12.4g %14.6g %12.4g %12.6f\n", grid[k], est.mean[k], est.std_error[k], est.mean[k] / grid[k]);
  }
  int status = 0;
  if (const auto mu = law.mean()) {
    const double ratio = est.mean.back() / grid.back() * *mu;
    const bool pass = std::abs(ratio - 1.0) <= 0.02;
    std::printf("H(t)/t * mean sojourn at t=%g: %.4f  %s\n", grid.back(), ratio, pass ? "PASS" : "FAIL");
    status = pass ? 0 : 1;
  } else {
    std::printf("infinite-mean law: no Poisson limit\n");
  }
  run.finish();
  return status;
}

struct MlCheckFlags {
  double beta = 0.9;
  double scale = 1.0;
  std::size_t samples = 100000;
};

int cmd_ml_check(const Globals& g, const MlCheckFlags& f) {
  MLParams p{f.beta, f.scale};
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (f.samples == 0) throw UsageError("samples must be positive");
  const json config{{"beta", f.beta}, {"scale", f.scale}, {"samples", f.samples}};
  Run run(g, "ml-check", config);
  Rng rng = Rng::derive(g.seed, 0, StreamTag::Sampler);
  std::vector<double> xs(f.samples);
  for (auto& x : xs) x = ml_sample(p, rng);
  const double d = ks_distance(xs, [&](double t) { return 1.0 - ml_survival(p, t); });
  const double crit = ks_critical_1pct(xs.size());
  auto os = run.open("ml-check.csv");
  os << "beta,scale,samples,ks_distance,critical_1pct\n"
     << format_real(f.beta) << ',' << format_real(f.scale) << ',' << f.samples << ',' << format_real(d) << ','
     << format_real(crit) << '\n';
  std::printf("KS distance %.6f, 1%% critical value %.6f: %s\n", d, crit, d < crit ? "PASS" : "FAIL");
  run.finish();
  return d < crit ? 0 : 1;
}

int cmd_interbank(const Globals& g, const std::string& config_path, bool seed_given) {
  std::ifstream in(config_path);
  if (!in) throw UsageError("cannot open config '" + config_path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("config is not valid JSON: ") + e.what());
  }
  interbank::MarketConfig cfg;
  try {
    cfg = interbank::MarketConfig::from_json(j);
  } catch (const interbank::ConfigError& e) {
    throw UsageError(std::string("config error at ") + e.what());
  }
  if (seed_given) cfg.seed = g.seed;
  j["seed"] = cfg.seed;
  Run run(g, "interbank", j);
  const auto result = interbank::run_market(cfg);
  {
    auto os = run.open("events.csv");
    interbank::write_events_csv(os, result);
  }
  {
    auto os = run.open("sheets.csv");
    interbank::write_sheets_csv(os, result);
  }
  {
    auto os = run.open("graph.csv");
    interbank::write_graph_csv(os, result);
  }
  std::size_t counts[4] = {};
  for (const auto& ev : result.events) ++counts[static_cast<int>(ev.type)];
  std::printf("requests %zu, grants %zu, repayments %zu, illiquid %zu, negative-balance %zu\n", result.requests,
              counts[0], counts[1], counts[2], counts[3]);
  const auto issues = interbank::audit_market_run(cfg, result);
  for (const auto& issue : issues) std::cerr << "invariant violated: " << issue << '\n';
  std::printf("invariant checks: %s\n", issues.empty() ? "PASS" : "FAIL");
  run.finish();
  return issues.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-valued chains subordinated to renewal processes"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kVersion);

  Globals g;
  if (const char* env = std::getenv("SEMIGRAPH_OUT_DIR")) g.out_dir = env;
  for (int i = 0; i < argc; ++i) g.command_line += (i ? " " : "") + std::string(argv[i]);
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--threads", g.threads, "worker threads (outputs do not depend on it)")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "output directory (default $SEMIGRAPH_OUT_DIR or .)");

  ExampleFlags ex_a, ex_b;
  auto add_example = [&](const char* name, const char* desc, ExampleFlags& f) {
    auto* cmd = app.add_subcommand(name, desc);
    cmd->add_option("--m", f.m, "number of nodes");
    cmd->add_option("--reps", f.reps, "replications");
    cmd->add_option("--max-transitions", f.max_transitions, "censoring bound per replication");
    cmd->add_option("--out", f.out, "raw samples CSV");
    cmd->add_flag("--emit-quantiles", f.emit_quantiles, "write the p = 0.01..0.99 quantile grid");
    add_law_flags(cmd, f.law);
    return cmd;
  };
  auto* cmd_a = add_example("example-a", "first time a triangle appears", ex_a);
  auto* cmd_b = add_example("example-b", "first time the graph is connected", ex_b);

  ErgodicityFlags erg;
  auto* cmd_erg = app.add_subcommand("ergodicity", "two-state chain with state-dependent sojourns");
  cmd_erg->add_option("--lambda-a", erg.lambda_a, "sojourn rate in A");
  cmd_erg->add_option("--lambda-b", erg.lambda_b, "sojourn rate in B");
  cmd_erg->add_option("--horizon", erg.horizon, "time horizon");
  cmd_erg->add_option("--reps", erg.reps, "ensemble size");

  RenewalFlags ren;
  auto* cmd_ren = app.add_subcommand("renewal-check", "renewal function and elementary renewal theorem");
  add_law_flags(cmd_ren, ren.law);
  cmd_ren->add_option("--horizon", ren.horizon, "largest t");
  cmd_ren->add_option("--reps", ren.reps, "replications");
  cmd_ren->add_option("--points", ren.points, "grid points");

  MlCheckFlags mlf;
  auto* cmd_ml = app.add_subcommand("ml-check", "KS test of the Mittag-Leffler sampler");
  cmd_ml->add_option("--beta", mlf.beta, "index in (0, 1]");
  cmd_ml->add_option("--scale", mlf.scale, "time scale");
  cmd_ml->add_option("--samples", mlf.samples, "sample size");

  std::string config_path;
  auto* cmd_ib = app.add_subcommand("interbank", "interbank market simulation");
  cmd_ib->add_option("--config", config_path, "market config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (cmd_a->parsed()) return cmd_example(g, Example::TriangleA, ex_a);
    if (cmd_b->parsed()) return cmd_example(g, Example::InfoSpreadB, ex_b);
    if (cmd_erg->parsed()) return cmd_ergodicity(g, erg);
    if (cmd_ren->parsed()) return cmd_renewal_check(g, ren);
    if (cmd_ml->parsed()) return cmd_ml_check(g, mlf);
    if (cmd_ib->parsed()) return cmd_interbank(g, config_path, app.count("--seed") > 0);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
