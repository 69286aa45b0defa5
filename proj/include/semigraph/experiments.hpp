#pragma once

// Stopping-time experiments on random graph dynamics (triangle appearance,
// information spreading), their six-number summaries, parameter scans, and
// the two-state ergodicity experiment.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "semigraph/format.hpp"
#include "semigraph/graph_core.hpp"
#include "semigraph/random.hpp"
#include "semigraph/renewal.hpp"
#include "semigraph/subordination.hpp"

namespace semigraph {

enum class Example { TriangleA, InfoSpreadB, Ergodicity };

inline std::string_view to_string(Example e) {
  switch (e) {
    case Example::TriangleA: return "example-a";
    case Example::InfoSpreadB: return "example-b";
    case Example::Ergodicity: return "ergodicity";
  }
  return "unknown";
}

/// Toggles one of the M(M-1)/2 unordered non-loop pairs, chosen uniformly.
class ExampleAKernel {
 public:
  explicit ExampleAKernel(std::size_t m) : m_(m) {
    if (m < 3) throw std::invalid_argument("example A needs M >= 3");
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) pairs_.emplace_back(i, j);
  }

  std::size_t size() const { return m_; }
  std::size_t pair_count() const { return pairs_.size(); }
  std::pair<std::size_t, std::size_t> pair(std::size_t k) const { return pairs_.at(k); }

  /// Index of the pair the next call would toggle (consumes one draw).
  std::size_t draw_pair(Rng& rng) const { return static_cast<std::size_t>(rng.below(pairs_.size())); }

  void operator()(GraphState& g, Rng& rng) const {
    const auto [i, j] = pairs_[draw_pair(rng)];
    g.toggle_edge(i, j);
  }

 private:
  std::size_t m_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
};

/// An informed vertex m, uniform over the component of vertex 0, links to a
/// target uniform over the other M-1 vertices. Existing edges are left as is.
class ExampleBKernel {
 public:
  explicit ExampleBKernel(std::size_t m) : m_(m) {
    if (m < 2) throw std::invalid_argument("example B needs M >= 2");
  }

  std::size_t size() const { return m_; }

  void operator()(GraphState& g, Rng& rng) const {
    const auto informed = component_of(g, 0);
    const std::size_t speaker = informed[rng.below(informed.size())];
    std::size_t target = rng.below(m_ - 1);
    if (target >= speaker) ++target;
    if (!g.has_edge(speaker, target)) g.set_edge(speaker, target, true);
  }

 private:
  std::size_t m_;
};

inline ExampleAKernel kernel_example_a(std::size_t m) { return ExampleAKernel(m); }
inline ExampleBKernel kernel_example_b(std::size_t m) { return ExampleBKernel(m); }

/// Six-number summary in the layout of R's summary(): Min, 1st Qu., Median,
/// Mean, 3rd Qu., Max. Computed on uncensored samples.
struct SummaryStats {
  double min = 0, q1 = 0, median = 0, mean = 0, q3 = 0, max = 0;
  std::size_t count = 0;
  std::size_t censored_count = 0;

  static std::string header() {
    return "     Min.   1st Qu.    Median      Mean   3rd Qu.      Max.";
  }

  std::string line() const {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%9.4g %9.4g %9.4g %9.4g %9.4g %9.4g", min, q1, median, mean, q3,
                  max);
    return buf;
  }
};

/// Linear interpolation between order statistics at 1 + (n-1)p (R type 7).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile level must lie in [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

inline SummaryStats summarize(std::vector<double> samples, std::size_t censored = 0) {
  if (samples.empty()) throw std::invalid_argument("no uncensored samples to summarize");
  std::sort(samples.begin(), samples.end());
  SummaryStats s;
  s.min = samples.front();
  s.max = samples.back();
  s.q1 = quantile_sorted(samples, 0.25);
  s.median = quantile_sorted(samples, 0.5);
  s.q3 = quantile_sorted(samples, 0.75);
  double sum = 0.0;
  for (double v : samples) sum += v;
  s.mean = std::clamp(sum / static_cast<double>(samples.size()), s.min, s.max);
  s.count = samples.size();
  s.censored_count = censored;
  return s;
}

/// Quantiles at p = 0.01, 0.02, ..., 0.99 for external box plots.
inline std::vector<std::pair<double, double>> quantile_grid(std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  std::vector<std::pair<double, double>> grid;
  for (int k = 1; k <= 99; ++k) {
    const double p = k / 100.0;
    grid.emplace_back(p, quantile_sorted(samples, p));
  }
  return grid;
}

/// Kolmogorov-Smirnov distance sup |F_n - F| between a sample and a CDF.
template <class Cdf>
double ks_distance(std::vector<double> samples, Cdf&& cdf) {
  if (samples.empty()) throw std::invalid_argument("KS distance of an empty sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

/// Asymptotic 1% critical value of the one-sample KS test.
inline double ks_critical_1pct(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

struct ExperimentConfig {
  Example example = Example::TriangleA;
  std::size_t m = 10;
  SojournLaw law = SojournLaw::mittag_leffler(0.99);
  std::size_t reps = 10000;
  std::uint64_t master_seed = 1;
  std::size_t max_transitions = 1'000'000;
  unsigned threads = 1;

  void validate() const {
    if (reps == 0) throw std::invalid_argument("reps must be positive");
    if (max_transitions == 0) throw std::invalid_argument("max_transitions must be positive");
    if (example == Example::TriangleA && m < 3) throw std::invalid_argument("example A needs M >= 3");
    if (example == Example::InfoSpreadB && m < 2) throw std::invalid_argument("example B needs M >= 2");
    if (example == Example::Ergodicity)
      throw std::invalid_argument("use ergodicity_experiment for the two-state chain");
  }
};

/// One replication: clock-time stopping time and the transition count.
struct StopSample {
  double time = 0.0;
  std::size_t transitions = 0;
  bool censored = false;
};

struct ExperimentResult {
  SummaryStats stats;
  std::vector<StopSample> samples;

  std::vector<double> stopping_times() const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples)
      if (!s.censored) out.push_back(s.time);
    return out;
  }
};

inline GraphState empty_simple_graph(std::size_t m) { return GraphState(GraphMode::UndirectedSimple, m); }

/// Replication r uses streams (master_seed, r, Clock) and (master_seed, r, Chain).
inline StopSample run_replication(const ExperimentConfig& cfg, std::size_t rep) {
  Rng clock = Rng::derive(cfg.master_seed, rep, StreamTag::Clock);
  Rng chain = Rng::derive(cfg.master_seed, rep, StreamTag::Chain);
  const auto policy = SojournPolicy<GraphState>::global(cfg.law);
  const GraphState start = empty_simple_graph(cfg.m);
  StopResult r;
  if (cfg.example == Example::TriangleA) {
    r = stopping_time(ExampleAKernel(cfg.m), policy, start,
                      [](const GraphState& g) { return contains_triangle(g); }, cfg.max_transitions,
                      clock, chain);
  } else {
    r = stopping_time(ExampleBKernel(cfg.m), policy, start,
                      [](const GraphState& g) { return is_connected(g); }, cfg.max_transitions,
                      clock, chain);
  }
  return {r.time, r.transitions, !r.stopped};
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult res;
  res.samples.resize(cfg.reps);
  parallel_for(cfg.reps, cfg.threads,
               [&](std::size_t r) { res.samples[r] = run_replication(cfg, r); });
  std::size_t censored = 0;
  for (const auto& s : res.samples) censored += s.censored ? 1 : 0;
  res.stats = summarize(res.stopping_times(), censored);
  return res;
}

struct ScanRow {
  double parameter = 0.0;  // beta or M
  SummaryStats stats;
};

/// One row per beta; M and the seed policy are taken from the template.
inline std::vector<ScanRow> scan_beta(const ExperimentConfig& base, const std::vector<double>& betas) {
  std::vector<ScanRow> rows;
  for (double beta : betas) {
    ExperimentConfig cfg = base;
    cfg.law = SojournLaw::mittag_leffler(beta, base.law.is_exponential() ? 1.0 : base.law.ml_params().scale);
    rows.push_back({beta, run_experiment(cfg).stats});
  }
  return rows;
}

inline std::vector<ScanRow> scan_m(const ExperimentConfig& base, const std::vector<std::size_t>& ms) {
  std::vector<ScanRow> rows;
  for (std::size_t m : ms) {
    ExperimentConfig cfg = base;
    cfg.m = m;
    rows.push_back({static_cast<double>(m), run_experiment(cfg).stats});
  }
  return rows;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares y = intercept + slope x.
inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("linear_fit needs >= 2 paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

/// Number of adjacent decreases in a sequence.
inline std::size_t count_inversions(const std::vector<double>& y) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < y.size(); ++i)
    if (y[i] < y[i - 1]) ++n;
  return n;
}

// ---------------------------------------------------------------------------
// Two-state chain with state-dependent exponential sojourns.

/// Jump matrix of the two-state chain: stay with 0.1, switch with 0.9.
inline StochasticMatrix two_state_matrix() {
  StochasticMatrix p(2, 2);
  p << 0.1, 0.9, 0.9, 0.1;
  return p;
}

/// States A and B as the two graphs on one node: no loop (A) and a loop (B).
inline std::vector<GraphState> two_state_space() { return enumerate_graphs(1, GraphMode::UndirectedWithLoops); }

struct ErgodicityResult {
  double time_fraction_a = 0.0;             // occupation of A / horizon, one long path
  std::array<double, 2> ensemble{};         // law of Y(horizon) across paths
  std::array<double, 2> ensemble_stderr{};
  std::array<double, 2> jump_ensemble{};    // law of X_n at n = jump_step across paths
  std::array<double, 2> jump_ensemble_stderr{};
  std::size_t jump_step = 0;
  std::array<double, 2> invariant{};        // p0 P^{m-1} for m = 50
};

/// The long path uses trajectory id `reps`; ensemble paths use ids 0..reps-1.
/// All paths start in A.
inline ErgodicityResult ergodicity_experiment(double lambda_a, double lambda_b, double horizon,
                                              std::size_t reps, std::uint64_t master_seed,
                                              unsigned threads = 1, std::size_t jump_step = 1000) {
  if (!(lambda_a > 0.0) || !(lambda_b > 0.0)) throw std::invalid_argument("rates must be positive");
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (reps == 0) throw std::invalid_argument("reps must be positive");
  const ExplicitKernel kernel(two_state_space(), two_state_matrix());
  const GraphState state_a = kernel.states()[0];
  const auto law_a = SojournLaw::exponential(lambda_a);
  const auto law_b = SojournLaw::exponential(lambda_b);
  const auto policy = SojournPolicy<GraphState>::state_dependent(
      [=](const GraphState& x) { return x.has_edge(0, 0) ? law_b : law_a; });

  ErgodicityResult out;
  out.jump_step = jump_step;
  {
    Rng clock = Rng::derive(master_seed, reps, StreamTag::Clock);
    Rng chain = Rng::derive(master_seed, reps, StreamTag::Chain);
    GraphState state = state_a;
    double occupied_a = 0.0, last = 0.0;
    bool in_a = true;
    run_path(kernel, policy, state, horizon, clock, chain, [&](std::size_t, double t, const GraphState& x) {
      if (in_a) occupied_a += t - last;
      last = t;
      in_a = !x.has_edge(0, 0);
      return true;
    });
    if (in_a) occupied_a += horizon - last;
    out.time_fraction_a = occupied_a / horizon;
  }

  std::vector<char> final_in_a(reps), jump_in_a(reps, 2);
  parallel_for(reps, threads, [&](std::size_t r) {
    Rng clock = Rng::derive(master_seed, r, StreamTag::Clock);
    Rng chain = Rng::derive(master_seed, r, StreamTag::Chain);
    GraphState state = state_a;
    run_path(kernel, policy, state, horizon, clock, chain, [&](std::size_t n, double, const GraphState& x) {
      if (n == jump_step) jump_in_a[r] = x.has_edge(0, 0) ? 0 : 1;
      return true;
    });
    final_in_a[r] = state.has_edge(0, 0) ? 0 : 1;
  });
  auto proportion = [](const std::vector<char>& flags, std::array<double, 2>& p, std::array<double, 2>& se) {
    std::size_t n = 0, a = 0;
    for (char f : flags) {
      if (f == 2) continue;
      ++n;
      a += static_cast<std::size_t>(f);
    }
    if (n == 0) return;
    p[0] = static_cast<double>(a) / static_cast<double>(n);
    p[1] = 1.0 - p[0];
    se[0] = se[1] = std::sqrt(p[0] * p[1] / static_cast<double>(n));
  };
  proportion(final_in_a, out.ensemble, out.ensemble_stderr);
  proportion(jump_in_a, out.jump_ensemble, out.jump_ensemble_stderr);

  Eigen::RowVectorXd p0(2);
  p0 << 1.0, 0.0;
  const auto limit = marginal_at_step(p0, two_state_matrix(), 50);
  out.invariant = {limit(0), limit(1)};
  return out;
}

// ---------------------------------------------------------------------------
// CSV output.

inline void write_samples_csv(std::ostream& os, const std::vector<StopSample>& samples) {
  os << "rep,stopping_time,transitions,censored\n";
  for (std::size_t r = 0; r < samples.size(); ++r)
    os << r << ',' << format_real(samples[r].time) << ',' << samples[r].transitions << ','
       << (samples[r].censored ? 1 : 0) << '\n';
}

inline void write_quantile_csv(std::ostream& os, const std::string& label,
                               const std::vector<std::pair<double, double>>& grid, bool header = true) {
  if (header) os << "config,p,quantile\n";
  for (const auto& [p, q] : grid) os << csv_field(label) << ',' << format_real(p) << ',' << format_real(q) << '\n';
}

inline void write_scan_csv(std::ostream& os, const std::string& parameter, const std::vector<ScanRow>& rows) {
  os << parameter << ",min,q1,median,mean,q3,max,count,censored\n";
  for (const auto& row : rows) {
    const auto& s = row.stats;
    os << format_real(row.parameter) << ',' << format_real(s.min) << ',' << format_real(s.q1) << ','
       << format_real(s.median) << ',' << format_real(s.mean) << ',' << format_real(s.q3) << ','
       << format_real(s.max) << ',' << s.count << ',' << s.censored_count << '\n';
  }
}

}  // namespace semigraph
