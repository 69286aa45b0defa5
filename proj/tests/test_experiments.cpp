#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "semigraph/experiments.hpp"

using namespace semigraph;

namespace {

ExperimentConfig config(Example ex, std::size_t m, SojournLaw law, std::size_t reps, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.example = ex;
  cfg.m = m;
  cfg.law = law;
  cfg.reps = reps;
  cfg.master_seed = seed;
  return cfg;
}

}  // namespace

TEST(Summary, QuantilesFollowTheLinearRule) {
  // R: quantile(c(1, 2, 4, 8), c(.25, .5, .75)) = 1.75 3 5.
  const auto s = summarize({8, 1, 4, 2});
  EXPECT_DOUBLE_EQ(s.min, 1);
  EXPECT_DOUBLE_EQ(s.q1, 1.75);
  EXPECT_DOUBLE_EQ(s.median, 3);
  EXPECT_DOUBLE_EQ(s.mean, 3.75);
  EXPECT_DOUBLE_EQ(s.q3, 5);
  EXPECT_DOUBLE_EQ(s.max, 8);
  EXPECT_DOUBLE_EQ(quantile_sorted({5.0}, 0.3), 5.0);
  EXPECT_THROW(summarize({}), std::invalid_argument);
  EXPECT_THROW(quantile_sorted({1, 2}, 1.5), std::invalid_argument);
}

TEST(Summary, OrderingAndGrid) {
  const auto res = run_experiment(config(Example::TriangleA, 6, SojournLaw::mittag_leffler(0.9), 500, 3));
  const auto& s = res.stats;
  EXPECT_LE(s.min, s.q1);
  EXPECT_LE(s.q1, s.median);
  EXPECT_LE(s.median, s.q3);
  EXPECT_LE(s.q3, s.max);
  EXPECT_GE(s.mean, s.min);
  EXPECT_LE(s.mean, s.max);
  const auto grid = quantile_grid(res.stopping_times());
  ASSERT_EQ(grid.size(), 99u);
  EXPECT_DOUBLE_EQ(grid[49].second, s.median);
  EXPECT_TRUE(std::is_sorted(grid.begin(), grid.end(),
                             [](const auto& a, const auto& b) { return a.second < b.second; }));
}

TEST(Summary, PrintedLayout) {
  EXPECT_EQ(SummaryStats::header(), "     Min.   1st Qu.    Median      Mean   3rd Qu.      Max.");
  EXPECT_EQ(summarize({1, 2, 3}).line(), "        1       1.5         2         2       2.5         3");
}

TEST(ExampleA, PairsAreUniform) {
  const ExampleAKernel k(5);
  ASSERT_EQ(k.pair_count(), 10u);
  std::vector<int> hits(10, 0);
  Rng rng(1);
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++hits[k.draw_pair(rng)];
  const double sigma = std::sqrt(n * 0.1 * 0.9);
  for (int h : hits) EXPECT_NEAR(h, n * 0.1, 3 * sigma);
  EXPECT_THROW(ExampleAKernel(2), std::invalid_argument);
}

TEST(ExampleA, TogglesOneEdgePerStep) {
  const ExampleAKernel k(6);
  GraphState g = empty_simple_graph(6);
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const auto before = edge_count(g);
    k(g, rng);
    const auto after = edge_count(g);
    EXPECT_EQ(std::max(before, after) - std::min(before, after), 1u);
  }
}

TEST(ExampleB, FirstStepsFromTheEmptyGraph) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng rng(s);
    GraphState g = empty_simple_graph(2);
    ExampleBKernel(2)(g, rng);
    EXPECT_TRUE(g.has_edge(0, 1));
    GraphState h = empty_simple_graph(3);
    ExampleBKernel(3)(h, rng);
    EXPECT_EQ(component_of(h, 0).size(), 2u);
  }
}

TEST(ExampleB, EdgesAreNeverRemoved) {
  const ExampleBKernel k(8);
  GraphState g = empty_simple_graph(8);
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const GraphState before = g;
    k(g, rng);
    for (std::size_t a = 0; a < 8; ++a)
      for (std::size_t b = 0; b < 8; ++b)
        if (before.has_edge(a, b)) EXPECT_TRUE(g.has_edge(a, b));
  }
}

TEST(ExampleB, ConnectivityIsAbsorbing) {
  const ExampleBKernel k(6);
  Rng rng(4);
  GraphState g = empty_simple_graph(6);
  while (!is_connected(g)) k(g, rng);
  for (int i = 0; i < 100; ++i) {
    k(g, rng);
    EXPECT_TRUE(is_connected(g));
  }
}

TEST(Experiment, ClocklessOracleForTransitionCounts) {
  // The transition count depends only on the chain stream, whatever the clock.
  const auto cfg = config(Example::TriangleA, 10, SojournLaw::exponential(1.0), 300, 8);
  const auto res = run_experiment(cfg);
  for (std::size_t r = 0; r < cfg.reps; ++r) {
    Rng chain = Rng::derive(cfg.master_seed, r, StreamTag::Chain);
    const ExampleAKernel k(10);
    GraphState g = empty_simple_graph(10);
    std::size_t n = 0;
    while (!contains_triangle(g)) {
      k(g, chain);
      ++n;
    }
    EXPECT_EQ(res.samples[r].transitions, n);
  }
}

TEST(Experiment, RateOneMedianTracksTransitionMedian) {
  auto cfg = config(Example::TriangleA, 10, SojournLaw::exponential(1.0), 4000, 12);
  const auto res = run_experiment(cfg);
  std::vector<double> counts;
  for (const auto& s : res.samples) counts.push_back(static_cast<double>(s.transitions));
  const double count_median = summarize(counts).median;
  // Gamma(n, 1) has median about n - 1/3; allow Monte Carlo noise.
  EXPECT_NEAR(res.stats.median, count_median, 0.1 * count_median);
}

TEST(Experiment, ThreadCountDoesNotChangeSamples) {
  auto cfg = config(Example::InfoSpreadB, 8, SojournLaw::mittag_leffler(0.95), 400, 21);
  cfg.threads = 1;
  const auto a = run_experiment(cfg);
  cfg.threads = 4;
  const auto b = run_experiment(cfg);
  std::ostringstream sa, sb;
  write_samples_csv(sa, a.samples);
  write_samples_csv(sb, b.samples);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Experiment, CensoringIsReported) {
  auto cfg = config(Example::InfoSpreadB, 30, SojournLaw::exponential(1.0), 20, 1);
  cfg.max_transitions = 5;
  const auto res = run_replication(cfg, 0);
  EXPECT_TRUE(res.censored);
  EXPECT_EQ(res.transitions, 5u);
  EXPECT_THROW(run_experiment(cfg), std::invalid_argument);  // nothing left to summarize
}

TEST(Experiment, ConfigValidation) {
  EXPECT_THROW(run_experiment(config(Example::TriangleA, 2, SojournLaw::exponential(1), 10, 1)), std::invalid_argument);
  EXPECT_THROW(run_experiment(config(Example::InfoSpreadB, 1, SojournLaw::exponential(1), 10, 1)), std::invalid_argument);
  EXPECT_THROW(run_experiment(config(Example::TriangleA, 5, SojournLaw::exponential(1), 0, 1)), std::invalid_argument);
  EXPECT_THROW(run_experiment(config(Example::Ergodicity, 5, SojournLaw::exponential(1), 1, 1)), std::invalid_argument);
}

TEST(Experiment, SmallTriangleMedianNeedsThreeSojourns) {
  const auto res = run_experiment(config(Example::TriangleA, 3, SojournLaw::exponential(1.0), 2000, 5));
  for (const auto& s : res.samples) EXPECT_GE(s.transitions, 3u);
  EXPECT_GE(res.stats.median, 2.67);  // median of Gamma(3, 1)
}

TEST(Experiment, HeavyTailSignature) {
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const double heavy = run_experiment(config(Example::TriangleA, 10, SojournLaw::mittag_leffler(0.9), 10000, seed)).stats.max;
    const double light = run_experiment(config(Example::TriangleA, 10, SojournLaw::mittag_leffler(0.99), 10000, seed)).stats.max;
    wins += heavy > light ? 1 : 0;
  }
  EXPECT_GE(wins, 8);
}

TEST(Scans, RowsFollowTheGrid) {
  const auto base = config(Example::TriangleA, 8, SojournLaw::mittag_leffler(0.99), 300, 2);
  const auto rows = scan_beta(base, {0.9, 0.99});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_DOUBLE_EQ(rows[1].parameter, 0.99);
  const auto ms = scan_m(base, {5, 10});
  EXPECT_DOUBLE_EQ(ms[1].parameter, 10);
  std::ostringstream os;
  write_scan_csv(os, "m", ms);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "m,min,q1,median,mean,q3,max,count,censored");
}

TEST(Analysis, LinearFitAndInversions) {
  const auto fit = linear_fit({1, 2, 3, 4}, {3, 5, 7, 9});
  EXPECT_NEAR(fit.slope, 2, 1e-12);
  EXPECT_NEAR(fit.intercept, 1, 1e-12);
  EXPECT_NEAR(fit.r_squared, 1, 1e-12);
  EXPECT_EQ(count_inversions({1, 3, 2, 4, 3}), 2u);
  EXPECT_EQ(count_inversions({1, 1, 2}), 0u);
  EXPECT_THROW(linear_fit({1}, {1}), std::invalid_argument);
}

TEST(Analysis, KsDistance) {
  EXPECT_DOUBLE_EQ(ks_distance({0.5}, [](double t) { return t; }), 0.5);
  std::vector<double> grid;
  for (int i = 0; i < 1000; ++i) grid.push_back((i + 0.5) / 1000.0);
  EXPECT_NEAR(ks_distance(grid, [](double t) { return t; }), 0.0005, 1e-12);
  EXPECT_NEAR(ks_critical_1pct(100000), 0.00515, 1e-5);
}

TEST(Ergodicity, TimeAverageDiffersFromJumpEnsemble) {
  const auto r = ergodicity_experiment(1.0, 2.0, 2000.0, 2000, 4);
  EXPECT_NEAR(r.time_fraction_a, 2.0 / 3.0, 0.03);
  // Y(horizon) of a CTMC with these rates settles at the time-average law.
  EXPECT_NEAR(r.ensemble[0], 2.0 / 3.0, 4 * r.ensemble_stderr[0]);
  // The embedded chain after many jumps follows the invariant measure.
  EXPECT_NEAR(r.jump_ensemble[0], 0.5, 4 * r.jump_ensemble_stderr[0]);
  EXPECT_NEAR(r.invariant[0] + r.invariant[1], 1.0, 1e-12);
}

TEST(Ergodicity, SymmetricRatesAreErgodic) {
  const auto r = ergodicity_experiment(1.0, 1.0, 2000.0, 1000, 4);
  EXPECT_NEAR(r.time_fraction_a, 0.5, 0.03);
  EXPECT_NEAR(r.ensemble[0], 0.5, 4 * r.ensemble_stderr[0]);
}

TEST(Output, SamplesCsv) {
  std::ostringstream os;
  write_samples_csv(os, {{1.5, 4, false}, {0.1, 9, true}});
  EXPECT_EQ(os.str(), "rep,stopping_time,transitions,censored\n0,1.5,4,0\n1,0.10000000000000001,9,1\n");
  std::ostringstream q;
  write_quantile_csv(q, "a,b", {{0.5, 2.0}});
  EXPECT_EQ(q.str(), "config,p,quantile\n\"a,b\",0.5,2\n");
}
