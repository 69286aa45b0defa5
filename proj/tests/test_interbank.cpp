#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "semigraph/interbank.hpp"

using namespace semigraph;
using namespace semigraph::interbank;

namespace {

Money cu(double v) { return Money::from_double(v); }

MarketConfig two_banks(double c_i, double c_j, double d = 20.0) {
  MarketConfig cfg;
  cfg.m = 2;
  cfg.initial = {MarketConfig::uniform_sheets(1, cu(c_i), cu(d))[0], MarketConfig::uniform_sheets(1, cu(c_j), cu(d))[0]};
  return cfg;
}

MarketConfig small_market(std::uint64_t seed, double horizon = 200.0) {
  MarketConfig cfg;
  cfg.m = 8;
  cfg.horizon = horizon;
  cfg.seed = seed;
  cfg.initial = MarketConfig::uniform_sheets(8, cu(120), cu(100));
  return cfg;
}

std::vector<Money> equities(const std::vector<BalanceSheet>& s) {
  std::vector<Money> e;
  for (const auto& b : s) e.push_back(b.e);
  return e;
}

}  // namespace

TEST(Money, HalfEvenRounding) {
  EXPECT_EQ(Money::from_units(5).scaled(0.5).units(), 2);
  EXPECT_EQ(Money::from_units(7).scaled(0.5).units(), 4);
  EXPECT_EQ(Money::from_units(-5).scaled(0.5).units(), -2);
  // Decimal inputs round from their binary value: 2.5e-6 is stored slightly above the tie.
  EXPECT_EQ(cu(0.0000025).units(), 3);
  EXPECT_EQ(cu(0.0000036).units(), 4);
  EXPECT_EQ(cu(-1.2345674).units(), -1234567);
  EXPECT_EQ(cu(100).scaled(0.05), cu(5));
  EXPECT_EQ(cu(60).scaled(0.02), cu(1.2));
  EXPECT_THROW(cu(std::nan("")), std::invalid_argument);
}

TEST(Money, ExactDecimalText) {
  EXPECT_EQ(cu(12.05).to_string(), "12.050000");
  EXPECT_EQ(cu(-0.5).to_string(), "-0.500000");
  EXPECT_EQ(Money().to_string(), "0.000000");
  EXPECT_EQ(Money::from_units(std::numeric_limits<std::int64_t>::min()).to_string(), "-9223372036854.775808");
}

TEST(Weights, SumToOne) {
  Rng rng(1);
  EXPECT_EQ(draw_weights(1, rng), std::vector<double>{1.0});
  for (int k = 0; k < 100; ++k) {
    const auto w = draw_weights(7, rng);
    EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
    for (double x : w) EXPECT_GE(x, 0.0);
  }
  EXPECT_THROW(draw_weights(0, rng), std::invalid_argument);
}

TEST(Weights, FlatDirichletMean) {
  Rng rng(2);
  const int n = 10000;
  std::vector<double> sum(10, 0.0);
  for (int k = 0; k < n; ++k) {
    const auto w = draw_weights(10, rng);
    for (int b = 0; b < 10; ++b) sum[b] += w[b];
  }
  // Var of a Dirichlet(1,...,1) component with 10 parts: 0.1 * 0.9 / 11.
  const double sigma = std::sqrt(0.09 / 11.0 / n);
  for (double s : sum) EXPECT_NEAR(s / n, 0.1, 3 * sigma);
}

TEST(Weights, AllocationIsExact) {
  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    const Money total = Money::from_units(100'000'000 + k * 7919);
    const auto parts = allocate(total, draw_weights(13, rng));
    Money sum;
    for (auto p : parts) {
      sum += p;
      EXPECT_GE(p, Money());
    }
    EXPECT_EQ(sum, total);
  }
  const auto thirds = allocate(Money::from_units(10), {1 / 3.0, 1 / 3.0, 1 / 3.0});
  EXPECT_EQ(thirds[0].units() + thirds[1].units() + thirds[2].units(), 10);
}

TEST(Cascade, GreedyResidual) {
  std::vector<BalanceSheet> s(3);
  s[1].c = cu(30);
  s[2].c = cu(50);
  const auto r = cascade_in_order(s, cu(60), {1, 2});
  ASSERT_FALSE(r.exhausted);
  EXPECT_EQ(r.legs, (std::vector<Posting>{{1, cu(30)}, {2, cu(30)}}));
  const auto single = cascade_in_order(s, cu(20), {2, 1});
  EXPECT_EQ(single.legs, (std::vector<Posting>{{2, cu(20)}}));
  EXPECT_TRUE(cascade_in_order(std::vector<BalanceSheet>(3), cu(1), {1, 2}).exhausted);
  EXPECT_TRUE(cascade_in_order(s, cu(81), {1, 2}).exhausted);
  EXPECT_THROW(cascade_in_order(s, Money(), {1}), std::invalid_argument);
}

TEST(Cascade, RandomOrderExcludesTheBorrower) {
  std::vector<BalanceSheet> s(5);
  for (auto& b : s) b.c = cu(10);
  Rng rng(4);
  std::vector<int> first(5, 0);
  for (int k = 0; k < 4000; ++k) {
    const auto r = interbank_cascade(s, cu(25), {2}, rng);
    ASSERT_EQ(r.legs.size(), 3u);
    for (const auto& leg : r.legs) EXPECT_NE(leg.bank, 2u);
    EXPECT_NE(r.legs[0].bank, r.legs[1].bank);
    ++first[r.legs[0].bank];
  }
  EXPECT_EQ(first[2], 0);
  for (int b : {0, 1, 3, 4}) EXPECT_NEAR(first[b], 1000, 3 * std::sqrt(4000 * 0.25 * 0.75));
}

TEST(Grant, WorkedExampleWithOneLender) {
  Market market(two_banks(40, 80));
  Rng chooser(1), weights(2);
  market.grant_corporate_loan(0, 1.0, chooser, weights);
  const auto& i = market.sheets()[0];
  const auto& j = market.sheets()[1];
  const Money omega_i = i.d - cu(20), omega_j = j.d - cu(20);
  EXPECT_EQ(omega_i + omega_j, cu(100));
  EXPECT_EQ(i.c, omega_i);
  EXPECT_EQ(i.l, cu(100));
  EXPECT_EQ(i.b, cu(60));
  EXPECT_EQ(j.c, cu(80) - cu(60) + omega_j);
  EXPECT_EQ(j.ll, cu(60));
  EXPECT_EQ(i.e, cu(20));
  EXPECT_EQ(j.e, cu(60));
  EXPECT_EQ(market.graph().outstanding(1, 0), cu(60));
  const auto metrics = loan_graph_metrics(market.graph());
  EXPECT_EQ(metrics.edge_count, 1u);
  EXPECT_EQ(metrics.out_degree, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(metrics.in_degree, (std::vector<std::size_t>{1, 0}));
}

TEST(Repayment, WorkedExampleEquityGains) {
  Market market(two_banks(40, 80));
  Rng chooser(1), weights(2);
  market.grant_corporate_loan(0, 1.0, chooser, weights);
  const auto before = equities(market.sheets());
  market.repay_loans(30.0, weights);  // not yet due
  EXPECT_EQ(equities(market.sheets()), before);
  market.repay_loans(31.0, weights);
  const auto after = equities(market.sheets());
  const double r_c = 0.05, r_b = 0.02;
  EXPECT_EQ(after[0] - before[0], cu((r_c - r_b) * 100 + r_b * 40));
  EXPECT_EQ(after[1] - before[1], cu(r_b * 60));
  for (const auto& s : market.sheets()) {
    EXPECT_TRUE(s.identity_holds());
    EXPECT_EQ(s.l, Money());
    EXPECT_EQ(s.b, Money());
    EXPECT_EQ(s.ll, Money());
  }
  EXPECT_EQ(market.graph().total(), Money());
  EXPECT_EQ(loan_graph_metrics(market.graph()).edge_count, 0u);
  EXPECT_TRUE(market.pending().empty());
}

TEST(Grant, DirectLoanLeavesTheGraphAlone) {
  Market market(two_banks(150, 80));
  Rng chooser(1), weights(2);
  market.grant_corporate_loan(0, 1.0, chooser, weights);
  EXPECT_EQ(market.graph().total(), Money());
  EXPECT_EQ(market.sheets()[0].b, Money());
  EXPECT_EQ(market.sheets()[0].l, cu(100));
  EXPECT_EQ(market.events().back().type, EventType::Grant);
  EXPECT_TRUE(market.events().back().legs.empty());
}

TEST(Grant, IlliquidSystemRejectsTheLoan) {
  Market market(two_banks(40, 30));
  Rng chooser(1), weights(2);
  const auto before = market.sheets();
  market.grant_corporate_loan(0, 1.0, chooser, weights);
  EXPECT_EQ(market.sheets(), before);
  EXPECT_EQ(market.events().back().type, EventType::SystemIlliquid);
  EXPECT_TRUE(market.pending().empty());
  EXPECT_EQ(market.snapshots().size(), 2u);
}

TEST(Repayment, UnderflowIsLoggedAsNegativeBalance) {
  MarketConfig cfg;
  cfg.m = 3;
  cfg.ell = cu(100);
  cfg.initial = MarketConfig::uniform_sheets(3, cu(500), cu(0));
  Market market(cfg);
  Rng chooser(1), weights(2);
  // Deposits total 100 after the grant but the repayment drains 105.
  market.grant_corporate_loan(0, 0.1, chooser, weights);
  market.repay_loans(100.0, weights);
  bool logged = false;
  for (const auto& ev : market.events()) logged |= ev.type == EventType::NegativeBalance;
  Money d;
  for (const auto& s : market.sheets()) {
    EXPECT_GE(s.d, Money());
    d += s.d;
  }
  EXPECT_TRUE(logged);
  EXPECT_EQ(d, Money());
}

TEST(Config, JsonValidation) {
  nlohmann::json j{{"m", 4},        {"lambda", 1.0},     {"ell", 100},  {"r_c", 0.05}, {"r_b", 0.02},
                   {"t_loan", 30},  {"horizon", 100},    {"seed", 3},   {"initial", {{"c", 150}, {"d", 120}}}};
  const auto cfg = MarketConfig::from_json(j);
  EXPECT_EQ(cfg.m, 4u);
  EXPECT_EQ(cfg.initial[3].e, cu(30));
  auto expect_field = [](nlohmann::json bad, const std::string& field) {
    try {
      MarketConfig::from_json(bad);
      ADD_FAILURE() << "accepted a bad config";
    } catch (const ConfigError& e) {
      EXPECT_EQ(e.field(), field);
    }
  };
  auto bad = j;
  bad["r_c"] = 0.02;
  expect_field(bad, "r_c");
  bad = j;
  bad.erase("t_loan");
  expect_field(bad, "t_loan");
  bad = j;
  bad["initial"] = nlohmann::json::array({{{"c", 1}, {"d", 0}}});
  expect_field(bad, "initial");
  bad = j;
  bad["initial"] = {{"c", -10}, {"d", 20}};
  expect_field(bad, "initial[0]");
  bad = j;
  bad["m"] = 1;
  expect_field(bad, "m");
  bad = j;
  bad["ell"] = -5;
  expect_field(bad, "ell");
  bad = j;
  bad["clock"] = {{"law", "mittag-leffler"}, {"beta", 2.0}};
  expect_field(bad, "clock");
  bad = j;
  bad["initial"] = nlohmann::json::array({{{"c", 10}, {"d", 5}}, {{"c", 10}, {"d", 5}}, {{"c", 10}, {"d", 5}}, {{"c", 10}, {"d", 5}}});
  EXPECT_EQ(MarketConfig::from_json(bad).initial[2].e, cu(5));
}

TEST(RunMarket, TinyHorizonHasNoEvents) {
  auto cfg = small_market(1, 1e-9);
  const auto run = run_market(cfg);
  EXPECT_TRUE(run.events.empty());
  ASSERT_EQ(run.snapshots.size(), 1u);
  EXPECT_EQ(run.snapshots[0].sheets, cfg.initial);
}

TEST(RunMarket, RequestCountIsPoisson) {
  const int runs = 1000;
  const double horizon = 20.0;
  double sum = 0;
  for (int r = 0; r < runs; ++r) sum += static_cast<double>(run_market(small_market(r, horizon)).requests);
  EXPECT_NEAR(sum / runs, horizon, 3 * std::sqrt(horizon / runs));
}

TEST(RunMarket, AuditIsCleanAcrossSeeds) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto cfg = small_market(seed);
    const auto run = run_market(cfg);
    EXPECT_EQ(run.snapshots.size(), run.events.size() + 1);
    const auto issues = audit_market_run(cfg, run);
    EXPECT_TRUE(issues.empty()) << issues.front();
  }
}

TEST(RunMarket, RepaymentsPrecedeRequestsOnTies) {
  // With integer request times the tie case is forced.
  auto cfg = small_market(5);
  cfg.t_loan = 1.0;
  cfg.clock = SojournLaw::mittag_leffler(1.0, 1.0);
  const auto run = run_market(cfg);
  for (std::size_t k = 1; k < run.events.size(); ++k) EXPECT_LE(run.events[k - 1].time, run.events[k].time);
  EXPECT_TRUE(audit_market_run(cfg, run).empty());
}

TEST(RunMarket, AuditCatchesTampering) {
  const auto cfg = small_market(2);
  auto run = run_market(cfg);
  ASSERT_GT(run.snapshots.size(), 3u);
  run.snapshots[2].sheets[0].e += Money::from_units(1);
  EXPECT_FALSE(audit_market_run(cfg, run).empty());
  auto run2 = run_market(cfg);
  for (auto& snap : run2.snapshots)
    if (snap.graph.total() > Money()) {
      for (std::size_t j = 0; j < cfg.m; ++j)
        for (std::size_t i = 0; i < cfg.m; ++i)
          if (snap.graph.outstanding(j, i) > Money()) {
            snap.graph.repay(j, i, snap.graph.outstanding(j, i));
            snap.graph.lend(i, j, Money::from_units(1));
            goto tampered;
          }
    }
tampered:
  EXPECT_FALSE(audit_market_run(cfg, run2).empty());
}

TEST(RunMarket, DeterministicOutputs) {
  const auto cfg = small_market(9);
  std::ostringstream a, b;
  const auto r1 = run_market(cfg), r2 = run_market(cfg);
  write_events_csv(a, r1);
  write_sheets_csv(a, r1);
  write_graph_csv(a, r1);
  write_events_csv(b, r2);
  write_sheets_csv(b, r2);
  write_graph_csv(b, r2);
  EXPECT_EQ(a.str(), b.str());
}

TEST(LoanGraph, MutualLoansKeepBothEdges) {
  LoanGraph lg(3);
  lg.lend(0, 1, cu(10));
  lg.lend(1, 0, cu(5));
  const auto metrics = loan_graph_metrics(lg);
  EXPECT_EQ(metrics.edge_count, 2u);
  EXPECT_EQ(metrics.strong_components.size(), 2u);  // {0, 1} and {2}
  lg.repay(0, 1, cu(10));
  EXPECT_EQ(loan_graph_metrics(lg).edge_count, 1u);
  EXPECT_THROW(lg.repay(1, 0, cu(6)), std::logic_error);
  EXPECT_EQ(loan_graph_metrics(LoanGraph(4)).edge_count, 0u);
}

TEST(Output, CsvLayout) {
  Market market(two_banks(40, 80));
  Rng chooser(1), weights(2);
  market.grant_corporate_loan(0, 1.0, chooser, weights);
  MarketRun run{market.events(), market.snapshots(), 1};
  std::ostringstream ev, sh, gr;
  write_events_csv(ev, run);
  write_sheets_csv(sh, run);
  write_graph_csv(gr, run);
  EXPECT_EQ(ev.str(), "time,type,package,banks,amounts\n1,grant,0,1;2,100.000000;60.000000\n");
  EXPECT_EQ(sh.str().substr(0, sh.str().find('\n')), "time,bank,C,L,LL,D,B,E");
  EXPECT_NE(sh.str().find("0,1,40.000000,0.000000,0.000000,20.000000,0.000000,20.000000"), std::string::npos);
  EXPECT_EQ(gr.str(), "time,lender,borrower,outstanding\n1,2,1,60.000000\n");
}
