#pragma once

// Interbank market driven by corporate loan requests. Loans are granted
// directly or through an interbank lending cascade, create deposits across
// all banks, and are repaid with interest after a fixed term. Currency uses
// fixed-point arithmetic so the balance-sheet identities hold exactly.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "semigraph/format.hpp"
#include "semigraph/graph_core.hpp"
#include "semigraph/random.hpp"
#include "semigraph/renewal.hpp"

namespace semigraph::interbank {

/// Currency amount in integer micro-units (6 decimal places).
class Money {
 public:
  static constexpr std::int64_t kUnitsPerWhole = 1'000'000;

  constexpr Money() = default;
  static constexpr Money from_units(std::int64_t units) { return Money(units); }

  /// Rounds half-even to the nearest micro-unit.
  static Money from_double(double value) {
    if (!std::isfinite(value)) throw std::invalid_argument("currency amount must be finite");
    return Money(round_half_even(static_cast<long double>(value) * kUnitsPerWhole));
  }

  constexpr std::int64_t units() const { return units_; }
  double to_double() const { return static_cast<double>(units_) / kUnitsPerWhole; }

  /// amount * factor, rounded half-even into micro-units.
  Money scaled(double factor) const {
    return Money(round_half_even(static_cast<long double>(units_) * factor));
  }

  /// Exact decimal, e.g. "-12.050000".
  std::string to_string() const {
    const bool negative = units_ < 0;
    const auto magnitude = static_cast<std::uint64_t>(negative ? -(units_ + 1) : units_) + (negative ? 1 : 0);
    std::string frac = std::to_string(magnitude % kUnitsPerWhole);
    frac.insert(0, 6 - frac.size(), '0');
    return (negative ? "-" : "") + std::to_string(magnitude / kUnitsPerWhole) + "." + frac;
  }

  constexpr Money operator-() const { return Money(-units_); }
  constexpr Money& operator+=(Money o) {
    units_ += o.units_;
    return *this;
  }
  constexpr Money& operator-=(Money o) {
    units_ -= o.units_;
    return *this;
  }
  friend constexpr Money operator+(Money a, Money b) { return a += b; }
  friend constexpr Money operator-(Money a, Money b) { return a -= b; }
  friend constexpr auto operator<=>(Money, Money) = default;

 private:
  constexpr explicit Money(std::int64_t units) : units_(units) {}

  static std::int64_t round_half_even(long double x) {
    const long double lo = std::floor(x);
    const long double diff = x - lo;
    long double r = lo;
    if (diff > 0.5L || (diff == 0.5L && std::fmod(lo, 2.0L) != 0.0L)) r = lo + 1.0L;
    if (std::fabs(r) > 9.0e18L) throw std::overflow_error("currency amount out of range");
    return static_cast<std::int64_t>(r);
  }

  std::int64_t units_ = 0;
};

inline Money min(Money a, Money b) { return a < b ? a : b; }

/// Assets C (liquidity), L (corporate loans), LL (interbank loans extended);
/// liabilities D (deposits), B (interbank debt) and equity E.
struct BalanceSheet {
  Money c, l, ll, d, b, e;

  Money residual_equity() const { return c + l + ll - d - b; }
  bool identity_holds() const { return e == residual_equity(); }
  friend bool operator==(const BalanceSheet&, const BalanceSheet&) = default;
};

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct MarketConfig {
  std::size_t m = 20;
  double lambda = 1.0;      // loan requests per unit time
  Money ell = Money::from_double(100.0);
  double r_c = 0.05;
  double r_b = 0.02;
  double t_loan = 30.0;
  double horizon = 600.0;
  std::uint64_t seed = 1;
  std::vector<BalanceSheet> initial;  // one per bank; equity is the residual
  std::optional<SojournLaw> clock;    // request inter-arrival law; Exponential(lambda) when absent

  static std::vector<BalanceSheet> uniform_sheets(std::size_t m, Money c, Money d) {
    BalanceSheet s;
    s.c = c;
    s.d = d;
    s.e = c - d;
    return std::vector<BalanceSheet>(m, s);
  }

  SojournLaw request_law() const { return clock ? *clock : SojournLaw::exponential(lambda); }

  void validate() const {
    if (m < 2) throw ConfigError("m", "need at least 2 banks");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda", "must be positive");
    if (ell <= Money()) throw ConfigError("ell", "loan size must be positive");
    if (!(r_b > 0.0)) throw ConfigError("r_b", "must be positive");
    if (!(r_c > r_b)) throw ConfigError("r_c", "must exceed r_b (r_c > r_b > 0)");
    if (!(t_loan > 0.0)) throw ConfigError("t_loan", "must be positive");
    if (!(horizon > 0.0)) throw ConfigError("horizon", "must be positive");
    if (initial.size() != m) throw ConfigError("initial", "need one balance sheet per bank");
    for (std::size_t b = 0; b < m; ++b) {
      const auto& s = initial[b];
      const std::string path = "initial[" + std::to_string(b) + "]";
      if (s.c < Money() || s.l < Money() || s.ll < Money() || s.d < Money() || s.b < Money())
        throw ConfigError(path, "balance-sheet entries must be nonnegative");
      if (!s.identity_holds()) throw ConfigError(path + ".e", "equity must equal C + L + LL - D - B");
      if (s.l != Money() || s.ll != Money() || s.b != Money())
        throw ConfigError(path, "markets start without outstanding loans");
    }
  }

  /// {m, lambda, ell, r_c, r_b, t_loan, horizon, seed,
  ///  initial: {c, d} | [{c, d}, ...], clock?: sojourn law}
  static MarketConfig from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("/", "config must be a JSON object");
    auto require = [&](const char* key) -> const nlohmann::json& {
      if (!j.contains(key)) throw ConfigError(key, "missing");
      return j.at(key);
    };
    auto number = [&](const char* key) {
      const auto& v = require(key);
      if (!v.is_number()) throw ConfigError(key, "must be a number");
      return v.get<double>();
    };
    MarketConfig cfg;
    const auto& m = require("m");
    if (!m.is_number_integer() || m.get<long long>() < 2) throw ConfigError("m", "must be an integer >= 2");
    cfg.m = m.get<std::size_t>();
    cfg.lambda = number("lambda");
    cfg.ell = Money::from_double(number("ell"));
    cfg.r_c = number("r_c");
    cfg.r_b = number("r_b");
    cfg.t_loan = number("t_loan");
    cfg.horizon = number("horizon");
    const auto& seed = require("seed");
    if (!seed.is_number_integer() || seed.get<long long>() < 0) throw ConfigError("seed", "must be a nonnegative integer");
    cfg.seed = seed.get<std::uint64_t>();
    const auto& init = require("initial");
    auto sheet = [](const nlohmann::json& s, const std::string& path) {
      if (!s.is_object() || !s.contains("c") || !s.contains("d") || !s.at("c").is_number() ||
          !s.at("d").is_number())
        throw ConfigError(path, "needs numeric c and d");
      BalanceSheet out;
      out.c = Money::from_double(s.at("c").get<double>());
      out.d = Money::from_double(s.at("d").get<double>());
      out.e = out.c - out.d;
      return out;
    };
    if (init.is_array()) {
      if (init.size() != cfg.m) throw ConfigError("initial", "need one entry per bank");
      for (std::size_t b = 0; b < init.size(); ++b)
        cfg.initial.push_back(sheet(init[b], "initial[" + std::to_string(b) + "]"));
    } else {
      cfg.initial.assign(cfg.m, sheet(init, "initial"));
    }
    if (j.contains("clock")) {
      try {
        cfg.clock = SojournLaw::from_json(j.at("clock"));
      } catch (const std::exception& e) {
        throw ConfigError("clock", e.what());
      }
    }
    cfg.validate();
    return cfg;
  }
};

/// One interbank leg of a loan package.
struct Posting {
  std::size_t bank = 0;
  Money amount;
  friend bool operator==(const Posting&, const Posting&) = default;
};

enum class LoanKind { Corporate, Interbank };

inline constexpr std::size_t kCorporateSector = std::numeric_limits<std::size_t>::max();

struct LoanRecord {
  LoanKind kind = LoanKind::Corporate;
  std::size_t lender = 0;
  std::size_t borrower = kCorporateSector;
  Money principal;
  double granted_at = 0.0;
  double due_at = 0.0;
};

/// A corporate loan together with the interbank loans that funded it; all of
/// them fall due together.
struct LoanPackage {
  std::size_t id = 0;
  std::size_t bank = 0;         // lender to the corporate sector
  Money amount;                 // corporate principal
  Money liquidity_before;       // C of `bank` just before the grant
  std::vector<Posting> legs;    // interbank principal per lender
  double granted_at = 0.0;
  double due_at = 0.0;

  std::vector<LoanRecord> records() const {
    std::vector<LoanRecord> out{{LoanKind::Corporate, bank, kCorporateSector, amount, granted_at, due_at}};
    for (const auto& leg : legs)
      out.push_back({LoanKind::Interbank, leg.bank, bank, leg.amount, granted_at, due_at});
    return out;
  }
};

/// Outstanding interbank principal: entry (j, i) is what bank j has lent to i.
class LoanGraph {
 public:
  explicit LoanGraph(std::size_t m) : m_(m), entries_(m * m) {}

  std::size_t size() const { return m_; }
  Money outstanding(std::size_t lender, std::size_t borrower) const { return entries_.at(lender * m_ + borrower); }

  void lend(std::size_t lender, std::size_t borrower, Money amount) { entries_.at(lender * m_ + borrower) += amount; }
  void repay(std::size_t lender, std::size_t borrower, Money amount) {
    auto& e = entries_.at(lender * m_ + borrower);
    if (amount > e) throw std::logic_error("repayment exceeds outstanding interbank principal");
    e -= amount;
  }

  Money total() const {
    Money t;
    for (auto e : entries_) t += e;
    return t;
  }

  /// Weighted directed view (entries in currency units).
  GraphState graph() const {
    GraphState g(GraphMode::WeightedDirected, m_);
    for (std::size_t j = 0; j < m_; ++j)
      for (std::size_t i = 0; i < m_; ++i) g.set_weight(j, i, entries_[j * m_ + i].to_double());
    return g;
  }

  friend bool operator==(const LoanGraph&, const LoanGraph&) = default;

 private:
  std::size_t m_;
  std::vector<Money> entries_;
};

struct LoanGraphMetrics {
  std::size_t edge_count = 0;
  std::vector<std::size_t> out_degree;  // number of banks each bank lends to
  std::vector<std::size_t> in_degree;   // number of banks each bank borrows from
  std::vector<std::vector<std::size_t>> strong_components;
};

inline LoanGraphMetrics loan_graph_metrics(const LoanGraph& lg) {
  const GraphState g = lg.graph().support();
  LoanGraphMetrics out;
  out.edge_count = edge_count(g);
  out.out_degree = degree_sequence(g);
  out.in_degree.assign(g.size(), 0);
  for (std::size_t j = 0; j < g.size(); ++j)
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g.has_edge(j, i)) ++out.in_degree[i];
  out.strong_components = connected_components(g);
  return out;
}

/// Flat Dirichlet weights (normalised i.i.d. exponentials) summing to 1.
inline std::vector<double> draw_weights(std::size_t m, Rng& rng) {
  if (m == 0) throw std::invalid_argument("need at least one bank");
  std::vector<double> w(m);
  double sum = 0.0;
  for (auto& x : w) {
    x = -std::log(rng.uniform());
    sum += x;
  }
  for (auto& x : w) x /= sum;
  return w;
}

/// Splits `total` into micro-unit amounts proportional to `weights`; the
/// parts add up to `total` exactly (largest remainder, ties to lower index).
inline std::vector<Money> allocate(Money total, const std::vector<double>& weights) {
  const std::size_t m = weights.size();
  std::vector<Money> parts(m);
  std::vector<std::pair<long double, std::size_t>> remainders(m);
  std::int64_t assigned = 0;
  for (std::size_t b = 0; b < m; ++b) {
    const long double exact = static_cast<long double>(total.units()) * weights[b];
    const auto whole = static_cast<std::int64_t>(std::floor(exact));
    parts[b] = Money::from_units(whole);
    assigned += whole;
    remainders[b] = {exact - static_cast<long double>(whole), b};
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::int64_t left = total.units() - assigned;
  for (std::size_t k = 0; left > 0; k = (k + 1) % m, --left) parts[remainders[k].second] += Money::from_units(1);
  return parts;
}

struct CascadeResult {
  std::vector<Posting> legs;
  bool exhausted = false;  // every candidate was asked and the shortfall remains
};

/// Asks lenders in the given order; each lends min(its liquidity, residual).
inline CascadeResult cascade_in_order(const std::vector<BalanceSheet>& sheets, Money shortfall,
                                      const std::vector<std::size_t>& order) {
  if (shortfall <= Money()) throw std::invalid_argument("cascade needs a positive shortfall");
  CascadeResult out;
  Money residual = shortfall;
  for (std::size_t k : order) {
    const Money take = min(sheets.at(k).c, residual);
    if (take > Money()) {
      out.legs.push_back({k, take});
      residual -= take;
    }
    if (residual == Money()) return out;
  }
  out.exhausted = true;
  out.legs.clear();
  return out;
}

/// Lenders are drawn uniformly without replacement among banks not in `exclude`.
inline CascadeResult interbank_cascade(const std::vector<BalanceSheet>& sheets, Money shortfall,
                                       const std::vector<std::size_t>& exclude, Rng& rng) {
  std::vector<std::size_t> candidates;
  for (std::size_t b = 0; b < sheets.size(); ++b)
    if (std::find(exclude.begin(), exclude.end(), b) == exclude.end()) candidates.push_back(b);
  // Partial Fisher-Yates: the order in which banks are approached.
  for (std::size_t k = 0; k + 1 < candidates.size(); ++k) {
    const std::size_t pick = k + static_cast<std::size_t>(rng.below(candidates.size() - k));
    std::swap(candidates[k], candidates[pick]);
  }
  return cascade_in_order(sheets, shortfall, candidates);
}

enum class EventType { Grant, Repayment, SystemIlliquid, NegativeBalance };

inline std::string_view to_string(EventType t) {
  switch (t) {
    case EventType::Grant: return "grant";
    case EventType::Repayment: return "repayment";
    case EventType::SystemIlliquid: return "system-illiquid";
    case EventType::NegativeBalance: return "negative-balance";
  }
  return "unknown";
}

struct MarketEvent {
  double time = 0.0;
  EventType type = EventType::Grant;
  std::size_t package = 0;
  std::size_t bank = 0;              // corporate lender (borrower in the interbank market)
  Money amount;                      // corporate principal
  std::vector<Posting> legs;         // interbank principal per lender
  Money corporate_interest;          // repayments: r_C * ell as posted
  std::vector<Posting> leg_interest; // repayments: r_B * principal per lender as posted
  Money liquidity_before;            // C of `bank` just before the grant
  std::string note;
};

struct Snapshot {
  double time = 0.0;
  std::vector<BalanceSheet> sheets;
  LoanGraph graph{0};
};

/// Market state and the two event handlers. Every handler appends events and
/// one snapshot per event.
class Market {
 public:
  static constexpr int kMaxWeightRedraws = 100;

  explicit Market(MarketConfig cfg) : cfg_(std::move(cfg)), graph_(cfg_.m) {
    cfg_.validate();
    sheets_ = cfg_.initial;
    snapshots_.push_back({0.0, sheets_, graph_});
  }

  const MarketConfig& config() const { return cfg_; }
  const std::vector<BalanceSheet>& sheets() const { return sheets_; }
  const LoanGraph& graph() const { return graph_; }
  const std::vector<MarketEvent>& events() const { return events_; }
  const std::vector<Snapshot>& snapshots() const { return snapshots_; }
  const std::map<std::size_t, LoanPackage>& pending() const { return pending_; }

  std::optional<double> next_due() const {
    if (due_.empty()) return std::nullopt;
    return due_.begin()->first;
  }

  /// Corporate request of size ell to bank i at time t. Draws lenders from
  /// `chooser` and deposit weights from `weights`.
  void grant_corporate_loan(std::size_t i, double t, Rng& chooser, Rng& weights) {
    if (i >= cfg_.m) throw std::out_of_range("bank index out of range");
    const Money ell = cfg_.ell;
    BalanceSheet& bi = sheets_[i];
    LoanPackage pkg;
    pkg.id = next_package_++;
    pkg.bank = i;
    pkg.amount = ell;
    pkg.liquidity_before = bi.c;
    pkg.granted_at = t;
    pkg.due_at = t + cfg_.t_loan;

    if (bi.c < ell) {
      const auto cascade = interbank_cascade(sheets_, ell - bi.c, {i}, chooser);
      if (cascade.exhausted) {
        MarketEvent ev;
        ev.time = t;
        ev.type = EventType::SystemIlliquid;
        ev.package = pkg.id;
        ev.bank = i;
        ev.amount = ell;
        ev.liquidity_before = pkg.liquidity_before;
        ev.note = "interbank market cannot cover the shortfall; request rejected";
        record(std::move(ev), t);
        return;
      }
      for (const auto& leg : cascade.legs) {
        BalanceSheet& lender = sheets_[leg.bank];
        lender.c -= leg.amount;
        lender.ll += leg.amount;
        bi.b += leg.amount;
        bi.c += leg.amount;
        graph_.lend(leg.bank, i, leg.amount);
      }
      pkg.legs = cascade.legs;
    }
    bi.c -= ell;
    bi.l += ell;

    const auto parts = allocate(ell, draw_weights(cfg_.m, weights));
    for (std::size_t b = 0; b < cfg_.m; ++b) {
      sheets_[b].c += parts[b];
      sheets_[b].d += parts[b];
    }

    MarketEvent ev;
    ev.time = t;
    ev.type = EventType::Grant;
    ev.package = pkg.id;
    ev.bank = i;
    ev.amount = ell;
    ev.legs = pkg.legs;
    ev.liquidity_before = pkg.liquidity_before;
    due_.emplace(pkg.due_at, pkg.id);
    pending_.emplace(pkg.id, std::move(pkg));
    record(std::move(ev), t);
  }

  /// Repays every package due at or before t_m, earliest first.
  void repay_loans(double t_m, Rng& weights) {
    while (!due_.empty() && due_.begin()->first <= t_m) {
      const auto [due, id] = *due_.begin();
      due_.erase(due_.begin());
      repay_package(id, due, weights);
    }
  }

 private:
  void record(MarketEvent ev, double t) {
    events_.push_back(std::move(ev));
    snapshots_.push_back({t, sheets_, graph_});
  }

  void repay_package(std::size_t id, double t, Rng& weights) {
    const LoanPackage pkg = pending_.at(id);
    pending_.erase(id);
    const std::size_t i = pkg.bank;
    BalanceSheet& bi = sheets_[i];

    // Corporate sector pays back (1 + r_C) ell to bank i.
    const Money interest = pkg.amount.scaled(cfg_.r_c);
    const Money inflow = pkg.amount + interest;
    bi.c += inflow;
    bi.l -= pkg.amount;
    bi.e += interest;

    // Bank i repays each lender principal plus r_B interest.
    std::vector<Posting> leg_interest;
    for (const auto& leg : pkg.legs) {
      const Money ib = leg.amount.scaled(cfg_.r_b);
      BalanceSheet& lender = sheets_[leg.bank];
      bi.c -= leg.amount + ib;
      bi.b -= leg.amount;
      bi.e -= ib;
      lender.c += leg.amount + ib;
      lender.ll -= leg.amount;
      lender.e += ib;
      graph_.repay(leg.bank, i, leg.amount);
      leg_interest.push_back({leg.bank, ib});
    }

    // The repayment drains (1 + r_C) ell of deposits and liquidity system-wide.
    std::string warning;
    const auto parts = deposit_reduction(inflow, weights, warning);
    for (std::size_t b = 0; b < cfg_.m; ++b) {
      sheets_[b].c -= parts[b];
      sheets_[b].d -= parts[b];
    }

    MarketEvent ev;
    ev.time = t;
    ev.type = EventType::Repayment;
    ev.package = pkg.id;
    ev.bank = i;
    ev.amount = pkg.amount;
    ev.legs = pkg.legs;
    ev.corporate_interest = interest;
    ev.leg_interest = std::move(leg_interest);
    ev.liquidity_before = pkg.liquidity_before;
    record(std::move(ev), t);

    if (!warning.empty()) {
      MarketEvent w;
      w.time = t;
      w.type = EventType::NegativeBalance;
      w.package = pkg.id;
      w.bank = i;
      w.amount = inflow;
      w.note = std::move(warning);
      record(std::move(w), t);
    }
  }

  /// Weighted split of `total` that keeps every C and D nonnegative: up to
  /// 100 redraws, then clipping with the excess moved to banks with room.
  std::vector<Money> deposit_reduction(Money total, Rng& weights, std::string& warning) const {
    auto capacity = [&](std::size_t b) { return min(sheets_[b].c, sheets_[b].d); };
    std::vector<Money> parts;
    for (int attempt = 0; attempt <= kMaxWeightRedraws; ++attempt) {
      parts = allocate(total, draw_weights(cfg_.m, weights));
      bool fits = true;
      for (std::size_t b = 0; b < cfg_.m && fits; ++b) fits = parts[b] <= capacity(b);
      if (fits) return parts;
    }
    Money excess;
    for (std::size_t b = 0; b < cfg_.m; ++b) {
      const Money cap = std::max(capacity(b), Money());
      if (parts[b] > cap) {
        excess += parts[b] - cap;
        parts[b] = cap;
      }
    }
    for (std::size_t b = 0; b < cfg_.m && excess > Money(); ++b) {
      const Money room = std::max(capacity(b), Money()) - parts[b];
      const Money take = min(room, excess);
      parts[b] += take;
      excess -= take;
    }
    warning = "deposit reduction clipped after " + std::to_string(kMaxWeightRedraws) + " redraws";
    if (excess > Money()) warning += "; unfunded " + excess.to_string();
    return parts;
  }

  MarketConfig cfg_;
  std::vector<BalanceSheet> sheets_;
  LoanGraph graph_;
  std::multimap<double, std::size_t> due_;
  std::map<std::size_t, LoanPackage> pending_;
  std::vector<MarketEvent> events_;
  std::vector<Snapshot> snapshots_;
  std::size_t next_package_ = 0;
};

struct MarketRun {
  std::vector<MarketEvent> events;
  std::vector<Snapshot> snapshots;  // snapshots[0] is the initial state; snapshots[k + 1] follows events[k]
  std::size_t requests = 0;
};

/// Merged timeline of request epochs and repayment dates up to the horizon;
/// repayments go first on ties.
inline MarketRun run_market(const MarketConfig& cfg) {
  Market market(cfg);
  Rng clock = Rng::derive(cfg.seed, 0, StreamTag::Clock);
  Rng chooser = Rng::derive(cfg.seed, 0, StreamTag::Market);
  Rng weights = Rng::derive(cfg.seed, 0, StreamTag::Weights);
  const SojournLaw law = cfg.request_law();
  std::size_t requests = 0;
  double next_request = law.sample(clock);
  for (;;) {
    const auto due = market.next_due();
    if (due && *due <= next_request && *due <= cfg.horizon) {
      market.repay_loans(*due, weights);
      continue;
    }
    if (next_request > cfg.horizon) break;
    const auto bank = static_cast<std::size_t>(chooser.below(cfg.m));
    market.grant_corporate_loan(bank, next_request, chooser, weights);
    ++requests;
    next_request += law.sample(clock);
  }
  return {market.events(), market.snapshots(), requests};
}

/// Replays a run and lists every violated invariant (empty when clean):
/// the accounting identity, nonnegative entries, interbank double entry,
/// equity invariance at grants, repayment equity gains, the edge lifecycle
/// and the system-wide equity change.
inline std::vector<std::string> audit_market_run(const MarketConfig& cfg, const MarketRun& run) {
  std::vector<std::string> issues;
  auto fail = [&](std::size_t k, const std::string& what) {
    issues.push_back("snapshot " + std::to_string(k) + ": " + what);
  };
  if (run.snapshots.size() != run.events.size() + 1) {
    issues.push_back("snapshot count does not match event count");
    return issues;
  }
  std::map<std::size_t, std::vector<Posting>> active;
  for (std::size_t k = 0; k < run.snapshots.size(); ++k) {
    const auto& snap = run.snapshots[k];
    Money total_ll, total_b;
    for (std::size_t b = 0; b < snap.sheets.size(); ++b) {
      const auto& s = snap.sheets[b];
      if (!s.identity_holds()) fail(k, "accounting identity broken at bank " + std::to_string(b));
      if (s.c < Money() || s.l < Money() || s.ll < Money() || s.d < Money() || s.b < Money())
        fail(k, "negative balance-sheet entry at bank " + std::to_string(b));
      total_ll += s.ll;
      total_b += s.b;
    }
    if (total_ll != total_b) fail(k, "sum of LL differs from sum of B");
    if (snap.graph.total() != total_ll) fail(k, "loan graph total differs from sum of LL");
    if (k == 0) continue;

    const auto& ev = run.events[k - 1];
    const auto& before = run.snapshots[k - 1].sheets;
    const auto& after = snap.sheets;
    Money equity_change;
    for (std::size_t b = 0; b < after.size(); ++b) equity_change += after[b].e - before[b].e;

    switch (ev.type) {
      case EventType::Grant: {
        for (std::size_t b = 0; b < after.size(); ++b)
          if (after[b].e != before[b].e) fail(k, "equity changed at a grant for bank " + std::to_string(b));
        Money borrowed;
        for (const auto& leg : ev.legs) borrowed += leg.amount;
        if (!ev.legs.empty() && borrowed != cfg.ell - ev.liquidity_before)
          fail(k, "interbank legs do not cover ell - C");
        active[ev.package] = ev.legs;
        break;
      }
      case EventType::Repayment: {
        // E^i += r_C ell - r_B (ell - C^i) and E^j += r_B (ell - C^i), with
        // each interest amount posted in micro-units.
        const Money expected_ic = cfg.ell.scaled(cfg.r_c);
        if (ev.corporate_interest != expected_ic) fail(k, "corporate interest differs from r_C * ell");
        std::vector<Money> expected(after.size());
        expected[ev.bank] += expected_ic;
        for (const auto& leg : ev.legs) {
          const Money ib = leg.amount.scaled(cfg.r_b);
          expected[ev.bank] -= ib;
          expected[leg.bank] += ib;
        }
        for (std::size_t b = 0; b < after.size(); ++b)
          if (after[b].e - before[b].e != expected[b])
            fail(k, "repayment equity delta mismatch at bank " + std::to_string(b));
        if (equity_change != expected_ic) fail(k, "total equity change differs from r_C * ell");
        active.erase(ev.package);
        break;
      }
      case EventType::SystemIlliquid:
      case EventType::NegativeBalance:
        if (!(after == before)) fail(k, "informational event changed balance sheets");
        break;
    }
    if (ev.type != EventType::Repayment && equity_change != Money())
      fail(k, "total equity changed outside a repayment");

    // An edge carries exactly the principal of the unrepaid packages.
    LoanGraph rebuilt(cfg.m);
    for (const auto& [id, legs] : active) {
      const auto& grant = *std::find_if(run.events.begin(), run.events.end(), [&](const MarketEvent& e) {
        return e.type == EventType::Grant && e.package == id;
      });
      for (const auto& leg : legs) rebuilt.lend(leg.bank, grant.bank, leg.amount);
    }
    if (!(rebuilt == snap.graph)) fail(k, "loan graph differs from the unrepaid interbank loans");
  }
  return issues;
}

// CSV output; banks are numbered from 1, currency is an exact decimal.

/// time,type,package,banks,amounts: banks lists the corporate lender first,
/// then its interbank lenders, separated by ';', with matching amounts.
inline void write_events_csv(std::ostream& os, const MarketRun& run) {
  os << "time,type,package,banks,amounts\n";
  for (const auto& ev : run.events) {
    std::string banks = std::to_string(ev.bank + 1);
    std::string amounts = ev.amount.to_string();
    for (const auto& leg : ev.legs) {
      banks += ";" + std::to_string(leg.bank + 1);
      amounts += ";" + leg.amount.to_string();
    }
    os << format_real(ev.time) << ',' << to_string(ev.type) << ',' << ev.package << ',' << csv_field(banks)
       << ',' << csv_field(amounts) << '\n';
  }
}

inline void write_sheets_csv(std::ostream& os, const MarketRun& run) {
  os << "time,bank,C,L,LL,D,B,E\n";
  for (const auto& snap : run.snapshots)
    for (std::size_t b = 0; b < snap.sheets.size(); ++b) {
      const auto& s = snap.sheets[b];
      os << format_real(snap.time) << ',' << b + 1 << ',' << s.c.to_string() << ',' << s.l.to_string() << ','
         << s.ll.to_string() << ',' << s.d.to_string() << ',' << s.b.to_string() << ',' << s.e.to_string()
         << '\n';
    }
}

/// Positive entries only; an absent pair has no outstanding principal.
inline void write_graph_csv(std::ostream& os, const MarketRun& run) {
  os << "time,lender,borrower,outstanding\n";
  for (const auto& snap : run.snapshots) {
    const std::size_t m = snap.graph.size();
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t i = 0; i < m; ++i) {
        const Money v = snap.graph.outstanding(j, i);
        if (v > Money()) os << format_real(snap.time) << ',' << j + 1 << ',' << i + 1 << ',' << v.to_string() << '\n';
      }
  }
}

}  // namespace semigraph::interbank
