#pragma once

// Subordination of a discrete-time chain X_n to a renewal counting process:
// Y(t) = X_{N(t)}. Sojourn laws may depend on the state being left.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "semigraph/graph_core.hpp"
#include "semigraph/random.hpp"
#include "semigraph/renewal.hpp"

namespace semigraph {

/// A next-state rule: mutates the state in place using the chain stream.
template <class Kernel, class State>
concept TransitionKernel = requires(const Kernel& k, State& s, Rng& rng) { k(s, rng); };

/// Global: one law for every sojourn. StateDependent: the law of the sojourn
/// spent in x (the state occupied before the jump).
template <class State = GraphState>
class SojournPolicy {
 public:
  using Rule = std::function<SojournLaw(const State&)>;

  static SojournPolicy global(SojournLaw law) { return SojournPolicy(std::move(law)); }
  static SojournPolicy state_dependent(Rule rule) {
    if (!rule) throw std::invalid_argument("state-dependent policy needs a rule");
    return SojournPolicy(std::move(rule));
  }

  bool is_global() const { return std::holds_alternative<SojournLaw>(law_); }

  SojournLaw law_for(const State& x) const {
    if (const auto* law = std::get_if<SojournLaw>(&law_)) return *law;
    return std::get<Rule>(law_)(x);
  }

 private:
  explicit SojournPolicy(SojournLaw law) : law_(std::move(law)) {}
  explicit SojournPolicy(Rule rule) : law_(std::move(rule)) {}

  std::variant<SojournLaw, Rule> law_;
};

/// One subordinated path: the time-zero state, X_1..X_n and the epochs
/// T_1..T_n at which each transition happened.
template <class State = GraphState>
struct TrajectoryRecord {
  State initial_state;
  std::vector<State> states;
  EpochSequence epochs;

  double horizon() const { return epochs.horizon; }
};

/// Drives one path until the horizon or until `visit(n, T_n, X_n)` returns
/// false. The clock and chain draw from separate streams, so the epochs are
/// independent of the chain under a global policy.
template <class State, class Kernel, class Visitor>
  requires TransitionKernel<Kernel, State>
void run_path(const Kernel& kernel, const SojournPolicy<State>& policy, State& state,
              double horizon, Rng& clock, Rng& chain, Visitor&& visit) {
  double t = 0.0;
  std::size_t n = 0;
  const bool global = policy.is_global();
  const SojournLaw fixed = global ? policy.law_for(state) : SojournLaw::exponential(1.0);
  for (;;) {
    const double j = global ? fixed.sample(clock) : policy.law_for(state).sample(clock);
    t += j;
    if (t > horizon) return;
    kernel(state, chain);
    ++n;
    if (!visit(n, t, static_cast<const State&>(state))) return;
  }
}

template <class State, class Kernel>
  requires TransitionKernel<Kernel, State>
TrajectoryRecord<State> simulate(const Kernel& kernel, const SojournPolicy<State>& policy,
                                 const State& initial, double horizon, Rng& clock, Rng& chain) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  TrajectoryRecord<State> tr{initial, {}, {{}, horizon}};
  State state = initial;
  run_path(kernel, policy, state, horizon, clock, chain,
           [&](std::size_t, double t, const State& x) {
             tr.epochs.epochs.push_back(t);
             tr.states.push_back(x);
             return true;
           });
  return tr;
}

/// Streams derived from (master_seed, trajectory_id, Clock/Chain).
template <class State, class Kernel>
  requires TransitionKernel<Kernel, State>
TrajectoryRecord<State> simulate(const Kernel& kernel, const SojournPolicy<State>& policy,
                                 const State& initial, double horizon, std::uint64_t master_seed,
                                 std::uint64_t trajectory_id = 0) {
  Rng clock = Rng::derive(master_seed, trajectory_id, StreamTag::Clock);
  Rng chain = Rng::derive(master_seed, trajectory_id, StreamTag::Chain);
  return simulate(kernel, policy, initial, horizon, clock, chain);
}

/// Y(t) = X_{N(t)}, with X_0 the initial state. Right-continuous in t.
template <class State>
const State& state_at(const TrajectoryRecord<State>& tr, double t) {
  if (!(t >= 0.0) || t > tr.horizon()) throw std::out_of_range("state_at needs 0 <= t <= horizon");
  const std::size_t n = count_at(tr.epochs, t);
  return n == 0 ? tr.initial_state : tr.states[n - 1];
}

/// First epoch at which the predicate holds, or NotStopped (stopped = false)
/// once max_transitions transitions have elapsed without it.
struct StopResult {
  bool stopped = false;
  double time = 0.0;
  std::size_t transitions = 0;
};

template <class State, class Kernel, class Predicate>
  requires TransitionKernel<Kernel, State> && std::predicate<Predicate, const State&>
StopResult stopping_time(const Kernel& kernel, const SojournPolicy<State>& policy,
                         const State& initial, Predicate&& predicate,
                         std::size_t max_transitions, Rng& clock, Rng& chain) {
  if (max_transitions == 0) throw std::invalid_argument("max_transitions must be positive");
  if (predicate(initial)) return {true, 0.0, 0};
  StopResult result;
  State state = initial;
  run_path(kernel, policy, state, std::numeric_limits<double>::infinity(), clock, chain,
           [&](std::size_t n, double t, const State& x) {
             result.transitions = n;
             result.time = t;
             if (predicate(x)) {
               result.stopped = true;
               return false;
             }
             return n < max_transitions;
           });
  return result;
}

// ---------------------------------------------------------------------------
// Explicit stochastic matrices over enumerated state spaces.

using StochasticMatrix = Eigen::MatrixXd;

inline void validate_stochastic(const StochasticMatrix& p, double tol = 1e-12) {
  if (p.rows() != p.cols() || p.rows() == 0)
    throw std::invalid_argument("stochastic matrix must be square and nonempty");
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      if (!(p(i, j) >= 0.0)) throw std::invalid_argument("stochastic matrix has a negative entry");
      sum += p(i, j);
    }
    if (std::abs(sum - 1.0) > tol)
      throw std::invalid_argument("row " + std::to_string(i) + " of the stochastic matrix sums to " +
                                  std::to_string(sum));
  }
}

inline StochasticMatrix matrix_power(const StochasticMatrix& p, std::size_t n) {
  StochasticMatrix out = StochasticMatrix::Identity(p.rows(), p.cols());
  for (std::size_t k = 0; k < n; ++k) out = out * p;
  return out;
}

/// max |P^{m+r} - P^m P^r|, i.e. P^{m+r}(x,y) = sum_z P^m(x,z) P^r(z,y).
inline double chapman_kolmogorov_check(const StochasticMatrix& p, std::size_t m, std::size_t r) {
  validate_stochastic(p);
  if (m == 0 || r == 0) throw std::invalid_argument("m and r must be positive");
  const StochasticMatrix lhs = matrix_power(p, m + r);
  const StochasticMatrix rhs = matrix_power(p, m) * matrix_power(p, r);
  return (lhs - rhs).cwiseAbs().maxCoeff();
}

/// Law of X_m given the law p0 of X_1: p0 P^{m-1}.
inline Eigen::RowVectorXd marginal_at_step(const Eigen::RowVectorXd& p0, const StochasticMatrix& p,
                                           std::size_t m) {
  validate_stochastic(p);
  if (m == 0) throw std::invalid_argument("step index starts at 1");
  if (p0.size() != p.rows()) throw std::invalid_argument("initial law and matrix sizes differ");
  if ((p0.array() < 0.0).any() || std::abs(p0.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("initial law must be a probability vector");
  Eigen::RowVectorXd q = p0;
  for (std::size_t k = 1; k < m; ++k) q = q * p;
  return q;
}

/// Kernel given by an explicit stochastic matrix over an enumerated list of
/// graphs. Limited to 4096 states.
class ExplicitKernel {
 public:
  static constexpr std::size_t kMaxStates = 4096;

  ExplicitKernel(std::vector<GraphState> states, StochasticMatrix p)
      : states_(std::move(states)), p_(std::move(p)) {
    if (states_.size() > kMaxStates) throw ResourceLimitError("explicit kernels need <= 4096 states");
    validate_stochastic(p_);
    if (static_cast<std::size_t>(p_.rows()) != states_.size())
      throw std::invalid_argument("matrix size does not match the state enumeration");
    for (std::size_t k = 0; k < states_.size(); ++k) {
      if (!index_.emplace(states_[k].hash(), k).second)
        throw std::invalid_argument("state enumeration has duplicates or hash collisions");
    }
  }

  const std::vector<GraphState>& states() const { return states_; }
  const StochasticMatrix& matrix() const { return p_; }

  std::size_t index_of(const GraphState& g) const {
    const auto it = index_.find(g.hash());
    if (it == index_.end() || !(states_[it->second] == g))
      throw std::invalid_argument("state is not in the enumeration");
    return it->second;
  }

  void operator()(GraphState& g, Rng& rng) const {
    const auto row = static_cast<Eigen::Index>(index_of(g));
    const double u = rng.uniform();
    double acc = 0.0;
    Eigen::Index pick = -1;
    for (Eigen::Index j = 0; j < p_.cols(); ++j) {
      if (p_(row, j) <= 0.0) continue;
      pick = j;
      acc += p_(row, j);
      if (u < acc) break;
    }
    g = states_[static_cast<std::size_t>(pick)];
  }

 private:
  std::vector<GraphState> states_;
  StochasticMatrix p_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

}  // namespace semigraph
