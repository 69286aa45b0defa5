#pragma once

// Graph states of the chain and the functionals attached to them: edge count,
// degrees, (strongly) connected components, triangles, permanent, determinant
// and the permanent polynomial. Node indices are 0-based in the API; text
// formats use 1-based labels.

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cmath>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace semigraph {

using BigInt = boost::multiprecision::cpp_int;

enum class GraphMode { UndirectedSimple, UndirectedWithLoops, Directed, WeightedDirected };

class GraphError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an exact computation would exceed its configured size cap.
class ResourceLimitError : public std::length_error {
 public:
  using std::length_error::length_error;
};

constexpr bool is_undirected(GraphMode mode) {
  return mode == GraphMode::UndirectedSimple || mode == GraphMode::UndirectedWithLoops;
}
constexpr bool is_weighted(GraphMode mode) { return mode == GraphMode::WeightedDirected; }

inline std::string_view to_string(GraphMode mode) {
  switch (mode) {
    case GraphMode::UndirectedSimple: return "undirected-simple";
    case GraphMode::UndirectedWithLoops: return "undirected-loops";
    case GraphMode::Directed: return "directed";
    case GraphMode::WeightedDirected: return "weighted-directed";
  }
  return "unknown";
}

inline GraphMode parse_graph_mode(std::string_view name) {
  for (auto mode : {GraphMode::UndirectedSimple, GraphMode::UndirectedWithLoops,
                    GraphMode::Directed, GraphMode::WeightedDirected}) {
    if (to_string(mode) == name) return mode;
  }
  throw GraphError("unknown graph mode '" + std::string(name) + "'");
}

/// Adjacency matrix over M nodes. Unweighted modes keep one bit row per node;
/// the weighted mode keeps a dense row-major matrix of nonnegative reals.
/// Mutators preserve the mode invariants (symmetry, empty diagonal, 0/1).
class GraphState {
 public:
  GraphState(GraphMode mode, std::size_t m)
      : mode_(mode), m_(m), words_((m + 63) / 64) {
    if (m == 0) throw GraphError("graph must have at least one node");
    if (is_weighted(mode))
      weights_.assign(m * m, 0.0);
    else
      bits_.assign(m * words_, 0);
  }

  /// Builds a state from a row-major M x M matrix, validating the mode invariants.
  static GraphState from_matrix(GraphMode mode, std::size_t m, std::span<const double> a) {
    if (a.size() != m * m)
      throw GraphError("matrix has " + std::to_string(a.size()) + " entries, expected " +
                       std::to_string(m * m));
    GraphState g(mode, m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double v = a[i * m + j];
        if (!(v >= 0.0) || !std::isfinite(v))
          throw GraphError("entries must be finite and nonnegative");
        if (is_weighted(mode)) {
          g.weights_[i * m + j] = v;
          continue;
        }
        if (v != 0.0 && v != 1.0) throw GraphError("unweighted modes need 0/1 entries");
        if (is_undirected(mode) && a[j * m + i] != v)
          throw GraphError("undirected modes need a symmetric matrix");
        if (mode == GraphMode::UndirectedSimple && i == j && v != 0.0)
          throw GraphError("undirected-simple graphs have no loops");
        if (v != 0.0) g.set_bit(i, j);
      }
    }
    return g;
  }

  GraphMode mode() const { return mode_; }
  std::size_t size() const { return m_; }
  bool weighted() const { return is_weighted(mode_); }
  std::size_t words_per_row() const { return words_; }

  double at(std::size_t i, std::size_t j) const {
    check_index(i, j);
    if (weighted()) return weights_[i * m_ + j];
    return test_bit(i, j) ? 1.0 : 0.0;
  }

  bool has_edge(std::size_t i, std::size_t j) const { return at(i, j) != 0.0; }

  void set_edge(std::size_t i, std::size_t j, bool present) {
    check_index(i, j);
    require_unweighted("set_edge");
    if (mode_ == GraphMode::UndirectedSimple && i == j)
      throw GraphError("undirected-simple graphs have no loops");
    assign_bit(i, j, present);
    if (is_undirected(mode_)) assign_bit(j, i, present);
  }

  void toggle_edge(std::size_t i, std::size_t j) { set_edge(i, j, !test_bit_checked(i, j)); }

  void set_weight(std::size_t i, std::size_t j, double w) {
    check_index(i, j);
    if (!weighted()) throw GraphError("set_weight needs a weighted graph");
    if (!(w >= 0.0) || !std::isfinite(w)) throw GraphError("weights must be finite and nonnegative");
    weights_[i * m_ + j] = w;
  }

  /// Bit row i (bit j set iff A[i][j] = 1). Unweighted modes only.
  std::span<const std::uint64_t> row(std::size_t i) const {
    require_unweighted("row");
    if (i >= m_) throw GraphError("node index out of range");
    return {bits_.data() + i * words_, words_};
  }

  std::vector<double> matrix() const {
    std::vector<double> out(m_ * m_);
    for (std::size_t i = 0; i < m_; ++i)
      for (std::size_t j = 0; j < m_; ++j) out[i * m_ + j] = at(i, j);
    return out;
  }

  /// Binarized directed view (entry > 0). Identity for unweighted graphs.
  GraphState support() const {
    if (!weighted()) return *this;
    GraphState g(GraphMode::Directed, m_);
    for (std::size_t i = 0; i < m_; ++i)
      for (std::size_t j = 0; j < m_; ++j)
        if (weights_[i * m_ + j] > 0.0) g.set_bit(i, j);
    return g;
  }

  /// FNV-1a digest of mode, size and entries.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
      for (int k = 0; k < 8; ++k) {
        h ^= (v >> (8 * k)) & 0xffU;
        h *= 0x100000001b3ULL;
      }
    };
    mix(static_cast<std::uint64_t>(mode_));
    mix(m_);
    if (weighted()) {
      for (double w : weights_) mix(std::bit_cast<std::uint64_t>(w));
    } else {
      for (auto w : bits_) mix(w);
    }
    return h;
  }

  friend bool operator==(const GraphState&, const GraphState&) = default;

 private:
  void check_index(std::size_t i, std::size_t j) const {
    if (i >= m_ || j >= m_) throw GraphError("node index out of range");
  }
  void require_unweighted(const char* op) const {
    if (weighted()) throw GraphError(std::string(op) + " is not defined for weighted graphs");
  }
  bool test_bit(std::size_t i, std::size_t j) const {
    return (bits_[i * words_ + j / 64] >> (j % 64)) & 1U;
  }
  bool test_bit_checked(std::size_t i, std::size_t j) const {
    check_index(i, j);
    require_unweighted("toggle_edge");
    return test_bit(i, j);
  }
  void set_bit(std::size_t i, std::size_t j) { bits_[i * words_ + j / 64] |= 1ULL << (j % 64); }
  void assign_bit(std::size_t i, std::size_t j, bool v) {
    auto& w = bits_[i * words_ + j / 64];
    const std::uint64_t mask = 1ULL << (j % 64);
    w = v ? (w | mask) : (w & ~mask);
  }

  GraphMode mode_;
  std::size_t m_;
  std::size_t words_;
  std::vector<std::uint64_t> bits_;
  std::vector<double> weights_;
};

namespace detail {

inline void require_unweighted(const GraphState& g, const char* op) {
  if (g.weighted()) throw GraphError(std::string(op) + " is not defined for weighted graphs");
}

inline std::size_t popcount(std::span<const std::uint64_t> row) {
  std::size_t n = 0;
  for (auto w : row) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

template <class F>
void for_each_bit(std::span<const std::uint64_t> row, F&& f) {
  for (std::size_t w = 0; w < row.size(); ++w) {
    std::uint64_t bits = row[w];
    while (bits) {
      const auto b = static_cast<std::size_t>(std::countr_zero(bits));
      f(w * 64 + b);
      bits &= bits - 1;
    }
  }
}

}  // namespace detail

/// Number of distinct graphs on M labelled nodes for an unweighted mode.
inline BigInt state_space_size(std::size_t m, GraphMode mode) {
  if (m == 0) throw GraphError("M must be positive");
  std::size_t bits = 0;
  switch (mode) {
    case GraphMode::UndirectedWithLoops: bits = m * (m + 1) / 2; break;
    case GraphMode::UndirectedSimple: bits = m * (m - 1) / 2; break;
    case GraphMode::Directed: bits = m * m; break;
    case GraphMode::WeightedDirected:
      throw GraphError("weighted graphs do not form a finite state space");
  }
  return BigInt(1) << bits;
}

/// Undirected modes count each unordered pair (and each loop) once.
inline std::size_t edge_count(const GraphState& g) {
  detail::require_unweighted(g, "edge_count");
  std::size_t total = 0, loops = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    total += detail::popcount(g.row(i));
    if (g.has_edge(i, i)) ++loops;
  }
  if (is_undirected(g.mode())) return (total - loops) / 2 + loops;
  return total;
}

/// Row sums (out-degrees for directed graphs); a loop contributes 1.
inline std::vector<std::size_t> degree_sequence(const GraphState& g) {
  detail::require_unweighted(g, "degree_sequence");
  std::vector<std::size_t> deg(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) deg[i] = detail::popcount(g.row(i));
  return deg;
}

/// Partition of the nodes into connected components (strongly connected for
/// directed graphs). Each part is sorted; parts are ordered by smallest member.
/// Weighted graphs are read through their support.
inline std::vector<std::vector<std::size_t>> connected_components(const GraphState& input) {
  const GraphState g = input.support();
  const std::size_t m = g.size();
  std::vector<std::vector<std::size_t>> parts;

  if (is_undirected(g.mode())) {
    std::vector<char> seen(m, 0);
    std::vector<std::size_t> stack;
    for (std::size_t s = 0; s < m; ++s) {
      if (seen[s]) continue;
      std::vector<std::size_t> part;
      seen[s] = 1;
      stack.push_back(s);
      while (!stack.empty()) {
        const std::size_t v = stack.back();
        stack.pop_back();
        part.push_back(v);
        detail::for_each_bit(g.row(v), [&](std::size_t u) {
          if (!seen[u]) {
            seen[u] = 1;
            stack.push_back(u);
          }
        });
      }
      std::sort(part.begin(), part.end());
      parts.push_back(std::move(part));
    }
    return parts;
  }

  // Tarjan's algorithm with an explicit call stack.
  constexpr std::size_t unvisited = static_cast<std::size_t>(-1);
  std::vector<std::size_t> index(m, unvisited), low(m, 0);
  std::vector<char> on_stack(m, 0);
  std::vector<std::size_t> scc_stack;
  std::size_t counter = 0;
  struct Frame {
    std::size_t v;
    std::size_t next;  // next candidate successor
  };
  std::vector<Frame> call;
  for (std::size_t root = 0; root < m; ++root) {
    if (index[root] != unvisited) continue;
    call.push_back({root, 0});
    index[root] = low[root] = counter++;
    scc_stack.push_back(root);
    on_stack[root] = 1;
    while (!call.empty()) {
      Frame& f = call.back();
      bool descended = false;
      while (f.next < m) {
        const std::size_t u = f.next++;
        if (!g.has_edge(f.v, u)) continue;
        if (index[u] == unvisited) {
          index[u] = low[u] = counter++;
          scc_stack.push_back(u);
          on_stack[u] = 1;
          call.push_back({u, 0});
          descended = true;
          break;
        }
        if (on_stack[u]) low[f.v] = std::min(low[f.v], index[u]);
      }
      if (descended) continue;
      const std::size_t v = f.v;
      call.pop_back();
      if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
      if (low[v] == index[v]) {
        std::vector<std::size_t> part;
        std::size_t w;
        do {
          w = scc_stack.back();
          scc_stack.pop_back();
          on_stack[w] = 0;
          part.push_back(w);
        } while (w != v);
        std::sort(part.begin(), part.end());
        parts.push_back(std::move(part));
      }
    }
  }
  std::sort(parts.begin(), parts.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return parts;
}

/// True when the undirected graph is a single component spanning every node.
inline bool is_connected(const GraphState& g) {
  detail::require_unweighted(g, "is_connected");
  if (!is_undirected(g.mode())) return connected_components(g).size() == 1;
  const std::size_t m = g.size();
  std::vector<std::uint64_t> seen(g.words_per_row(), 0);
  std::vector<std::size_t> stack{0};
  seen[0] = 1;
  std::size_t reached = 1;
  while (!stack.empty()) {
    const auto row = g.row(stack.back());
    stack.pop_back();
    for (std::size_t w = 0; w < row.size(); ++w) {
      std::uint64_t fresh = row[w] & ~seen[w];
      seen[w] |= fresh;
      while (fresh) {
        stack.push_back(w * 64 + static_cast<std::size_t>(std::countr_zero(fresh)));
        fresh &= fresh - 1;
        ++reached;
      }
    }
  }
  return reached == m;
}

/// Nodes in the connected component of `vertex` (undirected modes), ascending.
inline std::vector<std::size_t> component_of(const GraphState& g, std::size_t vertex) {
  detail::require_unweighted(g, "component_of");
  if (!is_undirected(g.mode())) throw GraphError("component_of needs an undirected graph");
  if (vertex >= g.size()) throw GraphError("node index out of range");
  std::vector<std::uint64_t> seen(g.words_per_row(), 0);
  seen[vertex / 64] |= 1ULL << (vertex % 64);
  std::vector<std::size_t> stack{vertex};
  while (!stack.empty()) {
    const auto row = g.row(stack.back());
    stack.pop_back();
    for (std::size_t w = 0; w < row.size(); ++w) {
      std::uint64_t fresh = row[w] & ~seen[w];
      seen[w] |= fresh;
      while (fresh) {
        stack.push_back(w * 64 + static_cast<std::size_t>(std::countr_zero(fresh)));
        fresh &= fresh - 1;
      }
    }
  }
  std::vector<std::size_t> out;
  detail::for_each_bit(seen, [&](std::size_t v) { out.push_back(v); });
  return out;
}

/// trace(A^3), computed by integer matrix products.
inline std::uint64_t trace_of_cube(const GraphState& g) {
  detail::require_unweighted(g, "trace_of_cube");
  const std::size_t m = g.size();
  std::vector<std::uint64_t> a(m * m), a2(m * m, 0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) a[i * m + j] = g.has_edge(i, j) ? 1 : 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < m; ++k)
      if (a[i * m + k])
        for (std::size_t j = 0; j < m; ++j) a2[i * m + j] += a[k * m + j];
  std::uint64_t trace = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < m; ++k) trace += a2[i * m + k] * a[k * m + i];
  return trace;
}

/// Some 3-clique exists. Scans each edge {i, j} for a common neighbour.
inline bool contains_triangle(const GraphState& g) {
  if (g.mode() != GraphMode::UndirectedSimple)
    throw GraphError("contains_triangle needs an undirected-simple graph");
  const std::size_t words = g.words_per_row();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto ri = g.row(i);
    bool found = false;
    detail::for_each_bit(ri, [&](std::size_t j) {
      if (found || j <= i) return;
      const auto rj = g.row(j);
      for (std::size_t w = 0; w < words; ++w)
        if (ri[w] & rj[w]) {
          found = true;
          return;
        }
    });
    if (found) return true;
  }
  return false;
}

inline constexpr std::size_t kPermanentMaxNodes = 20;
inline constexpr std::size_t kPermanentPolynomialMaxNodes = 10;

/// Exact permanent by Ryser's inclusion-exclusion in Gray-code order,
/// O(2^M M). Loops (diagonal entries) take part like any other entry.
inline std::uint64_t permanent(const GraphState& g, std::size_t max_nodes = kPermanentMaxNodes) {
  detail::require_unweighted(g, "permanent");
  const std::size_t n = g.size();
  if (n > max_nodes || n > kPermanentMaxNodes)
    throw ResourceLimitError("permanent is capped at M = " +
                             std::to_string(std::min(max_nodes, kPermanentMaxNodes)));
  // |row sum| <= 20, so products fit in 20^20 < 2^87 and the 2^20-term sum in 2^107.
  __extension__ using wide = __int128;
  std::vector<std::int64_t> row_sum(n, 0);
  wide total = 0;
  const std::uint64_t subsets = 1ULL << n;
  for (std::uint64_t k = 1; k < subsets; ++k) {
    const std::uint64_t gray = k ^ (k >> 1);
    const auto col = static_cast<std::size_t>(std::countr_zero(k));
    const std::int64_t delta = ((gray >> col) & 1U) ? 1 : -1;
    for (std::size_t i = 0; i < n; ++i)
      if (g.has_edge(i, col)) row_sum[i] += delta;
    wide prod = 1;
    for (std::size_t i = 0; i < n && prod != 0; ++i) prod *= row_sum[i];
    if (prod == 0) continue;
    if (std::popcount(gray) % 2 == 1)
      total -= prod;
    else
      total += prod;
  }
  if (n % 2 == 1) total = -total;
  return static_cast<std::uint64_t>(total);
}

/// Integer determinant by fraction-free (Bareiss) elimination.
inline BigInt determinant(const GraphState& g) {
  detail::require_unweighted(g, "determinant");
  const std::size_t n = g.size();
  std::vector<BigInt> a(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i * n + j] = g.has_edge(i, j) ? 1 : 0;
  BigInt sign = 1, prev = 1;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (a[k * n + k] == 0) {
      std::size_t p = k + 1;
      while (p < n && a[p * n + k] == 0) ++p;
      if (p == n) return 0;
      for (std::size_t j = 0; j < n; ++j) std::swap(a[k * n + j], a[p * n + j]);
      sign = -sign;
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      for (std::size_t j = k + 1; j < n; ++j)
        a[i * n + j] = (a[i * n + j] * a[k * n + k] - a[i * n + k] * a[k * n + j]) / prev;
    }
    prev = a[k * n + k];
  }
  return sign * a[(n - 1) * n + (n - 1)];
}

/// One monomial y_{1,s(1)} ... y_{M,s(M)} of the permanent polynomial,
/// stored as the permutation s (0-based).
using Monomial = std::vector<std::size_t>;

inline std::string format_monomial(const Monomial& sigma) {
  std::string out;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    if (i) out += '*';
    out += "y_{" + std::to_string(i + 1) + "," + std::to_string(sigma[i] + 1) + "}";
  }
  return out;
}

/// Permanent of Y .* A for a symbolic matrix Y: one unit-coefficient
/// monomial per permutation supported by A.
struct PermanentPolynomial {
  std::size_t m = 0;
  std::set<Monomial> monomials;

  std::size_t size() const { return monomials.size(); }

  std::string to_string() const {
    std::string out;
    for (const auto& mono : monomials) {
      if (!out.empty()) out += " + ";
      out += format_monomial(mono);
    }
    return out.empty() ? "0" : out;
  }
};

inline PermanentPolynomial permanent_polynomial(const GraphState& g) {
  detail::require_unweighted(g, "permanent_polynomial");
  const std::size_t n = g.size();
  if (n > kPermanentPolynomialMaxNodes)
    throw ResourceLimitError("permanent polynomial is capped at M = " +
                             std::to_string(kPermanentPolynomialMaxNodes));
  PermanentPolynomial poly{n, {}};
  Monomial sigma(n);
  std::vector<char> used(n, 0);
  auto extend = [&](auto&& self, std::size_t row) -> void {
    if (row == n) {
      poly.monomials.insert(sigma);
      return;
    }
    for (std::size_t col = 0; col < n; ++col) {
      if (used[col] || !g.has_edge(row, col)) continue;
      used[col] = 1;
      sigma[row] = col;
      self(self, row + 1);
      used[col] = 0;
    }
  };
  extend(extend, 0);
  return poly;
}

/// pperm(g2) - pperm(g1) as the monomials gained and lost.
struct PpermDelta {
  std::set<Monomial> added;
  std::set<Monomial> removed;
  bool empty() const { return added.empty() && removed.empty(); }
};

inline PpermDelta pperm_transition_delta(const GraphState& from, const GraphState& to) {
  if (from.size() != to.size()) throw GraphError("pperm delta needs graphs of equal size");
  const auto p1 = permanent_polynomial(from);
  const auto p2 = permanent_polynomial(to);
  PpermDelta delta;
  std::set_difference(p2.monomials.begin(), p2.monomials.end(), p1.monomials.begin(),
                      p1.monomials.end(), std::inserter(delta.added, delta.added.end()));
  std::set_difference(p1.monomials.begin(), p1.monomials.end(), p2.monomials.begin(),
                      p2.monomials.end(), std::inserter(delta.removed, delta.removed.end()));
  return delta;
}

/// All graphs of an unweighted mode on M nodes, in bit-pattern order. Used to
/// index explicit transition matrices; capped at 4096 states.
inline std::vector<GraphState> enumerate_graphs(std::size_t m, GraphMode mode,
                                                std::size_t max_states = 4096) {
  const BigInt count = state_space_size(m, mode);
  if (count > max_states)
    throw ResourceLimitError("state space too large to enumerate");
  std::vector<std::pair<std::size_t, std::size_t>> slots;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (is_undirected(mode) && j < i) continue;
      if (mode == GraphMode::UndirectedSimple && i == j) continue;
      slots.emplace_back(i, j);
    }
  const auto total = count.convert_to<std::size_t>();
  std::vector<GraphState> out;
  out.reserve(total);
  for (std::size_t code = 0; code < total; ++code) {
    GraphState g(mode, m);
    for (std::size_t s = 0; s < slots.size(); ++s)
      if ((code >> s) & 1U) g.set_edge(slots[s].first, slots[s].second, true);
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace semigraph
