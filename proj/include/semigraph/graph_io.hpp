#pragma once

#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semigraph/format.hpp"
#include "semigraph/graph_core.hpp"

namespace semigraph {

/// {"mode": "...", "m": M, "a": [row-major M*M entries]}
inline nlohmann::json graph_to_json(const GraphState& g) {
  nlohmann::json a = nlohmann::json::array();
  for (double v : g.matrix()) {
    if (g.weighted())
      a.push_back(v);
    else
      a.push_back(v != 0.0 ? 1 : 0);
  }
  return {{"mode", std::string(to_string(g.mode()))}, {"m", g.size()}, {"a", std::move(a)}};
}

/// Accepts "a" either flat (row-major) or as an array of rows.
inline GraphState graph_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("mode") || !j.contains("m") || !j.contains("a"))
    throw GraphError("graph JSON needs keys mode, m, a");
  const GraphMode mode = parse_graph_mode(j.at("mode").get<std::string>());
  const auto m = j.at("m").get<std::size_t>();
  std::vector<double> flat;
  for (const auto& item : j.at("a")) {
    if (item.is_array()) {
      for (const auto& v : item) flat.push_back(v.get<double>());
    } else {
      flat.push_back(item.get<double>());
    }
  }
  return GraphState::from_matrix(mode, m, flat);
}

/// One "i j [w]" line per edge, 1-based. Undirected graphs list i <= j only.
inline void write_edge_list(std::ostream& os, const GraphState& g) {
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = is_undirected(g.mode()) ? i : 0; j < g.size(); ++j) {
      const double v = g.at(i, j);
      if (v == 0.0) continue;
      os << i + 1 << ' ' << j + 1;
      if (g.weighted()) os << ' ' << format_real(v);
      os << '\n';
    }
}

/// Reads "i j [w]" lines (1-based). Blank lines and '#' comments are skipped.
inline GraphState read_edge_list(std::istream& is, GraphMode mode, std::size_t m) {
  GraphState g(mode, m);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    long long i = 0, j = 0;
    if (!(ls >> i)) continue;
    if (!(ls >> j) || i < 1 || j < 1 || static_cast<std::size_t>(i) > m ||
        static_cast<std::size_t>(j) > m)
      throw GraphError("edge list line " + std::to_string(lineno) + ": bad node index");
    const auto a = static_cast<std::size_t>(i - 1), b = static_cast<std::size_t>(j - 1);
    double w = 1.0;
    const bool has_weight = static_cast<bool>(ls >> w);
    if (g.weighted()) {
      g.set_weight(a, b, has_weight ? w : 1.0);
    } else {
      if (has_weight && w != 1.0)
        throw GraphError("edge list line " + std::to_string(lineno) +
                         ": weights need the weighted-directed mode");
      g.set_edge(a, b, true);
    }
  }
  return g;
}

}  // namespace semigraph
