#pragma once

// Shared helpers and independent oracles for the test suite. The oracles
// recompute quantities the library derives, using different algorithms.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bpmnopt/bpmnopt.hpp"

namespace testing_support {

using namespace bpmnopt;

inline std::string fixture_path(const std::string& name) { return std::string(FIXTURE_DIR) + "/" + name; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline BpmnProcess load_fixture_process(const std::string& stem) {
  return parse_bpmn(std::string_view(read_file(fixture_path(stem + ".bpmn"))));
}

inline StatsCatalog load_fixture_stats(const std::string& stem) {
  return load_stats_text(read_file(fixture_path(stem + ".stats.json")));
}

inline MappingOutcome map_fixture(const std::string& stem, const MappingOptions& opts = {}) {
  return map_process(load_fixture_process(stem), load_fixture_stats(stem), opts);
}

/// Token rates by memoised recursion over predecessors (pull), whereas the
/// library pushes rates forward in topological order.
inline std::map<std::string, double> oracle_rates(const TokenFlowDag& dag) {
  std::map<std::string, double> memo;
  std::function<double(std::size_t)> rate = [&](std::size_t v) -> double {
    const std::string& id = dag.vertex(v).id;
    if (auto it = memo.find(id); it != memo.end()) return it->second;
    double r = id == dag.source() ? 1.0 : 0.0;
    for (std::size_t u : dag.predecessors(v)) r += rate(u) * dag.vertex(u).selectivity;
    memo[id] = r;
    return r;
  };
  for (std::size_t v = 0; v < dag.size(); ++v) rate(v);
  return memo;
}

inline double oracle_plan_cost(const TokenFlowDag& dag) {
  auto rates = oracle_rates(dag);
  double total = 0.0;
  for (const auto& v : dag.vertices()) total += v.cost * rates.at(v.id);
  return total;
}

/// Chain cost straight from the definition: cost_i times the product of the
/// selectivities of everything before it.
inline double oracle_chain_cost(const std::vector<double>& costs, const std::vector<double>& sels,
                                const std::vector<std::size_t>& order) {
  double total = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    double prefix = 1.0;
    for (std::size_t j = 0; j < i; ++j) prefix *= sels[order[j]];
    total += costs[order[i]] * prefix;
  }
  return total;
}

/// Warshall closure on an index matrix.
inline std::vector<std::vector<bool>> oracle_closure(std::size_t n,
                                                     const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  std::vector<std::vector<bool>> m(n, std::vector<bool>(n, false));
  for (auto [a, b] : pairs) m[a][b] = true;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      if (m[i][k])
        for (std::size_t j = 0; j < n; ++j)
          if (m[k][j]) m[i][j] = true;
  return m;
}

inline std::size_t closure_size(const std::vector<std::vector<bool>>& m) {
  std::size_t count = 0;
  for (const auto& row : m) count += static_cast<std::size_t>(std::count(row.begin(), row.end(), true));
  return count;
}

/// Exhaustive search over all n! permutations, feasibility checked against
/// the Warshall closure. Returns the optimal cost.
inline double oracle_optimum(const OrderingInstance& inst) {
  const std::size_t n = inst.size();
  auto closed = oracle_closure(n, inst.precedence);
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  double best = INFINITY;
  do {
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i)
      for (std::size_t j = i + 1; j < n && ok; ++j)
        if (closed[perm[j]][perm[i]]) ok = false;
    if (ok) best = std::min(best, oracle_chain_cost(inst.costs, inst.selectivities, perm));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Random instance for property tests, independent of the study generator:
/// each forward pair is constrained with probability `density`.
inline OrderingInstance random_instance(std::mt19937_64& rng, std::size_t n, double density) {
  std::uniform_real_distribution<double> cost(1.0, 100.0);
  std::uniform_real_distribution<double> sel(0.01, 2.0);
  std::bernoulli_distribution edge(density);
  OrderingInstance inst;
  inst.id = "random";
  for (std::size_t i = 0; i < n; ++i) {
    inst.tasks.push_back("t" + std::to_string(i));
    inst.costs.push_back(cost(rng));
    inst.selectivities.push_back(sel(rng));
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (edge(rng)) inst.precedence.emplace_back(i, j);
  return inst;
}

inline bool near(double a, double b, double tol = 1e-9) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

/// Structural comparison with numeric tolerance: same vertices (id, kind,
/// origin, flags), same edges, same source and constraints.
inline std::string compare_dags(const TokenFlowDag& expected, const TokenFlowDag& actual, double tol = 1e-9) {
  if (expected.source() != actual.source())
    return "source differs: " + expected.source() + " vs " + actual.source();
  if (expected.size() != actual.size())
    return "vertex count differs: " + std::to_string(expected.size()) + " vs " + std::to_string(actual.size());
  for (const auto& e : expected.vertices()) {
    auto i = actual.find(e.id);
    if (!i) return "missing vertex " + e.id;
    const Vertex& a = actual.vertex(*i);
    if (a.kind != e.kind || a.origin != e.origin || a.pipelining != e.pipelining ||
        a.parallelizable != e.parallelizable || a.max_degree != e.max_degree)
      return "annotations differ on " + e.id;
    if (std::abs(a.cost - e.cost) > tol) return "cost differs on " + e.id;
    if (std::abs(a.selectivity - e.selectivity) > tol) return "selectivity differs on " + e.id;
  }
  for (auto [a, b] : expected.edges())
    if (!actual.has_edge(expected.vertex(a).id, expected.vertex(b).id))
      return "missing edge " + expected.vertex(a).id + " -> " + expected.vertex(b).id;
  if (expected.edges().size() != actual.edges().size()) return "edge count differs";
  if (expected.constraints().precedence != actual.constraints().precedence) return "precedence differs";
  if (expected.constraints().exclusion != actual.constraints().exclusion) return "exclusion differs";
  return "";
}

}  // namespace testing_support
