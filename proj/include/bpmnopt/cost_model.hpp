#pragma once

// Average process running time: every vertex costs its per-token cost times
// the expected number of tokens it receives.

#include <cstddef>
#include <span>
#include <vector>

#include "bpmnopt/dag.hpp"
#include "bpmnopt/error.hpp"
#include "bpmnopt/ordering_instance.hpp"

namespace bpmnopt {

inline double evaluate_plan_cost(const TokenFlowDag& dag) {
  if (auto report = validate_dag(dag); !report.ok())
    throw ValidationError("cannot evaluate an invalid DAG: " + report.issues.front());
  const auto rates = token_rates(dag);
  double total = 0.0;
  for (std::size_t i = 0; i < dag.size(); ++i) total += dag.vertex(i).cost * rates[i];
  return total;
}

/// Chain cost of `order`: sum of cost(order[i]) times the product of the
/// selectivities of the tasks placed before it.
inline double evaluate_ordering_cost(const OrderingInstance& instance, std::span<const std::size_t> order) {
  const std::size_t n = instance.size();
  if (order.size() != n) throw SolverError("ordering is not a permutation of the instance's tasks");
  std::vector<bool> seen(n, false);
  for (std::size_t t : order) {
    if (t >= n || seen[t]) throw SolverError("ordering is not a permutation of the instance's tasks");
    seen[t] = true;
  }
  double total = 0.0;
  double prefix = 1.0;
  for (std::size_t t : order) {
    total += instance.costs[t] * prefix;
    prefix *= instance.selectivities[t];
  }
  return total;
}

}  // namespace bpmnopt
