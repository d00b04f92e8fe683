#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "bpmnopt/error.hpp"

namespace bpmnopt {

/// A re-sequencing problem: tasks in baseline order with their annotations
/// and precedence pairs (task indices, `first` must run before `second`).
struct OrderingInstance {
  std::string id;
  std::vector<std::string> tasks;
  std::vector<double> costs;
  std::vector<double> selectivities;
  std::vector<std::pair<std::size_t, std::size_t>> precedence;

  std::size_t size() const { return tasks.size(); }

  void check() const {
    if (costs.size() != tasks.size() || selectivities.size() != tasks.size())
      throw SolverError("instance '" + id + "': annotation vectors do not match the task list");
    for (std::size_t i = 0; i < size(); ++i) {
      if (!(costs[i] >= 0) || !std::isfinite(costs[i]))
        throw SolverError("instance '" + id + "': invalid cost for task '" + tasks[i] + "'");
      if (!(selectivities[i] > 0) || !std::isfinite(selectivities[i]))
        throw SolverError("instance '" + id + "': invalid selectivity for task '" + tasks[i] + "'");
    }
    for (auto [a, b] : precedence)
      if (a >= size() || b >= size())
        throw SolverError("instance '" + id + "': precedence refers to a task outside the instance");
  }

  /// The given task order, 0..n-1.
  std::vector<std::size_t> baseline_order() const {
    std::vector<std::size_t> order(size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    return order;
  }
};

}  // namespace bpmnopt
