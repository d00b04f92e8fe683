#pragma once

// Precedence-constrained re-sequencing of reorderable task chains.
//
// Three solvers share one contract: optimize_exact_dp (dynamic program over
// downward-closed subsets), optimize_greedy (rank ordering plus adjacent-swap
// hill climbing) and brute_force_oracle (enumerates every linear extension,
// used to check the other two).

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bpmnopt/cost_model.hpp"
#include "bpmnopt/dag.hpp"
#include "bpmnopt/error.hpp"
#include "bpmnopt/ordering_instance.hpp"

namespace bpmnopt {

enum class SolveMethod { ExactDP, Greedy, BruteForce };

inline std::string_view to_string(SolveMethod m) {
  switch (m) {
    case SolveMethod::ExactDP: return "exact";
    case SolveMethod::Greedy: return "greedy";
    case SolveMethod::BruteForce: return "brute_force";
  }
  return "?";
}

struct OptimizationResult {
  std::vector<std::size_t> ordering;  // task indices, a linear extension
  double cost = 0.0;
  double baseline_cost = 0.0;
  double improvement = 0.0;  // 1 - cost / baseline_cost
  SolveMethod method = SolveMethod::ExactDP;
  std::size_t candidates = 0;  // orderings/states examined
};

inline constexpr std::size_t kMaxExactTasks = 24;
inline constexpr std::size_t kMaxBruteForceTasks = 10;

/// For each task, the bit mask of all tasks that must precede it (transitive).
/// Throws SolverError on cyclic precedence.
inline std::vector<std::uint64_t> predecessor_masks(const OrderingInstance& instance) {
  const std::size_t n = instance.size();
  if (n > 64) throw SolverError("instance '" + instance.id + "' exceeds 64 tasks");
  std::vector<std::uint64_t> direct(n, 0);
  for (auto [a, b] : instance.precedence) {
    if (a == b) throw SolverError("instance '" + instance.id + "': cyclic precedence");
    direct[b] |= std::uint64_t{1} << a;
  }
  std::vector<std::uint64_t> closed = direct;
  // Fixed point over n rounds: long enough for any acyclic chain.
  for (std::size_t round = 0; round < n; ++round) {
    bool changed = false;
    for (std::size_t t = 0; t < n; ++t) {
      std::uint64_t acc = closed[t];
      for (std::size_t u = 0; u < n; ++u)
        if ((closed[t] >> u) & 1U) acc |= closed[u];
      if (acc != closed[t]) {
        closed[t] = acc;
        changed = true;
      }
    }
    if (!changed) break;
  }
  for (std::size_t t = 0; t < n; ++t)
    if ((closed[t] >> t) & 1U) throw SolverError("instance '" + instance.id + "': cyclic precedence");
  return closed;
}

inline bool is_linear_extension(const OrderingInstance& instance, std::span<const std::size_t> order) {
  auto preds = predecessor_masks(instance);
  std::uint64_t placed = 0;
  for (std::size_t t : order) {
    if (t >= instance.size() || ((placed >> t) & 1U)) return false;
    if ((preds[t] & ~placed) != 0) return false;
    placed |= std::uint64_t{1} << t;
  }
  return order.size() == instance.size();
}

namespace detail {

inline OptimizationResult finish(const OrderingInstance& instance, std::vector<std::size_t> ordering,
                                 SolveMethod method, std::size_t candidates) {
  OptimizationResult r;
  r.baseline_cost = evaluate_ordering_cost(instance, instance.baseline_order());
  r.cost = evaluate_ordering_cost(instance, ordering);
  r.ordering = std::move(ordering);
  r.improvement = r.baseline_cost > 0 ? 1.0 - r.cost / r.baseline_cost : 0.0;
  r.method = method;
  r.candidates = candidates;
  return r;
}

}  // namespace detail

/// Exact optimum. The cost of a task depends only on the *set* of tasks run
/// before it, so the best completion of each downset is computed once:
///   g(S) = min over available t of cost(t) * prod_{j in S} sel(j) + g(S + t).
/// Ties resolve to the lowest task index at every step.
inline OptimizationResult optimize_exact_dp(const OrderingInstance& instance) {
  instance.check();
  const std::size_t n = instance.size();
  if (n > kMaxExactTasks)
    throw SolverError("instance '" + instance.id + "' has " + std::to_string(n) +
                      " tasks; the exact solver supports at most " + std::to_string(kMaxExactTasks));
  const auto preds = predecessor_masks(instance);
  if (n == 0) return detail::finish(instance, {}, SolveMethod::ExactDP, 1);

  const std::uint64_t full = (std::uint64_t{1} << n) - 1;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> best(full + 1, kInf);
  std::vector<std::uint8_t> choice(full + 1, 0);
  best[full] = 0.0;
  std::size_t states = 1;

  for (std::uint64_t s = full; s-- > 0;) {
    bool downset = true;
    double prefix = 1.0;
    for (std::size_t t = 0; t < n && downset; ++t) {
      if ((s >> t) & 1U) {
        downset = (preds[t] & ~s) == 0;
        prefix *= instance.selectivities[t];
      }
    }
    if (!downset) continue;
    ++states;
    double value = kInf;
    std::uint8_t pick = 0;
    for (std::size_t t = 0; t < n; ++t) {
      if (((s >> t) & 1U) || (preds[t] & ~s) != 0) continue;
      double candidate = instance.costs[t] * prefix + best[s | (std::uint64_t{1} << t)];
      if (candidate < value) {
        value = candidate;
        pick = static_cast<std::uint8_t>(t);
      }
    }
    best[s] = value;
    choice[s] = pick;
  }

  std::vector<std::size_t> ordering;
  ordering.reserve(n);
  for (std::uint64_t s = 0; s != full;) {
    std::size_t t = choice[s];
    ordering.push_back(t);
    s |= std::uint64_t{1} << t;
  }
  return detail::finish(instance, std::move(ordering), SolveMethod::ExactDP, states);
}

/// Exhaustive enumeration of all linear extensions, in lexicographic order;
/// the first optimum found wins ties.
inline OptimizationResult brute_force_oracle(const OrderingInstance& instance) {
  instance.check();
  const std::size_t n = instance.size();
  if (n > kMaxBruteForceTasks)
    throw SolverError("instance '" + instance.id + "' has " + std::to_string(n) +
                      " tasks; brute force supports at most " + std::to_string(kMaxBruteForceTasks));
  const auto preds = predecessor_masks(instance);

  std::vector<std::size_t> current;
  std::vector<std::size_t> best_order;
  double best_cost = std::numeric_limits<double>::infinity();
  std::size_t extensions = 0;

  auto recurse = [&](auto&& self, std::uint64_t placed, double total, double prefix) -> void {
    if (current.size() == n) {
      ++extensions;
      if (total < best_cost) {
        best_cost = total;
        best_order = current;
      }
      return;
    }
    for (std::size_t t = 0; t < n; ++t) {
      if (((placed >> t) & 1U) || (preds[t] & ~placed) != 0) continue;
      current.push_back(t);
      self(self, placed | (std::uint64_t{1} << t), total + instance.costs[t] * prefix,
           prefix * instance.selectivities[t]);
      current.pop_back();
    }
  };
  recurse(recurse, 0, 0.0, 1.0);
  return detail::finish(instance, std::move(best_order), SolveMethod::BruteForce, extensions);
}

namespace detail {

// Ascending rank puts cheap filters first: (sel - 1) / cost.
inline double greedy_rank(double cost, double sel) {
  if (cost > 0) return (sel - 1.0) / cost;
  if (sel < 1.0) return -std::numeric_limits<double>::infinity();
  if (sel > 1.0) return std::numeric_limits<double>::infinity();
  return 0.0;
}

inline std::vector<std::size_t> hill_climb(const OrderingInstance& instance, const std::vector<std::uint64_t>& preds,
                                           std::vector<std::size_t> order, std::size_t& evaluations) {
  double current = evaluate_ordering_cost(instance, order);
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      std::size_t a = order[i];
      std::size_t b = order[i + 1];
      if ((preds[b] >> a) & 1U) continue;
      std::swap(order[i], order[i + 1]);
      ++evaluations;
      double candidate = evaluate_ordering_cost(instance, order);
      if (candidate < current) {
        current = candidate;
        improved = true;
      } else {
        std::swap(order[i], order[i + 1]);
      }
    }
  }
  return order;
}

}  // namespace detail

/// Heuristic for instances beyond the exact solver's reach. Never worse than
/// the baseline: hill climbing runs from both the rank order and the
/// baseline order, and the cheaper local optimum is returned.
inline OptimizationResult optimize_greedy(const OrderingInstance& instance) {
  instance.check();
  const std::size_t n = instance.size();
  const auto preds = predecessor_masks(instance);

  std::vector<std::size_t> ranked;
  ranked.reserve(n);
  std::uint64_t placed = 0;
  while (ranked.size() < n) {
    std::size_t pick = n;
    double pick_rank = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      if (((placed >> t) & 1U) || (preds[t] & ~placed) != 0) continue;
      double r = detail::greedy_rank(instance.costs[t], instance.selectivities[t]);
      if (pick == n || r < pick_rank) {
        pick = t;
        pick_rank = r;
      }
    }
    ranked.push_back(pick);
    placed |= std::uint64_t{1} << pick;
  }

  std::size_t evaluations = 0;
  auto from_rank = detail::hill_climb(instance, preds, std::move(ranked), evaluations);
  if (!is_linear_extension(instance, instance.baseline_order()))
    return detail::finish(instance, std::move(from_rank), SolveMethod::Greedy, evaluations);
  auto from_baseline = detail::hill_climb(instance, preds, instance.baseline_order(), evaluations);
  auto& chosen = evaluate_ordering_cost(instance, from_baseline) < evaluate_ordering_cost(instance, from_rank)
                     ? from_baseline
                     : from_rank;
  return detail::finish(instance, std::move(chosen), SolveMethod::Greedy, evaluations);
}

inline OptimizationResult optimize(const OrderingInstance& instance, SolveMethod method) {
  switch (method) {
    case SolveMethod::ExactDP: return optimize_exact_dp(instance);
    case SolveMethod::Greedy: return optimize_greedy(instance);
    case SolveMethod::BruteForce: return brute_force_oracle(instance);
  }
  throw SolverError("unknown solver");
}

/// Maximal reorderable segments of a DAG: runs of ordinary vertices linked by
/// single edges (sole successor to sole predecessor). Dummy vertices and
/// branching points end a run, and a vertex sharing an exclusion pair with a
/// run member starts a new one. Runs of fewer than two tasks are skipped.
/// Precedence is the DAG's closed precedence restricted to each run.
inline std::vector<OrderingInstance> extract_instances(const TokenFlowDag& dag, const std::string& prefix = "") {
  auto order = topological_order(dag);
  if (!order) throw ValidationError("cannot extract instances: flow edges contain a cycle");
  const ConstraintSet closed = transitive_closure(dag.constraints());

  std::vector<std::vector<std::size_t>> runs;
  std::vector<std::size_t> run_of(dag.size(), SIZE_MAX);
  for (std::size_t v : *order) {
    const Vertex& vx = dag.vertex(v);
    if (vx.kind != VertexKind::Ordinary) continue;
    std::size_t target = SIZE_MAX;
    const auto& preds = dag.predecessors(v);
    if (preds.size() == 1) {
      std::size_t u = preds.front();
      if (run_of[u] != SIZE_MAX && dag.successors(u).size() == 1) {
        bool excluded = std::any_of(runs[run_of[u]].begin(), runs[run_of[u]].end(), [&](std::size_t m) {
          return closed.excludes(dag.vertex(m).id, vx.id);
        });
        if (!excluded) target = run_of[u];
      }
    }
    if (target == SIZE_MAX) {
      target = runs.size();
      runs.emplace_back();
    }
    runs[target].push_back(v);
    run_of[v] = target;
  }

  std::vector<OrderingInstance> out;
  for (const auto& run : runs) {
    if (run.size() < 2) continue;
    OrderingInstance inst;
    inst.id = prefix + "seg" + std::to_string(out.size());
    std::map<std::string, std::size_t> local;
    for (std::size_t v : run) {
      const Vertex& vx = dag.vertex(v);
      local.emplace(vx.id, inst.tasks.size());
      inst.tasks.push_back(vx.id);
      inst.costs.push_back(vx.cost);
      inst.selectivities.push_back(vx.selectivity);
    }
    for (const auto& [a, b] : closed.precedence) {
      auto ia = local.find(a);
      auto ib = local.find(b);
      if (ia != local.end() && ib != local.end()) inst.precedence.emplace_back(ia->second, ib->second);
    }
    out.push_back(std::move(inst));
  }
  return out;
}

/// Rewires the chain holding `instance`'s tasks into `ordering`. The tasks
/// must form a chain in the DAG in their baseline order.
inline TokenFlowDag apply_ordering(const TokenFlowDag& dag, const OrderingInstance& instance,
                                   std::span<const std::size_t> ordering) {
  if (!is_linear_extension(instance, ordering))
    throw SolverError("ordering is not a linear extension of instance '" + instance.id + "'");
  if (instance.size() < 2) return dag;
  for (std::size_t i = 0; i + 1 < instance.size(); ++i)
    if (!dag.has_edge(instance.tasks[i], instance.tasks[i + 1]))
      throw SolverError("instance '" + instance.id + "' is not a chain of the DAG");

  DagBuilder b(dag);
  const std::string& head = instance.tasks.front();
  const std::string& tail = instance.tasks.back();
  auto before = b.predecessors(head);
  auto after = b.successors(tail);
  for (const auto& p : before) b.remove_edge(p, head);
  for (const auto& s : after) b.remove_edge(tail, s);
  for (std::size_t i = 0; i + 1 < instance.size(); ++i) b.remove_edge(instance.tasks[i], instance.tasks[i + 1]);

  const std::string& new_head = instance.tasks[ordering.front()];
  const std::string& new_tail = instance.tasks[ordering.back()];
  for (const auto& p : before) b.add_edge(p, new_head);
  for (std::size_t i = 0; i + 1 < ordering.size(); ++i)
    b.add_edge(instance.tasks[ordering[i]], instance.tasks[ordering[i + 1]]);
  for (const auto& s : after) b.add_edge(new_tail, s);
  if (b.source() == head) b.set_source(new_head);
  return b.build();
}

}  // namespace bpmnopt
