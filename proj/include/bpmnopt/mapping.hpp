#pragma once

// Translation of BPMN processes into annotated token-flow DAGs.
//
// The per-construct rules (map_ordinary_task, map_loop_task, map_gateway, ...)
// are exposed individually and return small fragments; map_process stitches
// them together over the whole process graph.
//
// Dummy vertices are named <origin>#<rule>#<ordinal>, where origin is the
// BPMN element the dummy stems from. Ordinary vertices take the BPMN id.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "bpmnopt/bpmn_model.hpp"
#include "bpmnopt/dag.hpp"
#include "bpmnopt/dag_io.hpp"
#include "bpmnopt/error.hpp"
#include "bpmnopt/format.hpp"
#include "bpmnopt/stats_catalog.hpp"

namespace bpmnopt {

enum class LoopMode { DummyTask, Amortized };
enum class CompensationMode { TwoBranch, MergedWeighted };
enum class GatewayKind { Exclusive, Parallel, Inclusive };
enum class TimerCase { Barrier, Delay, Boundary };
enum class TrivialEvent { Message, Signal, Error, Multiple, Escalation, Cancel };

struct MappingOptions {
  LoopMode loop_mode = LoopMode::DummyTask;
  CompensationMode compensation_mode = CompensationMode::TwoBranch;
  bool expand_subprocesses = true;
  // Materialise message/signal events as zero-cost checkpoints.
  bool checkpoint_events = false;
  // ISO-8601 timer durations are converted to seconds, then divided by this.
  double seconds_per_time_unit = 1.0;
};

struct MappingOutcome {
  std::vector<TokenFlowDag> dags;
  std::vector<Barrier> barriers;
  std::vector<std::string> warnings;
  // Activities folded into another vertex: element id -> id of the element
  // whose vertex carries its cost (merged compensation, collapsed subprocess).
  std::map<std::string, std::string> absorbed;

  const TokenFlowDag& dag() const { return dags.front(); }
  DagDocument document() const { return {dags, barriers}; }
};

/// A piece of DAG produced by one rule. `entries` receive the tokens of the
/// preceding vertices, `exits` feed the normal continuation and
/// `event_exits` the continuation of an event branch (boundary event,
/// compensation handler).
struct Fragment {
  std::vector<Vertex> vertices;
  std::vector<VertexPair> edges;
  std::vector<std::string> entries;
  std::vector<std::string> exits;
  std::vector<std::string> event_exits;
  std::vector<VertexPair> exclusions;

  const Vertex& vertex(const std::string& id) const {
    for (const auto& v : vertices)
      if (v.id == id) return v;
    throw Error("fragment has no vertex '" + id + "'");
  }
  Vertex& vertex(const std::string& id) {
    return const_cast<Vertex&>(static_cast<const Fragment&>(*this).vertex(id));
  }
  /// The single ordinary vertex of an activity fragment.
  Vertex& ordinary() {
    for (auto& v : vertices)
      if (v.kind == VertexKind::Ordinary) return v;
    throw Error("fragment has no ordinary vertex");
  }
};

inline constexpr double kProbabilityTolerance = 1e-9;

inline std::string dummy_id(const std::string& origin, std::string_view rule, std::size_t ordinal) {
  return origin + "#" + std::string(rule) + "#" + std::to_string(ordinal);
}

inline Vertex make_dummy(VertexKind kind, const std::string& origin, std::string_view rule, std::size_t ordinal,
                         double selectivity, double cost = 0.0, bool pipelining = true) {
  Vertex v;
  v.id = dummy_id(origin, rule, ordinal);
  v.origin = origin;
  v.kind = kind;
  v.selectivity = selectivity;
  v.cost = cost;
  v.pipelining = pipelining;
  return v;
}

namespace detail {

inline void require_probability(double p, const std::string& what) {
  if (!(p >= 0.0 && p <= 1.0)) throw MappingError(what + ": probability " + format_number(p) + " outside [0,1]");
}

inline void require_loop_count(double n, const std::string& id) {
  if (!(n >= 1.0) || !std::isfinite(n))
    throw MappingError("'" + id + "': loop count " + format_number(n) + " must be at least 1");
}

inline Fragment single(Vertex v) {
  Fragment f;
  f.entries = {v.id};
  f.exits = {v.id};
  f.vertices.push_back(std::move(v));
  return f;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Activities

/// One vertex carrying the element's average cost and selectivity.
inline Vertex map_ordinary_task(const std::string& id, const StatEntry& stats) {
  Vertex v;
  v.id = id;
  v.origin = id;
  v.kind = VertexKind::Ordinary;
  v.cost = stats.cost;
  v.selectivity = stats.selectivity;
  v.pipelining = stats.pipelining;
  v.parallelizable = stats.parallelizable && stats.max_degree > 1;
  v.max_degree = v.parallelizable ? stats.max_degree : 1;
  return v;
}

/// A task executed n times on average. DummyTask mode puts a zero-cost
/// filter of selectivity n in front of the task and divides the task's
/// selectivity by n, so one token still leaves per token entering; Amortized
/// mode multiplies the cost by n instead.
inline Fragment map_loop_task(const std::string& id, double n, const StatEntry& stats, LoopMode mode) {
  detail::require_loop_count(n, id);
  Vertex task = map_ordinary_task(id, stats);
  task.parallelizable = false;
  task.max_degree = 1;
  if (mode == LoopMode::Amortized) {
    task.cost = n * stats.cost;
    return detail::single(std::move(task));
  }
  task.selectivity = stats.selectivity / n;
  Fragment f;
  Vertex fan = make_dummy(VertexKind::DummyFilter, id, "loop", 0, n);
  f.edges.emplace_back(fan.id, task.id);
  f.entries = {fan.id};
  f.exits = {task.id};
  f.vertices.push_back(std::move(fan));
  f.vertices.push_back(std::move(task));
  return f;
}

/// Same annotations as a loop; the task may additionally run with up to n
/// parallel instances unless the instances are sequential.
inline Fragment map_multi_instance_task(const std::string& id, double n, const StatEntry& stats, LoopMode mode,
                                        bool sequential = false) {
  Fragment f = map_loop_task(id, n, stats, mode);
  Vertex& task = f.ordinary();
  if (!sequential && n > 1.0) {
    task.parallelizable = true;
    task.max_degree = static_cast<int>(std::ceil(n - 1e-9));
  }
  if (mode == LoopMode::DummyTask) {
    const std::string fan = dummy_id(id, "mi", 0);
    f.vertices.front().id = fan;
    f.edges = {{fan, id}};
    f.entries = {fan};
  }
  return f;
}

/// Host task with a compensating task triggered with probability 1 - p1.
/// TwoBranch: both tasks sit on separate branches behind filters p1 and
/// 1 - p1 and must never be serialized. MergedWeighted: one vertex with the
/// probability-weighted cost; its selectivity is p1 * sel_host, plus
/// (1 - p1) * sel_comp when the compensating branch rejoins the normal flow.
inline Fragment map_compensation(const std::string& host_id, const std::string& comp_id, double p1,
                                 const StatEntry& host, const StatEntry& comp, CompensationMode mode,
                                 bool comp_rejoins = false) {
  detail::require_probability(p1, "compensation of '" + host_id + "'");
  if (mode == CompensationMode::MergedWeighted) {
    Vertex v = map_ordinary_task(host_id, host);
    v.cost = p1 * host.cost + (1.0 - p1) * comp.cost;
    v.selectivity = comp_rejoins ? p1 * host.selectivity + (1.0 - p1) * comp.selectivity : p1 * host.selectivity;
    if (!(v.selectivity > 0))
      throw MappingError("compensation of '" + host_id + "': merged selectivity is zero");
    return detail::single(std::move(v));
  }
  Fragment f;
  Vertex normal = make_dummy(VertexKind::DummyFilter, host_id, "boundary", 0, p1);
  Vertex compensating = make_dummy(VertexKind::DummyFilter, comp_id, "comp", 0, 1.0 - p1);
  Vertex h = map_ordinary_task(host_id, host);
  Vertex c = map_ordinary_task(comp_id, comp);
  f.edges = {{normal.id, h.id}, {compensating.id, c.id}};
  f.entries = {normal.id, compensating.id};
  f.exits = {h.id};
  f.event_exits = {c.id};
  f.exclusions = {{h.id, c.id}};
  f.vertices = {std::move(normal), std::move(compensating), std::move(h), std::move(c)};
  return f;
}

/// Ad-hoc subprocess: every contained task hangs directly off the preceding
/// vertex; a blocking combiner of selectivity 1/k emits one token per k.
inline Fragment map_adhoc(const std::string& origin, std::vector<Fragment> tasks) {
  if (tasks.empty()) throw MappingError("ad-hoc subprocess '" + origin + "' contains no tasks");
  Fragment f;
  Vertex combiner = make_dummy(VertexKind::DummyCombiner, origin, "adhoc", 0,
                               1.0 / static_cast<double>(tasks.size()), 0.0, false);
  for (auto& t : tasks) {
    f.vertices.insert(f.vertices.end(), t.vertices.begin(), t.vertices.end());
    f.edges.insert(f.edges.end(), t.edges.begin(), t.edges.end());
    f.entries.insert(f.entries.end(), t.entries.begin(), t.entries.end());
    f.exclusions.insert(f.exclusions.end(), t.exclusions.begin(), t.exclusions.end());
    for (const auto& x : t.exits) f.edges.emplace_back(x, combiner.id);
  }
  f.exits = {combiner.id};
  f.vertices.push_back(std::move(combiner));
  return f;
}

inline Fragment map_adhoc(const std::string& origin, const std::vector<Vertex>& tasks) {
  std::vector<Fragment> parts;
  for (const auto& t : tasks) parts.push_back(detail::single(t));
  return map_adhoc(origin, std::move(parts));
}

/// Event subprocess that runs with probability p1 while its host is active:
/// a filter p1 heads the event branch, which must not be serialized with
/// the host's tasks. Warns when the event side is not cheaper than the host.
inline Fragment map_event_subprocess(const std::string& event_id, const std::vector<std::string>& host_vertices,
                                     Fragment event_body, double p1, double host_cost, double event_cost,
                                     std::vector<std::string>* warnings = nullptr) {
  detail::require_probability(p1, "event subprocess '" + event_id + "'");
  if (warnings != nullptr && event_cost >= host_cost)
    warnings->push_back("event subprocess '" + event_id + "' costs " + format_number(event_cost) +
                        ", not less than its host's " + format_number(host_cost));
  Fragment f;
  Vertex filter = make_dummy(VertexKind::DummyFilter, event_id, "evsub", 0, p1);
  for (const auto& e : event_body.entries) f.edges.emplace_back(filter.id, e);
  f.entries = {filter.id};
  f.event_exits = event_body.exits;
  f.vertices.push_back(std::move(filter));
  for (auto& v : event_body.vertices) {
    if (v.kind == VertexKind::Ordinary)
      for (const auto& h : host_vertices) f.exclusions.emplace_back(h, v.id);
    f.vertices.push_back(std::move(v));
  }
  f.edges.insert(f.edges.end(), event_body.edges.begin(), event_body.edges.end());
  f.exclusions.insert(f.exclusions.end(), event_body.exclusions.begin(), event_body.exclusions.end());
  return f;
}

// ---------------------------------------------------------------------------
// Gateways

struct GatewayMapping {
  std::vector<std::optional<Vertex>> filters;  // one per branch; nullopt when elided
  std::optional<Vertex> combiner;
};

/// Split-side filters of a gateway. Exclusive branch probabilities must sum
/// to 1; inclusive activation selectivities may sum to more. Parallel
/// branches need no filter.
inline std::vector<std::optional<Vertex>> gateway_filters(GatewayKind kind, const std::string& split_id,
                                                          std::span<const double> branch_values) {
  std::vector<std::optional<Vertex>> out;
  if (kind == GatewayKind::Parallel) {
    out.resize(branch_values.size());
    return out;
  }
  double sum = 0.0;
  for (double p : branch_values) {
    detail::require_probability(p, "gateway '" + split_id + "'");
    sum += p;
  }
  if (kind == GatewayKind::Exclusive && std::abs(sum - 1.0) > kProbabilityTolerance)
    throw MappingError("exclusive gateway '" + split_id + "': branch probabilities sum to " + format_number(sum) +
                       ", expected 1");
  if (kind == GatewayKind::Inclusive && !(sum > 0))
    throw MappingError("inclusive gateway '" + split_id + "': activation selectivities sum to zero");
  const std::string_view rule = kind == GatewayKind::Exclusive ? "xor" : "or";
  for (std::size_t i = 0; i < branch_values.size(); ++i)
    out.emplace_back(make_dummy(VertexKind::DummyFilter, split_id, rule, i, branch_values[i]));
  return out;
}

/// Join-side combiner. `branch_total` is the branch count for parallel
/// gateways and the sum of activation selectivities for inclusive ones.
inline Vertex gateway_combiner(GatewayKind kind, const std::string& join_id, double branch_total) {
  switch (kind) {
    case GatewayKind::Exclusive:
      return make_dummy(VertexKind::DummyCombiner, join_id, "join", 0, 1.0, 0.0, true);
    case GatewayKind::Parallel:
    case GatewayKind::Inclusive:
      if (!(branch_total > 0)) throw MappingError("gateway '" + join_id + "': empty join");
      return make_dummy(VertexKind::DummyCombiner, join_id, "join", 0, 1.0 / branch_total, 0.0, false);
  }
  throw MappingError("unknown gateway kind");
}

inline GatewayMapping map_gateway(GatewayKind kind, const std::string& split_id, const std::string& join_id,
                                  std::span<const double> branch_values, std::size_t k, bool with_combiner = true) {
  GatewayMapping g;
  if (kind == GatewayKind::Parallel) {
    g.filters.resize(k);
    g.combiner = gateway_combiner(kind, join_id, static_cast<double>(k));
    return g;
  }
  if (branch_values.size() != k)
    throw MappingError("gateway '" + split_id + "': expected " + std::to_string(k) + " branch values");
  g.filters = gateway_filters(kind, split_id, branch_values);
  double total = 0.0;
  for (double v : branch_values) total += v;
  if (kind == GatewayKind::Inclusive || with_combiner) g.combiner = gateway_combiner(kind, join_id, total);
  return g;
}

/// Cycle formed by gateways, unrolled into a sequence: the loop-path
/// vertices either have their cost multiplied by n (Amortized) or are
/// bracketed by filters of selectivity n and 1/n (DummyTask).
inline Fragment map_gateway_loop(const std::string& origin, std::vector<Vertex> body, double n, LoopMode mode) {
  detail::require_loop_count(n, origin);
  Fragment f;
  if (mode == LoopMode::Amortized) {
    for (auto& v : body) v.cost *= n;
  } else {
    f.vertices.push_back(make_dummy(VertexKind::DummyFilter, origin, "gwloop", 0, n));
  }
  for (auto& v : body) f.vertices.push_back(std::move(v));
  if (mode == LoopMode::DummyTask)
    f.vertices.push_back(make_dummy(VertexKind::DummyFilter, origin, "gwloop", 1, 1.0 / n));
  for (std::size_t i = 0; i + 1 < f.vertices.size(); ++i) f.edges.emplace_back(f.vertices[i].id, f.vertices[i + 1].id);
  if (!f.vertices.empty()) {
    f.entries = {f.vertices.front().id};
    f.exits = {f.vertices.back().id};
  }
  return f;
}

// ---------------------------------------------------------------------------
// Events

/// Boundary event on `host`. p1 is the probability that the host completes
/// normally; the event branch starts with a delay dummy of selectivity 1 - p1
/// charged with the time the host ran before the interruption. For a
/// non-interrupting event the normal-path filter follows the host instead of
/// preceding it.
inline Fragment map_boundary_event(const Vertex& host, const std::string& event_id, bool interrupting, double p1,
                                   double elapsed) {
  detail::require_probability(p1, "boundary event '" + event_id + "'");
  if (!(elapsed >= 0)) throw MappingError("boundary event '" + event_id + "': negative elapsed cost");
  Fragment f;
  Vertex normal = make_dummy(VertexKind::DummyFilter, host.id, "boundary", interrupting ? 0 : 1, p1);
  Vertex event = make_dummy(VertexKind::DummyDelay, event_id, "boundary", 0, 1.0 - p1, elapsed);
  if (interrupting) {
    f.edges = {{normal.id, host.id}};
    f.entries = {normal.id, event.id};
    f.exits = {host.id};
  } else {
    f.edges = {{host.id, normal.id}};
    f.entries = {host.id, event.id};
    f.exits = {normal.id};
  }
  f.event_exits = {event.id};
  f.vertices = {std::move(normal), host, std::move(event)};
  return f;
}

struct BarrierMarker {
  std::string event;
};

/// Fixed-time timers cut the process (Barrier); relative timers become a
/// delay dummy charged with the waiting time. Boundary timers go through
/// map_timer_boundary.
inline std::variant<Vertex, BarrierMarker> map_timer_event(TimerCase timer, const std::string& id, double duration) {
  switch (timer) {
    case TimerCase::Barrier:
      return BarrierMarker{id};
    case TimerCase::Delay:
      if (!(duration >= 0)) throw MappingError("timer '" + id + "': negative duration");
      return make_dummy(VertexKind::DummyDelay, id, "timer", 0, 1.0, duration);
    case TimerCase::Boundary:
      throw MappingError("timer '" + id + "': boundary timers are mapped with map_timer_boundary");
  }
  throw MappingError("unknown timer case");
}

/// Timer attached to a task. The host's cost must be its average cost when
/// the timer does not fire; the event branch is charged the timeout.
inline Fragment map_timer_boundary(const Vertex& host, const std::string& event_id, bool interrupting, double p1,
                                   double timeout) {
  if (!(timeout >= 0)) throw MappingError("timer '" + event_id + "': negative duration");
  return map_boundary_event(host, event_id, interrupting, p1, timeout);
}

/// Task terminated by a terminate end event with probability 1 - p1 after c2
/// time units: cost p1*c1 + (1-p1)*c2. When termination ends the enclosing
/// process, only the surviving fraction p1 of tokens continues.
inline Vertex map_termination(Vertex affected, double p1, double c2, bool ends_process) {
  detail::require_probability(p1, "termination of '" + affected.id + "'");
  if (!(c2 >= 0)) throw MappingError("termination of '" + affected.id + "': negative elapsed cost");
  affected.cost = p1 * affected.cost + (1.0 - p1) * c2;
  if (ends_process) {
    if (!(p1 > 0)) throw MappingError("termination of '" + affected.id + "': task never completes");
    affected.selectivity *= p1;
  }
  return affected;
}

/// Conditional event: a delay dummy charged with the average waiting time;
/// a selectivity below 1 models conditions that are never met.
inline Vertex map_conditional_event(const std::string& id, double wait, double selectivity) {
  if (!(wait >= 0)) throw MappingError("conditional event '" + id + "': negative waiting time");
  if (!(selectivity > 0 && selectivity <= 1))
    throw MappingError("conditional event '" + id + "': selectivity must be in (0,1]");
  return make_dummy(VertexKind::DummyDelay, id, "cond", 0, selectivity, wait);
}

/// Events without a cost of their own. Message and signal events vanish
/// unless checkpoints are requested; a multiple event only matters when it
/// changes selectivity; error and escalation are omitted; cancel events act
/// through apply_cancel_multiplier on the following transaction.
inline std::optional<Vertex> map_trivial_event(TrivialEvent kind, const std::string& id, bool checkpoint = false,
                                               double selectivity = 1.0) {
  switch (kind) {
    case TrivialEvent::Message:
    case TrivialEvent::Signal:
      if (!checkpoint) return std::nullopt;
      return make_dummy(VertexKind::DummyFilter, id, "msg", 0, 1.0);
    case TrivialEvent::Multiple:
      if (selectivity == 1.0) return std::nullopt;
      if (!(selectivity > 0)) throw MappingError("event '" + id + "': selectivity must be positive");
      return make_dummy(VertexKind::DummyFilter, id, "multi", 0, selectivity);
    case TrivialEvent::Error:
    case TrivialEvent::Escalation:
    case TrivialEvent::Cancel:
      return std::nullopt;
  }
  return std::nullopt;
}

inline void apply_cancel_multiplier(Vertex& transaction, double multiplier) {
  if (!(multiplier > 0)) throw MappingError("cancel multiplier for '" + transaction.id + "' must be positive");
  transaction.selectivity *= multiplier;
}

/// ISO-8601 duration (PnYnMnWnDTnHnMnS) in seconds; years and months count
/// as 365 and 30 days.
inline std::optional<double> parse_iso_duration(std::string_view text) {
  std::size_t i = 0;
  auto skip_space = [&] {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  };
  skip_space();
  if (i >= text.size() || text[i] != 'P') return std::nullopt;
  ++i;
  bool time_part = false;
  bool any = false;
  double seconds = 0.0;
  while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) {
    if (text[i] == 'T') {
      time_part = true;
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < text.size() && (std::isdigit(static_cast<unsigned char>(text[i])) || text[i] == '.' || text[i] == ','))
      ++i;
    if (start == i || i >= text.size()) return std::nullopt;
    std::string number(text.substr(start, i - start));
    std::replace(number.begin(), number.end(), ',', '.');
    double value = 0.0;
    try {
      value = std::stod(number);
    } catch (...) {
      return std::nullopt;
    }
    char unit = text[i++];
    double scale = 0.0;
    if (!time_part) {
      if (unit == 'Y') scale = 365.0 * 86400.0;
      else if (unit == 'M') scale = 30.0 * 86400.0;
      else if (unit == 'W') scale = 7.0 * 86400.0;
      else if (unit == 'D') scale = 86400.0;
      else return std::nullopt;
    } else {
      if (unit == 'H') scale = 3600.0;
      else if (unit == 'M') scale = 60.0;
      else if (unit == 'S') scale = 1.0;
      else return std::nullopt;
    }
    seconds += value * scale;
    any = true;
  }
  skip_space();
  if (!any || i != text.size()) return std::nullopt;
  return seconds;
}

// ---------------------------------------------------------------------------
// Whole-process mapping

namespace detail {

class Mapper {
 public:
  Mapper(const BpmnProcess& process, const StatsCatalog& stats, const MappingOptions& opts)
      : process_(process), stats_(stats), opts_(opts), index_(process) {
    out_.warnings = process.warnings;
  }

  MappingOutcome run() {
    index_compensation();
    root_ = add_node("#root", Role::Root, nullptr, "");
    build_scope("", process_.nodes, root_, std::nullopt);
    find_loops();
    termination_prepass();
    cancel_prepass();
    evaluate();
    add_exclusive_group_constraints();
    add_event_subprocess_constraints();
    add_declared_constraints();
    elide_roots();
    partition();
    check_coverage();
    return std::move(out_);
  }

 private:
  enum class Role { Root, Activity, AdHoc, SubIn, SubOut, EventSubIn, Gateway, Event, Boundary, CompHandler };

  struct WNode {
    std::string key;
    Role role;
    const FlowNode* node;
    std::string scope;
    std::vector<std::size_t> in;
    std::vector<std::size_t> out;
  };

  struct WEdge {
    std::size_t from;
    std::size_t to;
    std::string flow;    // sequence flow id, empty for structural edges
    std::string target;  // BPMN id of the flow target
    bool back = false;
  };

  struct BoundarySpec {
    std::string event;
    bool interrupting = true;
    double probability = 0.0;  // of the event firing
    double elapsed = 0.0;
    std::string handler;  // compensation handler, empty otherwise
  };

  struct Root {
    std::string vertex;
    std::string event;  // barrier event, empty for the process root
    std::vector<std::string> upstream;
  };

  // --- stats helpers -------------------------------------------------------

  const PartialStatEntry* explicit_entry(const std::string& id) const { return stats_.explicit_entry(id); }

  template <typename T>
  std::optional<T> explicit_field(const std::string& id, std::optional<T> PartialStatEntry::*field) const {
    const PartialStatEntry* e = explicit_entry(id);
    if (e == nullptr) return std::nullopt;
    return e->*field;
  }

  std::string next_dummy(const std::string& origin, std::string_view rule) {
    std::size_t& counter = ordinals_[origin + "#" + std::string(rule)];
    return dummy_id(origin, rule, counter++);
  }

  Vertex dummy(VertexKind kind, const std::string& origin, std::string_view rule, double sel, double cost = 0.0,
               bool pipelining = true) {
    Vertex v;
    v.id = next_dummy(origin, rule);
    v.origin = origin;
    v.kind = kind;
    v.selectivity = sel;
    v.cost = cost;
    v.pipelining = pipelining;
    return v;
  }

  // Claims the ordinal of a rule-produced dummy so later dummies of the
  // same origin and rule get fresh ids.
  void reserve(const Vertex& v) {
    auto first = v.id.find('#');
    auto second = v.id.find('#', first + 1);
    if (first == std::string::npos || second == std::string::npos) return;
    std::string key = v.id.substr(0, second);
    std::size_t ordinal = std::stoul(v.id.substr(second + 1));
    std::size_t& counter = ordinals_[key];
    counter = std::max(counter, ordinal + 1);
  }

  std::string add_vertex(Vertex v) {
    reserve(v);
    std::string id = v.id;
    builder_.add_vertex(std::move(v));
    return id;
  }

  void connect(const std::vector<std::string>& from, const std::string& to) {
    for (const auto& f : from) builder_.add_edge(f, to);
  }

  // Inserts a fragment, feeding its entries from `upstream`.
  void attach(Fragment& f, const std::vector<std::string>& upstream) {
    for (auto& v : f.vertices) add_vertex(v);
    for (const auto& [a, b] : f.edges) builder_.add_edge(a, b);
    for (const auto& e : f.entries) connect(upstream, e);
    for (auto& [a, b] : f.exclusions) builder_.constraints().add_exclusion(a, b);
  }

  // --- work graph ---------------------------------------------------------

  std::size_t add_node(std::string key, Role role, const FlowNode* node, std::string scope) {
    nodes_.push_back({std::move(key), role, node, std::move(scope), {}, {}});
    return nodes_.size() - 1;
  }

  void add_edge(std::size_t from, std::size_t to, std::string flow = "", std::string target = "") {
    edges_.push_back({from, to, std::move(flow), std::move(target)});
    nodes_[from].out.push_back(edges_.size() - 1);
    nodes_[to].in.push_back(edges_.size() - 1);
  }

  std::size_t in_node(const std::string& id) const { return in_node_.at(id); }
  std::size_t out_node(const std::string& id) const { return out_node_.at(id); }

  void absorb_descendants(const FlowNode& container, const std::string& into) {
    for (const auto& c : container.children) {
      if (is_activity_kind(c.kind) && !has_children(c)) out_.absorbed[c.id] = into;
      absorb_descendants(c, into);
    }
  }

  static bool has_children(const FlowNode& n) { return !n.children.empty(); }

  bool expands(const FlowNode& n) const {
    return n.kind == NodeKind::SubProcess && has_children(n) && opts_.expand_subprocesses;
  }

  static bool is_comp_handler(const FlowNode& n) {
    return is_activity_kind(n.kind) && n.attribute("is_for_compensation") == "true";
  }

  // Nodes that take part in a scope's normal sequence flow.
  bool in_main_flow(const FlowNode& n) const {
    return n.kind != NodeKind::BoundaryEvent && n.kind != NodeKind::EventSubProcess &&
           n.kind != NodeKind::CompensationAssociation && !is_comp_handler(n);
  }

  void index_compensation() {
    for (const auto& id : index_.ids()) {
      const FlowNode& n = index_.at(id);
      if (n.kind != NodeKind::CompensationAssociation) continue;
      std::string event = n.attribute("source").value_or("");
      std::string handler = n.attribute("target").value_or("");
      comp_handler_of_event_[event] = handler;
      comp_host_of_handler_[handler] = n.attribute("host").value_or("");
    }
  }

  void build_scope(const std::string& scope, const std::vector<FlowNode>& children, std::size_t entry,
                   std::optional<std::size_t> exit) {
    for (const auto& c : children) {
      if (c.kind == NodeKind::CompensationAssociation) continue;
      if (is_comp_handler(c)) {
        std::size_t w = add_node(c.id, Role::CompHandler, &c, scope);
        in_node_[c.id] = out_node_[c.id] = w;
        if (!comp_host_of_handler_.count(c.id)) {
          out_.warnings.push_back("compensation handler '" + c.id + "' has no association and is not mapped");
          out_.absorbed[c.id] = "";
        }
        continue;
      }
      if (expands(c)) {
        std::size_t in = add_node(c.id + "/in", Role::SubIn, &c, scope);
        std::size_t out = add_node(c.id + "/out", Role::SubOut, &c, scope);
        in_node_[c.id] = in;
        out_node_[c.id] = out;
        build_scope(c.id, c.children, in, out);
        continue;
      }
      if (c.kind == NodeKind::EventSubProcess) {
        if (!has_children(c)) {
          out_.warnings.push_back("empty event subprocess '" + c.id + "' ignored");
          continue;
        }
        std::size_t in = add_node(c.id + "/in", Role::EventSubIn, &c, scope);
        in_node_[c.id] = out_node_[c.id] = in;
        add_edge(entry, in);
        build_scope(c.id, c.children, in, std::nullopt);
        continue;
      }
      Role role = Role::Event;
      if (c.kind == NodeKind::AdHocSubProcess && adhoc_tasks(c).size() > 0) {
        role = Role::AdHoc;
      } else if (is_activity_kind(c.kind)) {
        role = Role::Activity;
        if (is_subprocess_kind(c.kind)) absorb_descendants(c, c.id);
      } else if (is_gateway_kind(c.kind)) {
        role = Role::Gateway;
      } else if (c.kind == NodeKind::BoundaryEvent) {
        role = Role::Boundary;
      }
      std::size_t w = add_node(c.id, role, &c, scope);
      in_node_[c.id] = out_node_[c.id] = w;
    }

    for (const auto& flow : process_.flows) {
      if (index_.parent(flow.source) != scope) continue;
      if (!in_node_.count(flow.source) || !in_node_.count(flow.target)) continue;
      add_edge(out_node(flow.source), in_node(flow.target), flow.id, flow.target);
    }

    for (const auto& c : children) {
      if (!in_node_.count(c.id)) continue;
      if (c.kind == NodeKind::BoundaryEvent) {
        const std::string& host = c.attribute("attached_to").value();
        if (in_node_.count(host)) add_edge(in_node(host), in_node(c.id));
        continue;
      }
      if (is_comp_handler(c)) {
        auto host = comp_host_of_handler_.find(c.id);
        if (host != comp_host_of_handler_.end() && in_node_.count(host->second))
          add_edge(in_node(host->second), in_node(c.id));
        continue;
      }
      if (!in_main_flow(c)) continue;
      if (index_.incoming(c.id).empty()) add_edge(entry, in_node(c.id));
      if (exit && index_.outgoing(c.id).empty()) add_edge(out_node(c.id), *exit);
    }
    // An interrupted path inside an expanded subprocess completes it.
    if (exit) {
      for (const auto& c : children)
        if (c.kind == NodeKind::BoundaryEvent && in_node_.count(c.id) && index_.outgoing(c.id).empty() &&
            c.attribute("trigger") != "compensate")
          add_edge(in_node(c.id), *exit);
    }
  }

  static std::vector<const FlowNode*> adhoc_tasks(const FlowNode& adhoc) {
    std::vector<const FlowNode*> out;
    for (const auto& c : adhoc.children)
      if (is_activity_kind(c.kind) && !is_comp_handler(c)) out.push_back(&c);
    return out;
  }

  // --- loops ---------------------------------------------------------------

  std::string bpmn_id(std::size_t w) const { return nodes_[w].node ? nodes_[w].node->id : nodes_[w].key; }

  std::optional<double> branch_value(const WEdge& e) const {
    if (!e.flow.empty())
      if (auto p = explicit_field(e.flow, &PartialStatEntry::branch_probability)) return p;
    if (!e.target.empty())
      if (auto p = explicit_field(e.target, &PartialStatEntry::branch_probability)) return p;
    return std::nullopt;
  }

  double loop_count_for(std::size_t split, std::size_t join, const WEdge& back) const {
    for (std::size_t w : {split, join}) {
      if (auto n = explicit_field(bpmn_id(w), &PartialStatEntry::loop_count)) return *n;
    }
    if (!back.flow.empty())
      if (auto b = explicit_field(back.flow, &PartialStatEntry::branch_probability))
        if (*b < 1.0) return 1.0 / (1.0 - *b);
    throw MappingError("loop from '" + bpmn_id(split) + "' back to '" + bpmn_id(join) +
                       "' needs a loop_count (or a branch_probability on the returning flow)");
  }

  void register_loop(std::size_t entry, std::size_t exit, double n) {
    require_loop_count(n, bpmn_id(entry));
    // Body: everything reachable from the entry without passing the exit.
    std::set<std::size_t> body{entry};
    std::deque<std::size_t> queue{entry};
    while (!queue.empty()) {
      std::size_t w = queue.front();
      queue.pop_front();
      if (w == exit) continue;
      for (std::size_t e : nodes_[w].out) {
        if (edges_[e].back) continue;
        if (body.insert(edges_[e].to).second) queue.push_back(edges_[e].to);
      }
    }
    if (opts_.loop_mode == LoopMode::Amortized) {
      for (std::size_t w : body) amortization_[w] *= n;
    } else {
      loop_entry_[entry].push_back(n);
      loop_exit_[exit].push_back(n);
    }
  }

  void find_loops() {
    for (std::size_t w = 0; w < nodes_.size(); ++w) amortization_[w] = 1.0;
    // Iterative DFS from the root; an edge into a node on the stack closes a loop.
    std::vector<int> state(nodes_.size(), 0);  // 0 new, 1 on stack, 2 done
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root_, 0}};
    state[root_] = 1;
    std::vector<std::size_t> back;
    while (!stack.empty()) {
      auto& [w, next] = stack.back();
      if (next < nodes_[w].out.size()) {
        std::size_t e = nodes_[w].out[next++];
        std::size_t to = edges_[e].to;
        if (state[to] == 1) {
          edges_[e].back = true;
          back.push_back(e);
        } else if (state[to] == 0) {
          state[to] = 1;
          stack.emplace_back(to, 0);
        }
      } else {
        state[w] = 2;
        stack.pop_back();
      }
    }
    for (std::size_t e : back) {
      const WEdge& edge = edges_[e];
      if (edge.from == edge.to) continue;
      register_loop(edge.to, edge.from, loop_count_for(edge.from, edge.to, edge));
    }
    // Loop markers on expanded subprocesses.
    for (std::size_t w = 0; w < nodes_.size(); ++w) {
      if (nodes_[w].role != Role::SubIn) continue;
      const FlowNode& s = *nodes_[w].node;
      auto loop = s.attribute("loop");
      if (!loop) continue;
      if (*loop == "multi")
        out_.warnings.push_back("multi-instance subprocess '" + s.id + "' expanded as a loop; parallelism not tracked");
      double n = explicit_field(s.id, &PartialStatEntry::loop_count).value_or(0.0);
      if (n == 0.0) throw MappingError("loop subprocess '" + s.id + "' needs a loop_count");
      register_loop(w, out_node(s.id), n);
    }
  }

  // --- pre-passes ------------------------------------------------------------

  bool mapped(const std::string& id) const { return in_node_.count(id) != 0; }

  // Terminate end events cut concurrently running branches short.
  void termination_prepass() {
    for (const auto& id : index_.ids()) {
      const FlowNode& ev = index_.at(id);
      if (ev.kind != NodeKind::TerminateEvent || !mapped(id)) continue;
      std::string x = id;
      double reach = 1.0;
      bool derivable = true;
      const SequenceFlow* branch = nullptr;
      std::string split;
      for (;;) {
        const auto& inc = index_.incoming(x);
        if (inc.size() != 1) break;
        const SequenceFlow* f = inc.front();
        const FlowNode& y = index_.at(f->source);
        if (is_gateway_kind(y.kind) && index_.outgoing(y.id).size() > 1) {
          if (y.kind != NodeKind::ExclusiveGateway) {
            branch = f;
            split = y.id;
            break;
          }
          WEdge probe{0, 0, f->id, f->target};
          if (auto p = branch_value(probe)) reach *= *p;
          else derivable = false;
        }
        x = y.id;
      }
      if (branch == nullptr) continue;
      double q;
      if (auto explicit_q = explicit_field(id, &PartialStatEntry::branch_probability)) {
        q = *explicit_q;
      } else if (derivable) {
        q = reach;
      } else {
        throw MappingError("terminate event '" + id + "' needs a branch_probability");
      }
      // Reach along flows; with `stop_at_tasks` the walk ends at the first
      // activity of each path, the task running when termination strikes.
      auto forward = [&](const std::string& start, bool stop_at_tasks) {
        std::set<std::string> seen{start};
        std::deque<std::string> queue{start};
        while (!queue.empty()) {
          std::string v = queue.front();
          queue.pop_front();
          if (stop_at_tasks && is_activity_kind(index_.at(v).kind)) continue;
          for (const auto* f : index_.outgoing(v))
            if (seen.insert(f->target).second) queue.push_back(f->target);
        }
        return seen;
      };
      auto own = forward(branch->target, false);
      for (const auto* f : index_.outgoing(split)) {
        if (f == branch) continue;
        for (const auto& a : forward(f->target, true)) {
          if (own.count(a) || !is_activity_kind(index_.at(a).kind)) continue;
          auto [it, inserted] = termination_.emplace(a, 1.0 - q);
          if (!inserted) it->second *= 1.0 - q;
        }
      }
    }
  }

  // Cancel events scale the selectivity of the transaction that follows.
  void cancel_prepass() {
    for (const auto& id : index_.ids()) {
      const FlowNode& ev = index_.at(id);
      if (ev.kind != NodeKind::CancelEvent || !mapped(id)) continue;
      auto m = explicit_field(id, &PartialStatEntry::selectivity);
      if (!m) {
        out_.warnings.push_back("cancel event '" + id + "' has no selectivity multiplier; ignored");
        continue;
      }
      std::vector<std::string> starts;
      for (const auto* f : index_.outgoing(id)) starts.push_back(f->target);
      if (starts.empty() && !index_.parent(id).empty())
        for (const auto* f : index_.outgoing(index_.parent(id))) starts.push_back(f->target);
      std::set<std::string> seen;
      std::deque<std::string> queue(starts.begin(), starts.end());
      while (!queue.empty()) {
        std::string v = queue.front();
        queue.pop_front();
        if (!seen.insert(v).second) continue;
        if (is_activity_kind(index_.at(v).kind)) {
          auto [it, inserted] = cancel_multiplier_.emplace(v, *m);
          if (!inserted) it->second *= *m;
          continue;
        }
        for (const auto* f : index_.outgoing(v)) queue.push_back(f->target);
      }
    }
  }

  // --- evaluation ------------------------------------------------------------

  std::vector<std::size_t> work_order() const {
    std::vector<std::size_t> indegree(nodes_.size(), 0);
    for (const auto& e : edges_)
      if (!e.back) ++indegree[e.to];
    std::set<std::size_t> ready;
    for (std::size_t w = 0; w < nodes_.size(); ++w)
      if (indegree[w] == 0) ready.insert(w);
    std::vector<std::size_t> order;
    while (!ready.empty()) {
      std::size_t w = *ready.begin();
      ready.erase(ready.begin());
      order.push_back(w);
      for (std::size_t e : nodes_[w].out) {
        if (edges_[e].back) continue;
        if (--indegree[edges_[e].to] == 0) ready.insert(edges_[e].to);
      }
    }
    return order;
  }

  std::vector<std::size_t> forward_edges(const std::vector<std::size_t>& list) const {
    std::vector<std::size_t> out;
    for (std::size_t e : list)
      if (!edges_[e].back) out.push_back(e);
    return out;
  }

  std::vector<std::string> gather(std::size_t w) const {
    std::vector<std::string> up;
    for (std::size_t e : forward_edges(nodes_[w].in))
      for (const auto& v : port_[e])
        if (std::find(up.begin(), up.end(), v) == up.end()) up.push_back(v);
    return up;
  }

  void set_ports(std::size_t w, const std::vector<std::string>& vertices) {
    for (std::size_t e : forward_edges(nodes_[w].out)) port_[e] = vertices;
  }

  void evaluate() {
    port_.assign(edges_.size(), {});
    for (std::size_t w : work_order()) {
      std::vector<std::string> up = gather(w);
      for (double n : loop_exit_[w]) {
        std::string f = add_vertex(dummy(VertexKind::DummyFilter, bpmn_id(w), "gwloop", 1.0 / n));
        connect(up, f);
        up = {f};
      }
      switch (nodes_[w].role) {
        case Role::Root: {
          std::string r = add_vertex(dummy(VertexKind::DummyFilter, process_.id.empty() ? "process" : process_.id,
                                           "source", 1.0));
          roots_.push_back({r, "", {}});
          set_ports(w, {r});
          break;
        }
        case Role::Activity:
        case Role::AdHoc:
          evaluate_activity(w, up);
          break;
        case Role::CompHandler:
          evaluate_comp_handler(w);
          break;
        case Role::SubIn:
          set_ports(w, pre_boundaries(w, nodes_[w].node->id, up));
          break;
        case Role::SubOut:
          set_ports(w, post_boundaries(nodes_[w].node->id, up));
          break;
        case Role::EventSubIn:
          evaluate_event_subprocess(w, up);
          break;
        case Role::Gateway:
          evaluate_gateway(w, up);
          break;
        case Role::Boundary:
          set_ports(w, stash_[nodes_[w].node->id]);
          break;
        case Role::Event:
          evaluate_event(w, up);
          break;
      }
      for (double n : loop_entry_[w]) {
        for (std::size_t e : forward_edges(nodes_[w].out)) {
          const Role target = nodes_[edges_[e].to].role;
          if (port_[e].empty() || target == Role::Boundary || target == Role::CompHandler) continue;
          std::string f = add_vertex(dummy(VertexKind::DummyFilter, bpmn_id(w), "gwloop", n));
          connect(port_[e], f);
          port_[e] = {f};
        }
      }
    }
  }

  double amortization(std::size_t w) const { return amortization_.at(w); }

  // Core vertices of one activity, before boundary events are attached.
  Fragment activity_core(const FlowNode& node, double amort) {
    const StatEntry stats = resolve_entry(stats_, node.id);
    Fragment core;
    auto loop = node.attribute("loop");
    bool collapsed_container = is_subprocess_kind(node.kind) || node.kind == NodeKind::CallActivity;
    if (node.kind == NodeKind::LoopTask || (collapsed_container && loop == "standard")) {
      auto n = stats.loop_count;
      if (!n) throw MappingError("loop task '" + node.id + "' needs a loop_count");
      core = map_loop_task(node.id, *n, stats, opts_.loop_mode);
    } else if (node.kind == NodeKind::MultiInstanceTask || (collapsed_container && loop == "multi")) {
      std::optional<double> n = stats.loop_count;
      if (!n)
        if (auto card = node.attribute("loop_cardinality")) {
          try {
            std::size_t used = 0;
            double v = std::stod(*card, &used);
            if (used == card->size()) n = v;
          } catch (...) {
          }
        }
      if (!n) throw MappingError("multi-instance task '" + node.id + "' needs a loop_count");
      core = map_multi_instance_task(node.id, *n, stats, opts_.loop_mode, node.attribute("is_sequential") == "true");
    } else {
      core = single(map_ordinary_task(node.id, stats));
    }
    for (auto& v : core.vertices) v.cost *= amort;

    Vertex& task = core.ordinary();
    if (auto t = termination_.find(node.id); t != termination_.end()) {
      auto c2 = explicit_field(node.id, &PartialStatEntry::interrupted_cost);
      if (!c2)
        throw MappingError("task '" + node.id + "' may be terminated but has no interrupted_cost");
      task = map_termination(task, t->second, *c2 * amort, true);
    }
    if (auto m = cancel_multiplier_.find(node.id); m != cancel_multiplier_.end())
      apply_cancel_multiplier(task, m->second);
    return core;
  }

  const std::vector<BoundarySpec>& boundary_specs(const std::string& host) {
    auto cached = specs_.find(host);
    if (cached != specs_.end()) return cached->second;
    std::vector<BoundarySpec> specs;
    auto attachments = index_.boundaries_of(host);
    const bool single = attachments.size() == 1;
    for (const auto* b : attachments) {
      const FlowNode& ev = index_.at(b->event);
      BoundarySpec s;
      s.event = b->event;
      s.interrupting = b->interrupting;
      std::string trigger = ev.attribute("trigger").value_or("none");
      if (trigger == "compensate") {
        auto h = comp_handler_of_event_.find(b->event);
        if (h == comp_handler_of_event_.end()) {
          out_.warnings.push_back("compensation event '" + b->event + "' has no handler; ignored");
          continue;
        }
        s.handler = h->second;
        s.interrupting = true;
      }
      if (auto q = explicit_field(b->event, &PartialStatEntry::branch_probability)) {
        s.probability = *q;
      } else if (auto p1 = explicit_field(host, &PartialStatEntry::branch_probability); p1 && single) {
        s.probability = 1.0 - *p1;
      } else {
        throw MappingError("boundary event '" + b->event + "' needs a branch_probability (or its host '" + host +
                           "' one, when it is the only boundary event)");
      }
      require_probability(s.probability, "boundary event '" + b->event + "'");
      if (s.handler.empty()) s.elapsed = boundary_elapsed(ev, host, single);
      specs.push_back(std::move(s));
    }
    return specs_.emplace(host, std::move(specs)).first->second;
  }

  double timer_duration(const FlowNode& ev) const {
    if (auto d = explicit_field(ev.id, &PartialStatEntry::wait_duration)) return *d;
    if (ev.attribute("timer_type") == "duration")
      if (auto s = parse_iso_duration(ev.attribute("timer_value").value_or("")))
        return *s / opts_.seconds_per_time_unit;
    throw MappingError("timer '" + ev.id + "' needs a wait_duration (or an ISO-8601 timeDuration)");
  }

  double boundary_elapsed(const FlowNode& ev, const std::string& host, bool single) {
    if (ev.attribute("trigger") == "timer") return timer_duration(ev);
    if (auto c = explicit_field(ev.id, &PartialStatEntry::interrupted_cost)) return *c;
    if (single)
      if (auto c = explicit_field(host, &PartialStatEntry::interrupted_cost)) return *c;
    out_.warnings.push_back("boundary event '" + ev.id + "' has no interrupted_cost; event branch charged 0");
    return 0.0;
  }

  bool merged_compensation(const BoundarySpec& s) const {
    return !s.handler.empty() && opts_.compensation_mode == CompensationMode::MergedWeighted;
  }

  // Rejoin test for merged compensation: the handler continues exactly where
  // the host does. Returns nullopt when the merged form does not apply.
  std::optional<bool> handler_rejoins(const std::string& host, const std::string& handler) const {
    const auto& h_out = index_.outgoing(handler);
    if (h_out.empty()) return false;
    std::set<std::string> a;
    std::set<std::string> b;
    for (const auto* f : h_out) a.insert(f->target);
    for (const auto* f : index_.outgoing(host)) b.insert(f->target);
    if (a == b) return true;
    return std::nullopt;
  }

  std::vector<std::string> pre_boundaries(std::size_t w, const std::string& host, const std::vector<std::string>& up) {
    const auto& specs = boundary_specs(host);
    const double amort = amortization(w);
    double normal_share = 1.0;
    bool need_filter = false;
    for (const auto& s : specs) {
      if (!s.interrupting || skip_spec_.count(s.event)) continue;
      normal_share -= s.probability;
      need_filter = true;
    }
    if (normal_share < -kProbabilityTolerance)
      throw MappingError("boundary events of '" + host + "' have probabilities summing above 1");
    normal_share = std::max(0.0, normal_share);

    std::vector<std::string> group;
    std::vector<std::string> result = up;
    if (need_filter) {
      Vertex n = make_dummy(VertexKind::DummyFilter, host, "boundary", 0, normal_share);
      std::string id = add_vertex(std::move(n));
      connect(up, id);
      result = {id};
      group.push_back(id);
    }
    for (const auto& s : specs) {
      if (skip_spec_.count(s.event)) continue;
      if (!s.handler.empty()) {
        std::string f = add_vertex(dummy(VertexKind::DummyFilter, s.handler, "comp", s.probability));
        connect(up, f);
        stash_[s.handler] = {f};
        group.push_back(f);
        continue;
      }
      std::string d = add_vertex(dummy(VertexKind::DummyDelay, s.event, "boundary", s.probability, s.elapsed * amort));
      connect(up, d);
      stash_[s.event] = {d};
      if (s.interrupting) group.push_back(d);
    }
    if (group.size() > 1) exclusive_groups_.push_back(group);
    return result;
  }

  std::vector<std::string> post_boundaries(const std::string& host, const std::vector<std::string>& exits) {
    double share = 1.0;
    bool need_filter = false;
    for (const auto& s : boundary_specs(host)) {
      if (s.interrupting || skip_spec_.count(s.event)) continue;
      share -= s.probability;
      need_filter = true;
    }
    if (!need_filter) return exits;
    if (share < -kProbabilityTolerance)
      throw MappingError("non-interrupting events of '" + host + "' have probabilities summing above 1");
    Vertex n = make_dummy(VertexKind::DummyFilter, host, "boundary", 1, std::max(0.0, share));
    std::string id = add_vertex(std::move(n));
    connect(exits, id);
    return {id};
  }

  void evaluate_activity(std::size_t w, const std::vector<std::string>& up) {
    const FlowNode& node = *nodes_[w].node;
    const double amort = amortization(w);
    Fragment core;
    if (nodes_[w].role == Role::AdHoc) {
      std::vector<Fragment> parts;
      for (const FlowNode* t : adhoc_tasks(node)) {
        if (!index_.boundaries_of(t->id).empty())
          out_.warnings.push_back("boundary events inside ad-hoc subprocess '" + node.id + "' ignored");
        parts.push_back(activity_core(*t, amort));
      }
      bool inner_flows = std::any_of(process_.flows.begin(), process_.flows.end(),
                                     [&](const SequenceFlow& f) { return index_.parent(f.source) == node.id; });
      if (inner_flows)
        out_.warnings.push_back("sequence flows inside ad-hoc subprocess '" + node.id + "' ignored");
      core = map_adhoc(node.id, std::move(parts));
    } else {
      core = activity_core(node, amort);
    }

    // Merged compensation folds the handler into the host vertex.
    for (const auto& s : boundary_specs(node.id)) {
      if (!merged_compensation(s)) continue;
      auto rejoins = handler_rejoins(node.id, s.handler);
      if (!rejoins) {
        out_.warnings.push_back("compensation handler '" + s.handler + "' does not rejoin '" + node.id +
                                "'; mapped with two branches");
        continue;
      }
      const FlowNode& handler = index_.at(s.handler);
      Fragment comp = activity_core(handler, amort);
      Vertex& host = core.ordinary();
      const Vertex& c = comp.ordinary();
      const double p1 = 1.0 - s.probability;
      host.cost = p1 * host.cost + s.probability * c.cost;
      host.selectivity = *rejoins ? p1 * host.selectivity + s.probability * c.selectivity : p1 * host.selectivity;
      if (!(host.selectivity > 0))
        throw MappingError("compensation of '" + node.id + "': merged selectivity is zero");
      out_.absorbed[s.handler] = node.id;
      skip_spec_.insert(s.event);
    }

    std::vector<std::string> entry = pre_boundaries(w, node.id, up);
    attach(core, entry);
    set_ports(w, post_boundaries(node.id, core.exits));
  }

  void evaluate_comp_handler(std::size_t w) {
    const FlowNode& node = *nodes_[w].node;
    auto it = stash_.find(node.id);
    if (it == stash_.end()) {
      set_ports(w, {});
      return;
    }
    Fragment core = activity_core(node, amortization(w));
    attach(core, it->second);
    set_ports(w, core.exits);
  }

  void evaluate_event_subprocess(std::size_t w, const std::vector<std::string>& up) {
    const FlowNode& es = *nodes_[w].node;
    auto p1 = explicit_field(es.id, &PartialStatEntry::branch_probability);
    if (!p1) throw MappingError("event subprocess '" + es.id + "' needs a branch_probability");
    require_probability(*p1, "event subprocess '" + es.id + "'");
    std::string f = add_vertex(dummy(VertexKind::DummyFilter, es.id, "evsub", *p1));
    connect(up, f);
    set_ports(w, {f});
    event_subprocesses_.push_back(&es);
  }

  // Split gateway paired with a join: every path back from the join reaches
  // the same split first. Nested blocks are skipped through their own pair.
  std::optional<std::pair<std::size_t, std::set<std::size_t>>> paired_split(std::size_t join) {
    if (auto memo = pairs_.find(join); memo != pairs_.end()) return memo->second;
    std::optional<std::size_t> split;
    std::set<std::size_t> branches;
    for (std::size_t e : forward_edges(nodes_[join].in)) {
      std::size_t edge = e;
      std::size_t x = edges_[edge].from;
      bool skip_split = false;
      for (;;) {
        const auto out = forward_edges(nodes_[x].out);
        const auto in = forward_edges(nodes_[x].in);
        if (!skip_split && nodes_[x].role == Role::Gateway && out.size() > 1) break;
        skip_split = false;
        if (nodes_[x].role == Role::Gateway && in.size() > 1) {
          auto inner = paired_split(x);
          if (!inner) return std::nullopt;
          x = inner->first;
          skip_split = true;
          continue;
        }
        if (in.size() != 1) return std::nullopt;
        edge = in.front();
        x = edges_[edge].from;
      }
      if (split && *split != x) return std::nullopt;
      split = x;
      branches.insert(edge);
    }
    if (!split) return std::nullopt;
    auto result = std::make_pair(*split, branches);
    pairs_[join] = result;
    return result;
  }

  static GatewayKind gateway_kind(const FlowNode& n) {
    if (n.kind == NodeKind::ParallelGateway) return GatewayKind::Parallel;
    if (n.kind == NodeKind::InclusiveGateway) return GatewayKind::Inclusive;
    return GatewayKind::Exclusive;
  }

  void evaluate_gateway(std::size_t w, std::vector<std::string> up) {
    const FlowNode& g = *nodes_[w].node;
    const GatewayKind kind = gateway_kind(g);
    const auto in = forward_edges(nodes_[w].in);
    const auto out = forward_edges(nodes_[w].out);

    if (in.size() > 1) {
      double total = 1.0;
      if (kind == GatewayKind::Parallel) {
        // Count split branches, not incoming flows: a boundary path rejoining
        // inside one branch is an alternative, not an extra branch.
        auto pair = paired_split(w);
        total = static_cast<double>(pair ? pair->second.size() : in.size());
      } else if (kind == GatewayKind::Inclusive) {
        auto pair = paired_split(w);
        if (!pair) throw MappingError("inclusive join '" + g.id + "' cannot be paired with its split");
        total = 0.0;
        for (std::size_t e : pair->second) {
          auto it = inclusive_sel_.find(e);
          if (it == inclusive_sel_.end())
            throw MappingError("inclusive join '" + g.id + "' is not paired with an inclusive split");
          total += it->second;
        }
      }
      Vertex c = gateway_combiner(kind, g.id, total);
      c.id = next_dummy(g.id, "join");
      std::string id = add_vertex(std::move(c));
      connect(up, id);
      up = {id};
    }

    if (out.size() <= 1 || kind == GatewayKind::Parallel) {
      set_ports(w, up);
      return;
    }

    std::vector<double> values;
    double sum = 0.0;
    for (std::size_t e : out) {
      auto v = branch_value(edges_[e]);
      if (!v)
        throw MappingError(std::string(kind == GatewayKind::Exclusive ? "exclusive" : "inclusive") + " gateway '" +
                           g.id + "': no branch_probability for flow '" + edges_[e].flow + "' (target '" +
                           edges_[e].target + "')");
      values.push_back(*v);
      sum += *v;
    }
    if (kind == GatewayKind::Exclusive && std::abs(sum - 1.0) > kProbabilityTolerance) {
      // Probabilities given over all flows, the returning one included.
      std::optional<double> back;
      for (std::size_t e : nodes_[w].out)
        if (edges_[e].back)
          if (auto b = branch_value(edges_[e])) back = back.value_or(0.0) + *b;
      if (back && *back < 1.0 && std::abs(sum - (1.0 - *back)) <= kProbabilityTolerance)
        for (double& v : values) v /= 1.0 - *back;
    }
    auto filters = gateway_filters(kind, g.id, values);
    std::vector<std::string> group;
    for (std::size_t i = 0; i < out.size(); ++i) {
      Vertex f = std::move(*filters[i]);
      f.id = next_dummy(g.id, kind == GatewayKind::Exclusive ? "xor" : "or");
      std::string id = add_vertex(std::move(f));
      connect(up, id);
      port_[out[i]] = {id};
      group.push_back(id);
      if (kind == GatewayKind::Inclusive) inclusive_sel_[out[i]] = values[i];
    }
    if (kind == GatewayKind::Exclusive) exclusive_groups_.push_back(group);
  }

  void evaluate_event(std::size_t w, const std::vector<std::string>& up) {
    const FlowNode& ev = *nodes_[w].node;
    const double amort = amortization(w);
    auto pass = [&] { set_ports(w, up); };
    auto chain = [&](Vertex v) {
      v.cost *= amort;
      std::string id = add_vertex(std::move(v));
      connect(up, id);
      set_ports(w, {id});
    };
    switch (ev.kind) {
      case NodeKind::TimerEvent: {
        auto type = ev.attribute("timer_type");
        TimerCase timer = (type == "date" || type == "cycle") ? TimerCase::Barrier : TimerCase::Delay;
        if (timer == TimerCase::Barrier) {
          auto marker = std::get<BarrierMarker>(map_timer_event(timer, ev.id, 0.0));
          std::string r = add_vertex(make_dummy(VertexKind::DummyFilter, marker.event, "source", 0, 1.0));
          roots_.push_back({r, marker.event, up});
          set_ports(w, {r});
        } else {
          chain(std::get<Vertex>(map_timer_event(timer, ev.id, timer_duration(ev))));
        }
        break;
      }
      case NodeKind::ConditionalEvent: {
        auto wait = explicit_field(ev.id, &PartialStatEntry::wait_duration);
        if (!wait) out_.warnings.push_back("conditional event '" + ev.id + "' has no wait_duration; charged 0");
        chain(map_conditional_event(ev.id, wait.value_or(0.0), resolve_entry(stats_, ev.id).selectivity));
        break;
      }
      case NodeKind::MessageEvent:
      case NodeKind::SignalEvent: {
        auto v = map_trivial_event(ev.kind == NodeKind::MessageEvent ? TrivialEvent::Message : TrivialEvent::Signal,
                                   ev.id, opts_.checkpoint_events);
        if (v) chain(std::move(*v));
        else pass();
        break;
      }
      case NodeKind::IntermediateEvent: {
        if (ev.attribute("trigger") == "multiple") {
          auto sel = explicit_field(ev.id, &PartialStatEntry::selectivity).value_or(1.0);
          if (auto v = map_trivial_event(TrivialEvent::Multiple, ev.id, false, sel)) {
            chain(std::move(*v));
            break;
          }
        }
        pass();
        break;
      }
      default:
        pass();
        break;
    }
  }

  // --- post-processing ----------------------------------------------------------

  std::vector<std::set<std::string>> reachability() const {
    TokenFlowDag dag = builder_.build();
    auto order = topological_order(dag);
    std::vector<std::set<std::string>> reach(dag.size());
    if (!order) return reach;
    for (auto it = order->rbegin(); it != order->rend(); ++it) {
      reach[*it].insert(dag.vertex(*it).id);
      for (std::size_t s : dag.successors(*it)) reach[*it].insert(reach[s].begin(), reach[s].end());
    }
    return reach;
  }

  // Tasks on different outcomes of one exclusive choice must stay on
  // distinct branches.
  void add_exclusive_group_constraints() {
    if (exclusive_groups_.empty()) return;
    TokenFlowDag dag = builder_.build();
    auto reach = reachability();
    for (const auto& group : exclusive_groups_) {
      std::vector<std::set<std::string>> sets;
      for (const auto& head : group) sets.push_back(reach[dag.index_of(head)]);
      std::vector<std::vector<std::string>> own(group.size());
      for (std::size_t i = 0; i < group.size(); ++i) {
        for (const auto& v : sets[i]) {
          if (dag.vertex(v).kind != VertexKind::Ordinary) continue;
          bool shared = false;
          for (std::size_t j = 0; j < group.size() && !shared; ++j) shared = j != i && sets[j].count(v);
          if (!shared) own[i].push_back(v);
        }
      }
      for (std::size_t i = 0; i < group.size(); ++i)
        for (std::size_t j = i + 1; j < group.size(); ++j)
          for (const auto& a : own[i])
            for (const auto& b : own[j]) builder_.constraints().add_exclusion(a, b);
    }
  }

  bool inside(const std::string& id, const std::string& scope) const {
    if (scope.empty()) return true;
    for (std::string p = index_.parent(id); !p.empty(); p = index_.parent(p))
      if (p == scope) return true;
    return false;
  }

  void add_event_subprocess_constraints() {
    for (const FlowNode* es : event_subprocesses_) {
      const std::string& scope = index_.parent(es->id);
      std::vector<std::string> host;
      std::vector<std::string> event;
      double host_cost = 0.0;
      double event_cost = 0.0;
      for (const auto& v : builder_.vertices()) {
        if (v.kind != VertexKind::Ordinary || !index_.find(v.origin)) continue;
        if (inside(v.origin, es->id)) {
          event.push_back(v.id);
          event_cost += v.cost;
        } else if (inside(v.origin, scope)) {
          host.push_back(v.id);
          host_cost += v.cost;
        }
      }
      if (!scope.empty())
        if (auto c = explicit_field(scope, &PartialStatEntry::cost)) host_cost = *c;
      if (auto c = explicit_field(es->id, &PartialStatEntry::cost)) event_cost = *c;
      if (event_cost >= host_cost)
        out_.warnings.push_back("event subprocess '" + es->id + "' costs " + format_number(event_cost) +
                                ", not less than its host's " + format_number(host_cost));
      for (const auto& h : host)
        for (const auto& e : event) builder_.constraints().add_exclusion(h, e);
    }
  }

  std::string vertex_for_element(const std::string& id) const {
    std::string target = id;
    if (auto a = out_.absorbed.find(id); a != out_.absorbed.end()) target = a->second;
    for (const auto& v : builder_.vertices())
      if (v.kind == VertexKind::Ordinary && v.origin == target) return v.id;
    throw MappingError("declared constraint references '" + id + "', which maps to no task vertex");
  }

  void add_declared_constraints() {
    for (const auto& [a, b] : stats_.constraints.precedence) {
      std::string va = vertex_for_element(a);
      std::string vb = vertex_for_element(b);
      if (va == vb) {
        out_.warnings.push_back("precedence (" + a + ", " + b + ") falls inside one merged vertex; dropped");
        continue;
      }
      builder_.constraints().add_precedence(va, vb);
    }
    for (const auto& [a, b] : stats_.constraints.exclusion) {
      std::string va = vertex_for_element(a);
      std::string vb = vertex_for_element(b);
      if (va != vb) builder_.constraints().add_exclusion(va, vb);
    }
  }

  void elide_roots() {
    for (auto& r : roots_) {
      auto succ = builder_.successors(r.vertex);
      if (succ.size() != 1) continue;
      if (builder_.predecessors(succ.front()).size() != 1) continue;
      builder_.remove_vertex(r.vertex);
      for (auto& other : roots_)
        for (auto& u : other.upstream)
          if (u == r.vertex) u = succ.front();
      r.vertex = succ.front();
    }
  }

  void partition() {
    std::map<std::string, std::size_t> segment;
    std::vector<DagBuilder> parts(roots_.size());
    for (std::size_t k = 0; k < roots_.size(); ++k) {
      std::deque<std::string> queue{roots_[k].vertex};
      while (!queue.empty()) {
        std::string v = queue.front();
        queue.pop_front();
        auto [it, inserted] = segment.emplace(v, k);
        if (!inserted) {
          if (it->second != k)
            throw MappingError("vertex '" + v + "' is reachable from both sides of a timer barrier");
          continue;
        }
        for (const auto& s : builder_.successors(v)) queue.push_back(s);
      }
    }
    for (const auto& v : builder_.vertices()) {
      auto it = segment.emplace(v.id, 0).first;
      parts[it->second].add_vertex(v);
    }
    for (const auto& [a, b] : builder_.edges()) parts[segment.at(a)].add_edge(a, b);
    for (std::size_t k = 0; k < roots_.size(); ++k) parts[k].set_source(roots_[k].vertex);
    auto place = [&](const VertexPair& p, bool precedence) {
      std::size_t sa = segment.at(p.first);
      std::size_t sb = segment.at(p.second);
      if (sa != sb) {
        out_.warnings.push_back(std::string(precedence ? "precedence" : "exclusion") + " (" + p.first + ", " +
                                p.second + ") spans a timer barrier and holds trivially; dropped");
        return;
      }
      if (precedence) parts[sa].constraints().add_precedence(p.first, p.second);
      else parts[sa].constraints().add_exclusion(p.first, p.second);
    };
    for (const auto& p : builder_.constraints().precedence) place(p, true);
    for (const auto& p : builder_.constraints().exclusion) place(p, false);

    for (std::size_t k = 0; k < roots_.size(); ++k) {
      TokenFlowDag dag = parts[k].build();
      auto report = validate_dag(dag);
      if (!report.ok()) {
        std::string msg = "mapped DAG " + std::to_string(k) + " is invalid:";
        for (const auto& issue : report.issues) msg += "\n  " + issue;
        throw MappingError(msg);
      }
      out_.dags.push_back(std::move(dag));
      if (k > 0) {
        std::size_t before = 0;
        if (!roots_[k].upstream.empty()) before = segment.at(roots_[k].upstream.front());
        out_.barriers.push_back({roots_[k].event, before, k});
      }
    }
  }

  void check_coverage() {
    std::map<std::string, int> seen;
    for (const auto& dag : out_.dags)
      for (const auto& v : dag.vertices())
        if (v.kind == VertexKind::Ordinary) ++seen[v.origin];
    for (const auto& id : index_.ids()) {
      const FlowNode& n = index_.at(id);
      if (!is_activity_kind(n.kind) || out_.absorbed.count(id)) continue;
      if (expands(n) || n.kind == NodeKind::EventSubProcess) continue;
      if (n.kind == NodeKind::AdHocSubProcess && !adhoc_tasks(n).empty()) continue;
      if (!inside_mapped_scope(id)) continue;
      if (seen[id] != 1)
        throw MappingError("activity '" + id + "' produced " + std::to_string(seen[id]) +
                           " task vertices (unreachable from the process start?)");
    }
  }

  bool inside_mapped_scope(const std::string& id) const {
    for (std::string p = index_.parent(id); !p.empty(); p = index_.parent(p)) {
      const FlowNode& n = index_.at(p);
      if (n.kind == NodeKind::AdHocSubProcess) return true;
      if (!mapped(p)) return false;
    }
    return true;
  }

  const BpmnProcess& process_;
  const StatsCatalog& stats_;
  const MappingOptions& opts_;
  ProcessIndex index_;
  MappingOutcome out_;

  DagBuilder builder_;
  std::vector<WNode> nodes_;
  std::vector<WEdge> edges_;
  std::vector<std::vector<std::string>> port_;
  std::size_t root_ = 0;
  std::map<std::string, std::size_t> in_node_;
  std::map<std::string, std::size_t> out_node_;
  std::map<std::string, std::size_t> ordinals_;
  std::map<std::size_t, double> amortization_;
  std::map<std::size_t, std::vector<double>> loop_entry_;
  std::map<std::size_t, std::vector<double>> loop_exit_;
  std::map<std::string, double> termination_;
  std::map<std::string, double> cancel_multiplier_;
  std::map<std::string, std::string> comp_handler_of_event_;
  std::map<std::string, std::string> comp_host_of_handler_;
  std::map<std::string, std::vector<BoundarySpec>> specs_;
  std::set<std::string> skip_spec_;
  std::map<std::string, std::vector<std::string>> stash_;
  std::map<std::size_t, double> inclusive_sel_;
  std::map<std::size_t, std::pair<std::size_t, std::set<std::size_t>>> pairs_;
  std::vector<std::vector<std::string>> exclusive_groups_;
  std::vector<const FlowNode*> event_subprocesses_;
  std::vector<Root> roots_;
};

}  // namespace detail

/// Maps a whole process. Start and end events vanish; fixed-time timers cut
/// the result into several DAGs. Every produced DAG passes validate_dag.
inline MappingOutcome map_process(const BpmnProcess& process, const StatsCatalog& stats,
                                  const MappingOptions& opts = {}) {
  return detail::Mapper(process, stats, opts).run();
}

}  // namespace bpmnopt
