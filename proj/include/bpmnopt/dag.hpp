#pragma once

// Annotated token-flow DAG: vertices carry cost/selectivity and behavioural
// flags, edges carry tokens, and a constraint set restricts re-orderings.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bpmnopt/error.hpp"

namespace bpmnopt {

enum class VertexKind { Ordinary, DummyFilter, DummyCombiner, DummyDelay };

inline std::string_view to_string(VertexKind kind) {
  switch (kind) {
    case VertexKind::Ordinary: return "ordinary";
    case VertexKind::DummyFilter: return "dummy_filter";
    case VertexKind::DummyCombiner: return "dummy_combiner";
    case VertexKind::DummyDelay: return "dummy_delay";
  }
  return "?";
}

inline std::optional<VertexKind> vertex_kind_from_string(std::string_view s) {
  if (s == "ordinary") return VertexKind::Ordinary;
  if (s == "dummy_filter") return VertexKind::DummyFilter;
  if (s == "dummy_combiner") return VertexKind::DummyCombiner;
  if (s == "dummy_delay") return VertexKind::DummyDelay;
  return std::nullopt;
}

inline bool is_dummy(VertexKind kind) { return kind != VertexKind::Ordinary; }

struct Vertex {
  std::string id;
  std::string origin;  // BPMN element id the vertex stems from
  VertexKind kind = VertexKind::Ordinary;
  double cost = 0.0;
  double selectivity = 1.0;
  bool pipelining = true;
  bool parallelizable = false;
  int max_degree = 1;

  bool operator==(const Vertex&) const = default;
};

using VertexPair = std::pair<std::string, std::string>;

struct ConstraintSet {
  std::set<VertexPair> precedence;  // (a, b): a must precede b
  std::set<VertexPair> exclusion;   // unordered, stored with first < second

  void add_precedence(std::string before, std::string after) {
    precedence.emplace(std::move(before), std::move(after));
  }
  void add_exclusion(std::string a, std::string b) {
    if (b < a) std::swap(a, b);
    exclusion.emplace(std::move(a), std::move(b));
  }
  bool excludes(const std::string& a, const std::string& b) const {
    return a < b ? exclusion.count({a, b}) != 0 : exclusion.count({b, a}) != 0;
  }

  bool operator==(const ConstraintSet&) const = default;
};

class DagBuilder;

/// Immutable once built; construct through DagBuilder.
class TokenFlowDag {
 public:
  const std::vector<Vertex>& vertices() const { return vertices_; }
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }
  const std::string& source() const { return source_; }
  const ConstraintSet& constraints() const { return constraints_; }

  std::size_t size() const { return vertices_.size(); }

  std::optional<std::size_t> find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t index_of(const std::string& id) const {
    auto i = find(id);
    if (!i) throw Error("unknown vertex '" + id + "'");
    return *i;
  }
  const Vertex& vertex(const std::string& id) const { return vertices_[index_of(id)]; }
  const Vertex& vertex(std::size_t i) const { return vertices_[i]; }

  const std::vector<std::size_t>& successors(std::size_t i) const { return succ_[i]; }
  const std::vector<std::size_t>& predecessors(std::size_t i) const { return pred_[i]; }

  bool has_edge(const std::string& from, const std::string& to) const {
    auto a = find(from);
    auto b = find(to);
    if (!a || !b) return false;
    const auto& s = succ_[*a];
    return std::find(s.begin(), s.end(), *b) != s.end();
  }

  bool operator==(const TokenFlowDag& other) const {
    return vertices_ == other.vertices_ && edges_ == other.edges_ &&
           source_ == other.source_ && constraints_ == other.constraints_;
  }

 private:
  friend class DagBuilder;

  std::vector<Vertex> vertices_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::vector<std::vector<std::size_t>> succ_;
  std::vector<std::vector<std::size_t>> pred_;
  std::string source_;
  ConstraintSet constraints_;
};

/// Mutable staging area for a TokenFlowDag. Vertex and edge order is kept as
/// inserted so that serialized output is deterministic.
class DagBuilder {
 public:
  DagBuilder() = default;

  explicit DagBuilder(const TokenFlowDag& dag) : source_(dag.source()), constraints_(dag.constraints()) {
    for (const auto& v : dag.vertices()) add_vertex(v);
    for (auto [a, b] : dag.edges()) add_edge(dag.vertex(a).id, dag.vertex(b).id);
  }

  Vertex& add_vertex(Vertex v) {
    if (index_.count(v.id) != 0) throw ValidationError("duplicate vertex id '" + v.id + "'");
    index_.emplace(v.id, vertices_.size());
    vertices_.push_back(std::move(v));
    return vertices_.back();
  }

  bool has_vertex(const std::string& id) const { return index_.count(id) != 0; }

  Vertex& vertex(const std::string& id) {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error("unknown vertex '" + id + "'");
    return vertices_[it->second];
  }
  const Vertex& vertex(const std::string& id) const {
    return const_cast<DagBuilder*>(this)->vertex(id);
  }

  const std::vector<Vertex>& vertices() const { return vertices_; }
  const std::vector<VertexPair>& edges() const { return edges_; }

  /// Returns false when the edge already exists (one edge per ordered pair).
  bool add_edge(const std::string& from, const std::string& to) {
    if (!has_vertex(from) || !has_vertex(to))
      throw ValidationError("edge references unknown vertex '" + (has_vertex(from) ? to : from) + "'");
    if (!edge_set_.insert({from, to}).second) return false;
    edges_.emplace_back(from, to);
    return true;
  }

  bool has_edge(const std::string& from, const std::string& to) const {
    return edge_set_.count({from, to}) != 0;
  }

  void remove_edge(const std::string& from, const std::string& to) {
    if (edge_set_.erase({from, to}) == 0) return;
    edges_.erase(std::find(edges_.begin(), edges_.end(), VertexPair{from, to}));
  }

  /// Removes a vertex together with its incident edges and constraints.
  void remove_vertex(const std::string& id) {
    auto it = index_.find(id);
    if (it == index_.end()) return;
    vertices_.erase(vertices_.begin() + static_cast<std::ptrdiff_t>(it->second));
    index_.clear();
    for (std::size_t i = 0; i < vertices_.size(); ++i) index_.emplace(vertices_[i].id, i);
    std::vector<VertexPair> kept;
    for (auto& e : edges_) {
      if (e.first == id || e.second == id) {
        edge_set_.erase(e);
      } else {
        kept.push_back(std::move(e));
      }
    }
    edges_ = std::move(kept);
    std::erase_if(constraints_.precedence, [&](const VertexPair& p) { return p.first == id || p.second == id; });
    std::erase_if(constraints_.exclusion, [&](const VertexPair& p) { return p.first == id || p.second == id; });
  }

  std::vector<std::string> successors(const std::string& id) const {
    std::vector<std::string> out;
    for (const auto& [a, b] : edges_)
      if (a == id) out.push_back(b);
    return out;
  }
  std::vector<std::string> predecessors(const std::string& id) const {
    std::vector<std::string> out;
    for (const auto& [a, b] : edges_)
      if (b == id) out.push_back(a);
    return out;
  }

  void set_source(std::string id) { source_ = std::move(id); }
  const std::string& source() const { return source_; }

  ConstraintSet& constraints() { return constraints_; }
  const ConstraintSet& constraints() const { return constraints_; }

  /// Structural checks only (dangling references); semantic invariants are
  /// reported by validate_dag so that broken graphs can still be inspected.
  TokenFlowDag build() const {
    TokenFlowDag dag;
    dag.vertices_ = vertices_;
    dag.index_ = index_;
    dag.succ_.assign(vertices_.size(), {});
    dag.pred_.assign(vertices_.size(), {});
    for (const auto& [a, b] : edges_) {
      std::size_t ia = index_.at(a);
      std::size_t ib = index_.at(b);
      dag.edges_.emplace_back(ia, ib);
      dag.succ_[ia].push_back(ib);
      dag.pred_[ib].push_back(ia);
    }
    dag.source_ = source_;
    dag.constraints_ = constraints_;
    return dag;
  }

 private:
  std::vector<Vertex> vertices_;
  std::map<std::string, std::size_t> index_;
  std::vector<VertexPair> edges_;
  std::set<VertexPair> edge_set_;
  std::string source_;
  ConstraintSet constraints_;
};

/// Kahn order over the flow edges, ties by vertex index; nullopt on a cycle.
inline std::optional<std::vector<std::size_t>> topological_order(const TokenFlowDag& dag) {
  std::vector<std::size_t> indegree(dag.size(), 0);
  for (auto [a, b] : dag.edges()) ++indegree[b];
  std::set<std::size_t> ready;
  for (std::size_t i = 0; i < dag.size(); ++i)
    if (indegree[i] == 0) ready.insert(i);
  std::vector<std::size_t> order;
  order.reserve(dag.size());
  while (!ready.empty()) {
    std::size_t v = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(v);
    for (std::size_t w : dag.successors(v))
      if (--indegree[w] == 0) ready.insert(w);
  }
  if (order.size() != dag.size()) return std::nullopt;
  return order;
}

/// Expected input tokens per process instance for every vertex (indexed as
/// dag.vertices()). The source receives one token; every other vertex
/// receives the selectivity-weighted rates of its predecessors.
inline std::vector<double> token_rates(const TokenFlowDag& dag) {
  auto order = topological_order(dag);
  if (!order) throw ValidationError("token rates undefined: flow edges contain a cycle");
  auto src = dag.find(dag.source());
  if (!src) throw ValidationError("token rates undefined: source vertex '" + dag.source() + "' missing");
  std::vector<double> rate(dag.size(), 0.0);
  for (std::size_t v : *order) {
    if (v == *src) {
      rate[v] = 1.0;
      continue;
    }
    double in = 0.0;
    for (std::size_t u : dag.predecessors(v)) in += rate[u] * dag.vertex(u).selectivity;
    rate[v] = in;
  }
  return rate;
}

inline double token_rate(const TokenFlowDag& dag, const std::string& vertex_id) {
  auto i = dag.find(vertex_id);
  if (!i) throw Error("unknown vertex '" + vertex_id + "'");
  return token_rates(dag)[*i];
}

/// Closes precedence under transitivity; exclusion is returned unchanged.
inline ConstraintSet transitive_closure(const ConstraintSet& constraints) {
  std::map<std::string, std::vector<std::string>> succ;
  for (const auto& [a, b] : constraints.precedence) {
    if (a == b) throw ValidationError("precedence cycle: '" + a + "' must precede itself");
    succ[a].push_back(b);
    succ[b];
  }
  ConstraintSet out;
  out.exclusion = constraints.exclusion;
  for (const auto& [start, _] : succ) {
    std::set<std::string> seen;
    std::deque<std::string> queue(succ[start].begin(), succ[start].end());
    while (!queue.empty()) {
      std::string v = std::move(queue.front());
      queue.pop_front();
      if (v == start)
        throw ValidationError("precedence cycle through '" + start + "'");
      if (!seen.insert(v).second) continue;
      out.precedence.emplace(start, v);
      for (const auto& w : succ[v]) queue.push_back(w);
    }
  }
  return out;
}

struct ValidationReport {
  std::vector<std::string> issues;

  bool ok() const { return issues.empty(); }
  bool mentions(std::string_view needle) const {
    return std::any_of(issues.begin(), issues.end(),
                       [&](const std::string& s) { return s.find(needle) != std::string::npos; });
  }
};

/// Lists every violated DAG invariant; an empty report means the DAG is valid.
inline ValidationReport validate_dag(const TokenFlowDag& dag) {
  ValidationReport report;
  auto add = [&](std::string s) { report.issues.push_back(std::move(s)); };

  for (const auto& v : dag.vertices()) {
    if (!(v.cost >= 0)) add("negative cost: vertex '" + v.id + "'");
    // A filter or delay of selectivity 0 blocks a branch that never runs.
    const bool may_block = v.kind == VertexKind::DummyFilter || v.kind == VertexKind::DummyDelay;
    if (!(may_block ? v.selectivity >= 0 : v.selectivity > 0) || !std::isfinite(v.selectivity))
      add("non-positive selectivity: vertex '" + v.id + "'");
    if (v.max_degree < 1) add("invalid parallel degree: vertex '" + v.id + "'");
    if ((v.kind == VertexKind::DummyFilter || v.kind == VertexKind::DummyCombiner) && v.cost != 0)
      add("dummy cost: " + std::string(to_string(v.kind)) + " '" + v.id + "' has nonzero cost");
  }

  auto order = topological_order(dag);
  if (!order) add("cycle: flow edges do not form a DAG");

  auto src = dag.find(dag.source());
  if (!src) {
    add("missing source: '" + dag.source() + "' is not a vertex");
  } else {
    if (!dag.predecessors(*src).empty()) add("source has incoming edges: '" + dag.source() + "'");
    std::vector<bool> seen(dag.size(), false);
    std::deque<std::size_t> queue{*src};
    seen[*src] = true;
    while (!queue.empty()) {
      std::size_t v = queue.front();
      queue.pop_front();
      for (std::size_t w : dag.successors(v))
        if (!seen[w]) {
          seen[w] = true;
          queue.push_back(w);
        }
    }
    for (std::size_t i = 0; i < dag.size(); ++i)
      if (!seen[i]) add("unreachable: vertex '" + dag.vertex(i).id + "' is not reachable from the source");
  }

  const auto& c = dag.constraints();
  for (const auto& [a, b] : c.precedence)
    if (!dag.find(a) || !dag.find(b)) add("unknown vertex in constraint: precedence (" + a + ", " + b + ")");
  for (const auto& [a, b] : c.exclusion)
    if (!dag.find(a) || !dag.find(b)) add("unknown vertex in constraint: exclusion (" + a + ", " + b + ")");

  try {
    transitive_closure(c);
  } catch (const ValidationError& e) {
    add(e.what());
  }
  for (const auto& [a, b] : c.precedence)
    if (c.excludes(a, b))
      add("constraint conflict: (" + a + ", " + b + ") is both a precedence and an exclusion pair");

  // Exclusion pairs must sit on distinct branches: neither may reach the other.
  if (order) {
    std::vector<std::set<std::size_t>> reach(dag.size());
    for (auto it = order->rbegin(); it != order->rend(); ++it) {
      for (std::size_t w : dag.successors(*it)) {
        reach[*it].insert(w);
        reach[*it].insert(reach[w].begin(), reach[w].end());
      }
    }
    for (const auto& [a, b] : c.exclusion) {
      auto ia = dag.find(a);
      auto ib = dag.find(b);
      if (!ia || !ib) continue;
      if (reach[*ia].count(*ib) != 0 || reach[*ib].count(*ia) != 0)
        add("exclusion violated: '" + a + "' and '" + b + "' lie on the same path");
    }
  }
  return report;
}

}  // namespace bpmnopt
