#pragma once

// DAG interchange (JSON) and Graphviz DOT export.

#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bpmnopt/dag.hpp"
#include "bpmnopt/error.hpp"
#include "bpmnopt/format.hpp"

namespace bpmnopt {

/// A fixed-time timer cut the process; DAG `before` ends where `after` begins.
struct Barrier {
  std::string event;
  std::size_t before = 0;
  std::size_t after = 0;

  bool operator==(const Barrier&) const = default;
};

/// Contents of one interchange file: a single DAG, or several DAGs separated
/// by barriers.
struct DagDocument {
  std::vector<TokenFlowDag> dags;
  std::vector<Barrier> barriers;
};

inline nlohmann::json dag_to_json(const TokenFlowDag& dag) {
  nlohmann::json j;
  j["vertices"] = nlohmann::json::array();
  for (const auto& v : dag.vertices()) {
    j["vertices"].push_back({{"id", v.id},
                             {"origin", v.origin},
                             {"kind", std::string(to_string(v.kind))},
                             {"cost", v.cost},
                             {"selectivity", v.selectivity},
                             {"pipelining", v.pipelining},
                             {"parallel_degree", v.parallelizable ? v.max_degree : 0}});
  }
  j["edges"] = nlohmann::json::array();
  for (auto [a, b] : dag.edges()) j["edges"].push_back({dag.vertex(a).id, dag.vertex(b).id});
  j["source"] = dag.source();
  j["constraints"]["precedence"] = nlohmann::json::array();
  for (const auto& [a, b] : dag.constraints().precedence) j["constraints"]["precedence"].push_back({a, b});
  j["constraints"]["exclusion"] = nlohmann::json::array();
  for (const auto& [a, b] : dag.constraints().exclusion) j["constraints"]["exclusion"].push_back({a, b});
  return j;
}

namespace detail {

inline void expect_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : j.items())
    if (allowed.count(key) == 0) throw ParseError(where + ": unknown field '" + key + "'");
}

inline std::vector<VertexPair> read_pairs(const nlohmann::json& j, const std::string& where) {
  std::vector<VertexPair> out;
  if (!j.is_array()) throw ParseError(where + " must be a list of pairs");
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_string())
      throw ParseError(where + " entries must be [\"a\", \"b\"] string pairs");
    out.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
  }
  return out;
}

}  // namespace detail

inline TokenFlowDag dag_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("DAG document must be a JSON object");
  detail::expect_keys(j, {"vertices", "edges", "source", "constraints"}, "DAG");
  DagBuilder builder;
  if (!j.contains("vertices") || !j["vertices"].is_array()) throw ParseError("DAG: 'vertices' list missing");
  for (const auto& jv : j["vertices"]) {
    if (!jv.is_object()) throw ParseError("DAG: vertex entries must be objects");
    detail::expect_keys(jv, {"id", "origin", "kind", "cost", "selectivity", "pipelining", "parallel_degree"},
                        "vertex");
    Vertex v;
    try {
      v.id = jv.at("id").get<std::string>();
      v.origin = jv.value("origin", v.id);
      auto kind = vertex_kind_from_string(jv.value("kind", std::string("ordinary")));
      if (!kind) throw ParseError("vertex '" + v.id + "': unknown kind");
      v.kind = *kind;
      v.cost = jv.value("cost", 0.0);
      v.selectivity = jv.value("selectivity", 1.0);
      v.pipelining = jv.value("pipelining", true);
      int degree = jv.value("parallel_degree", 0);
      v.parallelizable = degree > 0;
      v.max_degree = degree > 0 ? degree : 1;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("DAG vertex: ") + e.what());
    }
    try {
      builder.add_vertex(std::move(v));
    } catch (const ValidationError& e) {
      throw ParseError(e.what());
    }
  }
  if (j.contains("edges")) {
    for (const auto& [a, b] : detail::read_pairs(j["edges"], "DAG edges")) {
      try {
        if (!builder.add_edge(a, b)) throw ParseError("DAG: duplicate edge (" + a + ", " + b + ")");
      } catch (const ValidationError& e) {
        throw ParseError(e.what());
      }
    }
  }
  if (!j.contains("source") || !j["source"].is_string()) throw ParseError("DAG: 'source' missing");
  builder.set_source(j["source"].get<std::string>());
  if (j.contains("constraints")) {
    const auto& c = j["constraints"];
    if (!c.is_object()) throw ParseError("DAG: 'constraints' must be an object");
    detail::expect_keys(c, {"precedence", "exclusion"}, "constraints");
    if (c.contains("precedence"))
      for (auto& [a, b] : detail::read_pairs(c["precedence"], "precedence")) builder.constraints().add_precedence(a, b);
    if (c.contains("exclusion"))
      for (auto& [a, b] : detail::read_pairs(c["exclusion"], "exclusion")) builder.constraints().add_exclusion(a, b);
  }
  return builder.build();
}

inline nlohmann::json document_to_json(const DagDocument& doc) {
  if (doc.dags.size() == 1 && doc.barriers.empty()) return dag_to_json(doc.dags.front());
  nlohmann::json j;
  j["dags"] = nlohmann::json::array();
  for (const auto& d : doc.dags) j["dags"].push_back(dag_to_json(d));
  j["barriers"] = nlohmann::json::array();
  for (const auto& b : doc.barriers)
    j["barriers"].push_back({{"event", b.event}, {"before", b.before}, {"after", b.after}});
  return j;
}

inline DagDocument document_from_json(const nlohmann::json& j) {
  DagDocument doc;
  if (j.is_object() && j.contains("dags")) {
    detail::expect_keys(j, {"dags", "barriers"}, "DAG document");
    if (!j["dags"].is_array()) throw ParseError("'dags' must be a list");
    for (const auto& d : j["dags"]) doc.dags.push_back(dag_from_json(d));
    if (j.contains("barriers")) {
      try {
        for (const auto& b : j["barriers"])
          doc.barriers.push_back({b.at("event").get<std::string>(), b.at("before").get<std::size_t>(),
                                  b.at("after").get<std::size_t>()});
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("barrier entry: ") + e.what());
      }
    }
  } else {
    doc.dags.push_back(dag_from_json(j));
  }
  return doc;
}

inline DagDocument read_dag_document(std::istream& in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed DAG file: ") + e.what());
  }
  return document_from_json(j);
}

inline std::string serialize_document(const DagDocument& doc) { return document_to_json(doc).dump(2) + "\n"; }

namespace detail {

inline std::string dot_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

/// One `digraph` per DAG. Dummy vertices get dashed borders, edge labels show
/// the selectivity of the edge's source vertex.
inline void write_dot(std::ostream& out, const TokenFlowDag& dag, const std::string& name = "dag") {
  out << "digraph " << detail::dot_quote(name) << " {\n";
  out << "  rankdir=LR;\n";
  out << "  node [shape=circle];\n";
  for (const auto& v : dag.vertices()) {
    std::string label = v.id + "\\nc=" + format_number(v.cost) + " s=" + format_number(v.selectivity);
    out << "  " << detail::dot_quote(v.id) << " [label=\"";
    for (char c : label) {
      if (c == '"') out << '\\';
      out << c;
    }
    out << "\"";
    if (is_dummy(v.kind)) out << ", style=dashed";
    if (!v.pipelining) out << ", peripheries=2";
    out << "];\n";
  }
  for (auto [a, b] : dag.edges()) {
    out << "  " << detail::dot_quote(dag.vertex(a).id) << " -> " << detail::dot_quote(dag.vertex(b).id)
        << " [label=\"" << format_number(dag.vertex(a).selectivity) << "\"];\n";
  }
  for (const auto& [a, b] : dag.constraints().exclusion) {
    out << "  " << detail::dot_quote(a) << " -> " << detail::dot_quote(b)
        << " [style=dotted, dir=none, constraint=false, color=red];\n";
  }
  out << "}\n";
}

inline std::string to_dot(const TokenFlowDag& dag, const std::string& name = "dag") {
  std::ostringstream out;
  write_dot(out, dag, name);
  return out.str();
}

}  // namespace bpmnopt
