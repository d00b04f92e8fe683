#pragma once

// Statistical and behavioural metadata for BPMN elements, read from a JSON
// sidecar keyed by element id. See docs/formats.md for the exact layout.

#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "bpmnopt/error.hpp"

namespace bpmnopt {

/// Fully resolved metadata of one element.
struct StatEntry {
  double cost = 0.0;         // time units per input token
  double selectivity = 1.0;  // output tokens per input token
  std::optional<double> branch_probability;
  std::optional<double> loop_count;
  std::optional<double> interrupted_cost;
  std::optional<double> wait_duration;
  bool pipelining = true;
  bool parallelizable = false;
  int max_degree = 1;

  bool operator==(const StatEntry&) const = default;
};

/// An entry as written in the sidecar: every field may be absent.
struct PartialStatEntry {
  std::optional<double> cost;
  std::optional<double> selectivity;
  std::optional<double> branch_probability;
  std::optional<double> loop_count;
  std::optional<double> interrupted_cost;
  std::optional<double> wait_duration;
  std::optional<bool> pipelining;
  std::optional<bool> parallelizable;
  std::optional<int> max_degree;

  bool operator==(const PartialStatEntry&) const = default;
};

/// Dependency metadata declared by the designer, in BPMN element ids.
struct DeclaredConstraints {
  std::vector<std::pair<std::string, std::string>> precedence;
  std::vector<std::pair<std::string, std::string>> exclusion;

  bool operator==(const DeclaredConstraints&) const = default;
};

struct StatsCatalog {
  std::map<std::string, PartialStatEntry> entries;
  PartialStatEntry defaults;
  DeclaredConstraints constraints;

  const PartialStatEntry* explicit_entry(const std::string& id) const {
    auto it = entries.find(id);
    return it == entries.end() ? nullptr : &it->second;
  }

  bool operator==(const StatsCatalog&) const = default;
};

namespace detail {

template <typename T>
void merge_field(T& target, const std::optional<T>& first, const std::optional<T>& second) {
  if (first) {
    target = *first;
  } else if (second) {
    target = *second;
  }
}

template <typename T>
void merge_field(std::optional<T>& target, const std::optional<T>& first,
                 const std::optional<T>& second) {
  target = first ? first : second;
}

inline void check_entry(const PartialStatEntry& e, const std::string& where) {
  auto fail = [&](const std::string& what) {
    throw ValidationError("stats entry '" + where + "': " + what);
  };
  auto finite = [&](const std::optional<double>& v, const char* name) {
    if (v && !std::isfinite(*v)) fail(std::string(name) + " must be finite");
  };
  finite(e.cost, "cost");
  finite(e.selectivity, "selectivity");
  finite(e.branch_probability, "branch_probability");
  finite(e.loop_count, "loop_count");
  finite(e.interrupted_cost, "interrupted_cost");
  finite(e.wait_duration, "wait_duration");
  if (e.cost && *e.cost < 0) fail("negative cost");
  if (e.selectivity && *e.selectivity <= 0) fail("selectivity must be positive");
  if (e.branch_probability && (*e.branch_probability < 0 || *e.branch_probability > 1))
    fail("branch_probability outside [0,1]");
  if (e.loop_count && *e.loop_count < 1) fail("loop_count must be at least 1");
  if (e.interrupted_cost && *e.interrupted_cost < 0) fail("negative interrupted_cost");
  if (e.wait_duration && *e.wait_duration < 0) fail("negative wait_duration");
  if (e.max_degree && *e.max_degree < 1) fail("max_degree must be at least 1");
}

inline PartialStatEntry entry_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError("stats entry '" + where + "' is not an object");
  PartialStatEntry e;
  auto number = [&](const std::string& key, const nlohmann::json& v) {
    if (!v.is_number()) throw ParseError("stats entry '" + where + "': " + key + " must be a number");
    return v.get<double>();
  };
  auto flag = [&](const std::string& key, const nlohmann::json& v) {
    if (!v.is_boolean())
      throw ParseError("stats entry '" + where + "': " + key + " must be true or false");
    return v.get<bool>();
  };
  for (const auto& [key, value] : j.items()) {
    if (key == "cost") e.cost = number(key, value);
    else if (key == "selectivity") e.selectivity = number(key, value);
    else if (key == "branch_probability") e.branch_probability = number(key, value);
    else if (key == "loop_count") e.loop_count = number(key, value);
    else if (key == "interrupted_cost") e.interrupted_cost = number(key, value);
    else if (key == "wait_duration") e.wait_duration = number(key, value);
    else if (key == "pipelining") e.pipelining = flag(key, value);
    else if (key == "parallelizable") e.parallelizable = flag(key, value);
    else if (key == "max_degree") {
      double d = number(key, value);
      if (d != std::floor(d) || d > 1e9)
        throw ParseError("stats entry '" + where + "': max_degree must be an integer");
      e.max_degree = static_cast<int>(d);
    } else {
      throw ParseError("stats entry '" + where + "': unknown field '" + key + "'");
    }
  }
  check_entry(e, where);
  return e;
}

inline nlohmann::json entry_to_json(const PartialStatEntry& e) {
  nlohmann::json j = nlohmann::json::object();
  if (e.cost) j["cost"] = *e.cost;
  if (e.selectivity) j["selectivity"] = *e.selectivity;
  if (e.branch_probability) j["branch_probability"] = *e.branch_probability;
  if (e.loop_count) j["loop_count"] = *e.loop_count;
  if (e.interrupted_cost) j["interrupted_cost"] = *e.interrupted_cost;
  if (e.wait_duration) j["wait_duration"] = *e.wait_duration;
  if (e.pipelining) j["pipelining"] = *e.pipelining;
  if (e.parallelizable) j["parallelizable"] = *e.parallelizable;
  if (e.max_degree) j["max_degree"] = *e.max_degree;
  return j;
}

inline std::vector<std::pair<std::string, std::string>> pairs_from_json(const nlohmann::json& j,
                                                                        const std::string& what) {
  if (!j.is_array()) throw ParseError(what + " must be a list of pairs");
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_string())
      throw ParseError(what + " entries must be [\"a\", \"b\"] string pairs");
    out.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
  }
  return out;
}

inline nlohmann::json pairs_to_json(const std::vector<std::pair<std::string, std::string>>& pairs) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [a, b] : pairs) j.push_back({a, b});
  return j;
}

}  // namespace detail

inline StatsCatalog load_stats(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("stats document must be a JSON object");
  StatsCatalog catalog;
  for (const auto& [key, value] : doc.items()) {
    if (key == "defaults") {
      catalog.defaults = detail::entry_from_json(value, "defaults");
    } else if (key == "entries") {
      if (!value.is_object()) throw ParseError("'entries' must be an object keyed by element id");
      for (const auto& [id, entry] : value.items())
        catalog.entries.emplace(id, detail::entry_from_json(entry, id));
    } else if (key == "constraints") {
      if (!value.is_object()) throw ParseError("'constraints' must be an object");
      for (const auto& [kind, list] : value.items()) {
        if (kind == "precedence")
          catalog.constraints.precedence = detail::pairs_from_json(list, "constraints.precedence");
        else if (kind == "exclusion")
          catalog.constraints.exclusion = detail::pairs_from_json(list, "constraints.exclusion");
        else
          throw ParseError("constraints: unknown field '" + kind + "'");
      }
    } else {
      throw ParseError("stats document: unknown field '" + key + "'");
    }
  }
  return catalog;
}

inline StatsCatalog load_stats(std::istream& source) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(source);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed stats document: ") + e.what());
  }
  return load_stats(doc);
}

inline StatsCatalog load_stats_text(const std::string& text) {
  std::istringstream in(text);
  return load_stats(in);
}

inline nlohmann::json stats_to_json(const StatsCatalog& catalog) {
  nlohmann::json doc;
  doc["defaults"] = detail::entry_to_json(catalog.defaults);
  doc["entries"] = nlohmann::json::object();
  for (const auto& [id, e] : catalog.entries) doc["entries"][id] = detail::entry_to_json(e);
  if (!catalog.constraints.precedence.empty() || !catalog.constraints.exclusion.empty()) {
    doc["constraints"]["precedence"] = detail::pairs_to_json(catalog.constraints.precedence);
    doc["constraints"]["exclusion"] = detail::pairs_to_json(catalog.constraints.exclusion);
  }
  return doc;
}

inline std::string serialize_stats(const StatsCatalog& catalog) {
  return stats_to_json(catalog).dump(2) + "\n";
}

/// Field-wise merge of the explicit entry, the catalog defaults and the
/// built-in defaults (cost 0, selectivity 1, pipelining, not parallel).
inline StatEntry resolve_entry(const StatsCatalog& catalog, const std::string& id) {
  static const PartialStatEntry none{};
  const PartialStatEntry* found = catalog.explicit_entry(id);
  const PartialStatEntry& e = found != nullptr ? *found : none;
  const PartialStatEntry& d = catalog.defaults;
  StatEntry out;
  detail::merge_field(out.cost, e.cost, d.cost);
  detail::merge_field(out.selectivity, e.selectivity, d.selectivity);
  detail::merge_field(out.branch_probability, e.branch_probability, d.branch_probability);
  detail::merge_field(out.loop_count, e.loop_count, d.loop_count);
  detail::merge_field(out.interrupted_cost, e.interrupted_cost, d.interrupted_cost);
  detail::merge_field(out.wait_duration, e.wait_duration, d.wait_duration);
  detail::merge_field(out.pipelining, e.pipelining, d.pipelining);
  detail::merge_field(out.parallelizable, e.parallelizable, d.parallelizable);
  detail::merge_field(out.max_degree, e.max_degree, d.max_degree);
  return out;
}

}  // namespace bpmnopt
