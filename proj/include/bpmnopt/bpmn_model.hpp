#pragma once

// In-memory model of the BPMN 2.0 subset consumed by the mapper, plus the
// XML reader that produces it. Anything outside the subset is reported in
// BpmnProcess::warnings instead of being dropped silently.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "bpmnopt/error.hpp"

namespace bpmnopt {

inline constexpr std::string_view kBpmnModelNamespace =
    "http://www.omg.org/spec/BPMN/20100524/MODEL";

enum class NodeKind {
  Task,
  LoopTask,
  MultiInstanceTask,
  SubProcess,
  EventSubProcess,
  AdHocSubProcess,
  CallActivity,
  ExclusiveGateway,
  ParallelGateway,
  InclusiveGateway,
  StartEvent,
  EndEvent,
  BoundaryEvent,
  TimerEvent,
  ConditionalEvent,
  MessageEvent,
  SignalEvent,
  TerminateEvent,
  CancelEvent,
  CompensationAssociation,
  // Intermediate events without a performance rule of their own (none,
  // error, escalation, link, compensation throw, multiple). The concrete
  // trigger is kept in the "trigger" attribute.
  IntermediateEvent,
};

inline std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Task: return "Task";
    case NodeKind::LoopTask: return "LoopTask";
    case NodeKind::MultiInstanceTask: return "MultiInstanceTask";
    case NodeKind::SubProcess: return "SubProcess";
    case NodeKind::EventSubProcess: return "EventSubProcess";
    case NodeKind::AdHocSubProcess: return "AdHocSubProcess";
    case NodeKind::CallActivity: return "CallActivity";
    case NodeKind::ExclusiveGateway: return "ExclusiveGateway";
    case NodeKind::ParallelGateway: return "ParallelGateway";
    case NodeKind::InclusiveGateway: return "InclusiveGateway";
    case NodeKind::StartEvent: return "StartEvent";
    case NodeKind::EndEvent: return "EndEvent";
    case NodeKind::BoundaryEvent: return "BoundaryEvent";
    case NodeKind::TimerEvent: return "TimerEvent";
    case NodeKind::ConditionalEvent: return "ConditionalEvent";
    case NodeKind::MessageEvent: return "MessageEvent";
    case NodeKind::SignalEvent: return "SignalEvent";
    case NodeKind::TerminateEvent: return "TerminateEvent";
    case NodeKind::CancelEvent: return "CancelEvent";
    case NodeKind::CompensationAssociation: return "CompensationAssociation";
    case NodeKind::IntermediateEvent: return "IntermediateEvent";
  }
  return "?";
}

inline bool is_subprocess_kind(NodeKind k) {
  return k == NodeKind::SubProcess || k == NodeKind::EventSubProcess ||
         k == NodeKind::AdHocSubProcess;
}

inline bool is_activity_kind(NodeKind k) {
  return k == NodeKind::Task || k == NodeKind::LoopTask ||
         k == NodeKind::MultiInstanceTask || k == NodeKind::CallActivity ||
         is_subprocess_kind(k);
}

inline bool is_gateway_kind(NodeKind k) {
  return k == NodeKind::ExclusiveGateway || k == NodeKind::ParallelGateway ||
         k == NodeKind::InclusiveGateway;
}

struct FlowNode {
  std::string id;
  NodeKind kind = NodeKind::Task;
  std::string name;
  std::vector<FlowNode> children;  // subprocess kinds only
  // Kind-specific payload, e.g. "trigger", "timer_type", "timer_value",
  // "interrupting", "event_based", "loop_cardinality", "source", "target".
  std::map<std::string, std::string> attributes;

  std::optional<std::string> attribute(const std::string& key) const {
    auto it = attributes.find(key);
    if (it == attributes.end()) return std::nullopt;
    return it->second;
  }

  bool operator==(const FlowNode&) const = default;
};

struct SequenceFlow {
  std::string id;
  std::string source;
  std::string target;

  bool operator==(const SequenceFlow&) const = default;
};

struct BoundaryAttachment {
  std::string event;
  std::string host;
  bool interrupting = true;

  bool operator==(const BoundaryAttachment&) const = default;
};

struct BpmnProcess {
  std::string id;
  std::vector<FlowNode> nodes;
  // All sequence flows, including those nested inside subprocesses.
  std::vector<SequenceFlow> flows;
  std::vector<BoundaryAttachment> boundary_attachments;
  std::vector<std::string> warnings;

  bool operator==(const BpmnProcess&) const = default;
};

/// Flat lookup over a process: every node (nested ones included) by id, with
/// the id of its enclosing subprocess ("" for top level). Holds pointers into
/// the process, which must outlive the index.
class ProcessIndex {
 public:
  explicit ProcessIndex(const BpmnProcess& process) : process_(&process) {
    for (const auto& node : process.nodes) add(node, "");
    for (const auto& flow : process.flows) {
      outgoing_[flow.source].push_back(&flow);
      incoming_[flow.target].push_back(&flow);
    }
  }

  const FlowNode* find(const std::string& id) const {
    auto it = nodes_.find(id);
    return it == nodes_.end() ? nullptr : it->second.node;
  }

  const FlowNode& at(const std::string& id) const {
    const FlowNode* node = find(id);
    if (node == nullptr) throw Error("unknown BPMN element '" + id + "'");
    return *node;
  }

  const std::string& parent(const std::string& id) const {
    return nodes_.at(id).parent;
  }

  const std::vector<const SequenceFlow*>& outgoing(const std::string& id) const {
    auto it = outgoing_.find(id);
    return it == outgoing_.end() ? empty_ : it->second;
  }

  const std::vector<const SequenceFlow*>& incoming(const std::string& id) const {
    auto it = incoming_.find(id);
    return it == incoming_.end() ? empty_ : it->second;
  }

  std::vector<const BoundaryAttachment*> boundaries_of(const std::string& host) const {
    std::vector<const BoundaryAttachment*> out;
    for (const auto& b : process_->boundary_attachments)
      if (b.host == host) out.push_back(&b);
    return out;
  }

  /// Ids in document order (parents before children).
  const std::vector<std::string>& ids() const { return order_; }

 private:
  struct Entry {
    const FlowNode* node;
    std::string parent;
  };

  void add(const FlowNode& node, const std::string& parent) {
    if (nodes_.count(node.id) != 0)
      throw ParseError("duplicate identifier '" + node.id + "'");
    nodes_.emplace(node.id, Entry{&node, parent});
    order_.push_back(node.id);
    for (const auto& child : node.children) add(child, node.id);
  }

  const BpmnProcess* process_;
  std::map<std::string, Entry> nodes_;
  std::vector<std::string> order_;
  std::map<std::string, std::vector<const SequenceFlow*>> outgoing_;
  std::map<std::string, std::vector<const SequenceFlow*>> incoming_;
  std::vector<const SequenceFlow*> empty_;
};

namespace detail {

using boost::property_tree::ptree;

struct XmlScope {
  std::map<std::string, std::string> prefixes;  // "" is the default namespace
};

struct QName {
  std::string uri;
  std::string local;
};

inline XmlScope extend_scope(const XmlScope& outer, const ptree& element) {
  XmlScope scope = outer;
  if (auto attrs = element.get_child_optional("<xmlattr>")) {
    for (const auto& [key, value] : *attrs) {
      if (key == "xmlns") {
        scope.prefixes[""] = value.data();
      } else if (key.rfind("xmlns:", 0) == 0) {
        scope.prefixes[key.substr(6)] = value.data();
      }
    }
  }
  return scope;
}

inline QName resolve(const XmlScope& scope, const std::string& name) {
  auto colon = name.find(':');
  std::string prefix = colon == std::string::npos ? "" : name.substr(0, colon);
  std::string local = colon == std::string::npos ? name : name.substr(colon + 1);
  auto it = scope.prefixes.find(prefix);
  return {it == scope.prefixes.end() ? std::string() : it->second, local};
}

inline std::optional<std::string> xml_attr(const ptree& element, const std::string& key) {
  if (auto attrs = element.get_child_optional("<xmlattr>")) {
    for (const auto& [k, v] : *attrs) {
      // Attributes may carry a namespace prefix (e.g. camunda:...); BPMN
      // attributes are unqualified.
      if (k == key) return v.data();
    }
  }
  return std::nullopt;
}

inline std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return c != ' ' && c != '\t' && c != '\n' && c != '\r'; };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

struct ChildElement {
  QName name;
  const ptree* tree;
  XmlScope scope;
};

inline std::vector<ChildElement> child_elements(const ptree& element, const XmlScope& scope) {
  std::vector<ChildElement> out;
  for (const auto& [key, child] : element) {
    if (key == "<xmlattr>" || key == "<xmlcomment>" || key == "<xmltext>") continue;
    XmlScope inner = extend_scope(scope, child);
    out.push_back({resolve(inner, key), &child, std::move(inner)});
  }
  return out;
}

// Elements that only annotate their parent and never carry flow semantics.
inline bool is_silent_annotation(const std::string& local) {
  static const std::set<std::string> names = {
      "documentation", "extensionElements", "incoming", "outgoing",
      "conditionExpression", "completionCondition"};
  return names.count(local) != 0;
}

// Root-level definitions that flow nodes may reference (messages, signals,
// errors...). They are needed by other elements, not unsupported.
inline bool is_supporting_definition(const std::string& local) {
  static const std::set<std::string> names = {
      "message", "signal", "error", "escalation", "itemDefinition", "resource",
      "interface", "dataStore", "category", "import"};
  return names.count(local) != 0;
}

inline const std::set<std::string>& plain_task_names() {
  static const std::set<std::string> names = {
      "task", "userTask", "serviceTask", "manualTask", "scriptTask",
      "businessRuleTask", "sendTask", "receiveTask"};
  return names;
}

inline const std::map<std::string, std::string>& event_definition_triggers() {
  static const std::map<std::string, std::string> names = {
      {"messageEventDefinition", "message"},
      {"timerEventDefinition", "timer"},
      {"signalEventDefinition", "signal"},
      {"conditionalEventDefinition", "conditional"},
      {"errorEventDefinition", "error"},
      {"escalationEventDefinition", "escalation"},
      {"compensateEventDefinition", "compensate"},
      {"cancelEventDefinition", "cancel"},
      {"terminateEventDefinition", "terminate"},
      {"linkEventDefinition", "link"},
  };
  return names;
}

class Reader {
 public:
  explicit Reader(BpmnProcess& out) : out_(out) {}

  void read_scope(const ptree& element, const XmlScope& scope, std::vector<FlowNode>& nodes,
                  const std::string& scope_name) {
    for (const auto& child : child_elements(element, scope)) {
      if (child.name.uri != kBpmnModelNamespace) {
        warn("foreign element '" + child.name.local + "' in " + scope_name + " ignored");
        continue;
      }
      const std::string& local = child.name.local;
      if (is_silent_annotation(local)) continue;
      if (local == "sequenceFlow") {
        read_flow(*child.tree);
      } else if (local == "association") {
        read_association(*child.tree, nodes);
      } else if (auto node = read_node(child)) {
        nodes.push_back(std::move(*node));
      } else {
        warn("unsupported element '" + local + "'" + id_suffix(*child.tree) + " in " +
             scope_name + " ignored");
      }
    }
  }

  void warn(std::string message) { out_.warnings.push_back(std::move(message)); }

  // Associations are resolved once all nodes are known.
  struct PendingAssociation {
    std::string id;
    std::string source;
    std::string target;
    std::vector<FlowNode>* scope;
  };
  std::vector<PendingAssociation> associations;

 private:
  static std::string id_suffix(const ptree& tree) {
    auto id = xml_attr(tree, "id");
    return id ? " (id=" + *id + ")" : "";
  }

  std::string require_id(const ptree& tree, const std::string& what) {
    auto id = xml_attr(tree, "id");
    if (!id || id->empty()) throw ParseError(what + " element without an id");
    return *id;
  }

  void read_flow(const ptree& tree) {
    SequenceFlow flow;
    flow.id = require_id(tree, "sequenceFlow");
    auto src = xml_attr(tree, "sourceRef");
    auto dst = xml_attr(tree, "targetRef");
    if (!src || !dst)
      throw ParseError("sequence flow '" + flow.id + "' lacks sourceRef/targetRef");
    flow.source = *src;
    flow.target = *dst;
    out_.flows.push_back(std::move(flow));
  }

  void read_association(const ptree& tree, std::vector<FlowNode>& scope) {
    PendingAssociation a;
    a.id = xml_attr(tree, "id").value_or("association_" + std::to_string(associations.size()));
    a.source = xml_attr(tree, "sourceRef").value_or("");
    a.target = xml_attr(tree, "targetRef").value_or("");
    a.scope = &scope;
    associations.push_back(std::move(a));
  }

  // Reads the event definitions and activity markers below a flow node.
  void read_node_details(const ChildElement& el, FlowNode& node) {
    std::vector<std::string> triggers;
    for (const auto& child : child_elements(*el.tree, el.scope)) {
      if (child.name.uri != kBpmnModelNamespace) continue;
      const std::string& local = child.name.local;
      if (is_silent_annotation(local)) continue;
      auto trig = event_definition_triggers().find(local);
      if (trig != event_definition_triggers().end()) {
        triggers.push_back(trig->second);
        if (trig->second == "timer") read_timer(child, node);
        continue;
      }
      if (local == "standardLoopCharacteristics") {
        node.attributes["loop"] = "standard";
        if (auto m = xml_attr(*child.tree, "loopMaximum")) node.attributes["loop_maximum"] = *m;
        continue;
      }
      if (local == "multiInstanceLoopCharacteristics") {
        node.attributes["loop"] = "multi";
        node.attributes["is_sequential"] =
            xml_attr(*child.tree, "isSequential").value_or("false");
        for (const auto& grand : child_elements(*child.tree, child.scope)) {
          if (grand.name.local == "loopCardinality")
            node.attributes["loop_cardinality"] = trim(grand.tree->data());
        }
        continue;
      }
      if (is_subprocess_kind(node.kind)) continue;  // contents read by read_scope
      warn("unsupported element '" + local + "' inside '" + node.id + "' ignored");
    }
    if (!triggers.empty()) {
      node.attributes["trigger"] = triggers.size() == 1 ? triggers.front() : "multiple";
    }
  }

  void read_timer(const ChildElement& el, FlowNode& node) {
    for (const auto& child : child_elements(*el.tree, el.scope)) {
      const std::string& local = child.name.local;
      if (local == "timeDate" || local == "timeDuration" || local == "timeCycle") {
        node.attributes["timer_type"] = local == "timeDate"       ? "date"
                                        : local == "timeDuration" ? "duration"
                                                                  : "cycle";
        node.attributes["timer_value"] = trim(child.tree->data());
      }
    }
  }

  std::optional<FlowNode> read_node(const ChildElement& el) {
    const std::string& local = el.name.local;
    const ptree& tree = *el.tree;
    FlowNode node;

    bool is_task = plain_task_names().count(local) != 0;
    bool is_event = local == "startEvent" || local == "endEvent" ||
                    local == "intermediateCatchEvent" || local == "intermediateThrowEvent" ||
                    local == "boundaryEvent";
    bool is_gateway = local == "exclusiveGateway" || local == "parallelGateway" ||
                      local == "inclusiveGateway" || local == "eventBasedGateway" ||
                      local == "complexGateway";
    bool is_sub = local == "subProcess" || local == "adHocSubProcess" || local == "transaction";
    if (!is_task && !is_event && !is_gateway && !is_sub && local != "callActivity")
      return std::nullopt;

    node.id = require_id(tree, local);
    node.name = xml_attr(tree, "name").value_or("");
    node.attributes["element"] = local;

    if (is_task || local == "callActivity") {
      node.kind = is_task ? NodeKind::Task : NodeKind::CallActivity;
      if (auto comp = xml_attr(tree, "isForCompensation"))
        node.attributes["is_for_compensation"] = *comp;
      if (auto called = xml_attr(tree, "calledElement")) node.attributes["called_element"] = *called;
      read_node_details(el, node);
      auto loop = node.attribute("loop");
      if (loop == "standard") node.kind = NodeKind::LoopTask;
      if (loop == "multi") node.kind = NodeKind::MultiInstanceTask;
      return node;
    }

    if (is_gateway) {
      if (local == "exclusiveGateway" || local == "eventBasedGateway") {
        node.kind = NodeKind::ExclusiveGateway;
        if (local == "eventBasedGateway") node.attributes["event_based"] = "true";
      } else if (local == "parallelGateway") {
        node.kind = NodeKind::ParallelGateway;
      } else {
        node.kind = NodeKind::InclusiveGateway;
        if (local == "complexGateway")
          warn("complex gateway '" + node.id + "' treated as an inclusive gateway");
      }
      if (auto dir = xml_attr(tree, "gatewayDirection")) node.attributes["direction"] = *dir;
      return node;
    }

    if (is_sub) {
      if (local == "adHocSubProcess") {
        node.kind = NodeKind::AdHocSubProcess;
      } else if (xml_attr(tree, "triggeredByEvent").value_or("false") == "true") {
        node.kind = NodeKind::EventSubProcess;
      } else {
        node.kind = NodeKind::SubProcess;
      }
      if (local == "transaction") node.attributes["transaction"] = "true";
      read_node_details(el, node);
      read_scope(tree, el.scope, node.children, "subprocess '" + node.id + "'");
      return node;
    }

    // Events.
    read_node_details(el, node);
    std::string trigger = node.attribute("trigger").value_or("none");
    if (local == "startEvent") {
      node.kind = NodeKind::StartEvent;
      node.attributes["interrupting"] = xml_attr(tree, "isInterrupting").value_or("true");
    } else if (local == "boundaryEvent") {
      node.kind = NodeKind::BoundaryEvent;
      auto host = xml_attr(tree, "attachedToRef");
      if (!host) throw ParseError("boundary event '" + node.id + "' lacks attachedToRef");
      bool interrupting = xml_attr(tree, "cancelActivity").value_or("true") != "false";
      node.attributes["attached_to"] = *host;
      node.attributes["interrupting"] = interrupting ? "true" : "false";
      out_.boundary_attachments.push_back({node.id, *host, interrupting});
    } else if (trigger == "terminate") {
      node.kind = NodeKind::TerminateEvent;
    } else if (trigger == "cancel") {
      node.kind = NodeKind::CancelEvent;
    } else if (local == "endEvent") {
      node.kind = NodeKind::EndEvent;
    } else if (trigger == "timer") {
      node.kind = NodeKind::TimerEvent;
    } else if (trigger == "conditional") {
      node.kind = NodeKind::ConditionalEvent;
    } else if (trigger == "message") {
      node.kind = NodeKind::MessageEvent;
    } else if (trigger == "signal") {
      node.kind = NodeKind::SignalEvent;
    } else {
      node.kind = NodeKind::IntermediateEvent;
    }
    node.attributes["trigger"] = trigger;
    return node;
  }

  BpmnProcess& out_;
};

inline void validate(BpmnProcess& process) {
  ProcessIndex index(process);  // throws on duplicate ids

  for (const auto& flow : process.flows) {
    const FlowNode* src = index.find(flow.source);
    const FlowNode* dst = index.find(flow.target);
    if (src == nullptr || dst == nullptr)
      throw ParseError("sequence flow '" + flow.id + "' references unknown element '" +
                       (src == nullptr ? flow.source : flow.target) + "'");
    if (index.parent(flow.source) != index.parent(flow.target))
      throw ParseError("sequence flow '" + flow.id + "' crosses a subprocess boundary");
  }
  for (const auto& b : process.boundary_attachments) {
    const FlowNode* host = index.find(b.host);
    if (host == nullptr || !is_activity_kind(host->kind))
      throw ParseError("boundary event '" + b.event + "' is attached to unknown activity '" +
                       b.host + "'");
  }
  for (const auto& id : index.ids()) {
    const FlowNode& node = index.at(id);
    if (!is_gateway_kind(node.kind)) continue;
    if (index.outgoing(id).empty())
      throw ParseError("gateway '" + id + "' has no outgoing sequence flow");
    if (index.incoming(id).empty())
      throw ParseError("gateway '" + id + "' has no incoming sequence flow");
  }
}

}  // namespace detail

/// Parses a BPMN 2.0 XML document and returns its first process.
inline BpmnProcess parse_bpmn(std::istream& source) {
  namespace pt = boost::property_tree;
  pt::ptree doc;
  try {
    pt::read_xml(source, doc);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError(std::string("malformed XML: ") + e.what());
  }

  BpmnProcess process;
  detail::Reader reader(process);
  auto roots = detail::child_elements(doc, {});
  if (roots.size() != 1 || roots.front().name.local != "definitions" ||
      roots.front().name.uri != kBpmnModelNamespace)
    throw ParseError("document root is not a BPMN 2.0 <definitions> element");

  const auto& root = roots.front();
  bool have_process = false;
  for (const auto& child : detail::child_elements(*root.tree, root.scope)) {
    const std::string& local = child.name.local;
    if (child.name.uri != kBpmnModelNamespace) {
      reader.warn("foreign element '" + local + "' ignored");
      continue;
    }
    if (local == "process") {
      if (have_process) {
        reader.warn("additional process '" + detail::xml_attr(*child.tree, "id").value_or("") +
                    "' ignored; only the first process is mapped");
        continue;
      }
      have_process = true;
      process.id = detail::xml_attr(*child.tree, "id").value_or("process");
      reader.read_scope(*child.tree, child.scope, process.nodes, "process '" + process.id + "'");
    } else if (local == "BPMNDiagram") {
      reader.warn("diagram interchange (BPMNDiagram) ignored");
    } else if (local == "collaboration") {
      reader.warn("collaboration ignored; pools and cross-pool message flows are not mapped");
    } else if (!detail::is_supporting_definition(local) && !detail::is_silent_annotation(local)) {
      reader.warn("unsupported root element '" + local + "' ignored");
    }
  }
  if (!have_process) throw ParseError("document contains no <process>");

  // Compensation associations become nodes; other associations only
  // annotate the diagram.
  {
    ProcessIndex index(process);
    std::vector<std::pair<std::vector<FlowNode>*, FlowNode>> placed;
    for (const auto& a : reader.associations) {
      const FlowNode* src = index.find(a.source);
      if (src != nullptr && src->kind == NodeKind::BoundaryEvent &&
          src->attribute("trigger") == "compensate") {
        if (index.find(a.target) == nullptr)
          throw ParseError("compensation association '" + a.id + "' references unknown element '" +
                           a.target + "'");
        FlowNode node;
        node.id = a.id;
        node.kind = NodeKind::CompensationAssociation;
        node.attributes["source"] = a.source;
        node.attributes["target"] = a.target;
        node.attributes["host"] = src->attribute("attached_to").value_or("");
        placed.emplace_back(a.scope, std::move(node));
      } else {
        process.warnings.push_back("association '" + a.id + "' ignored");
      }
    }
    // The index holds pointers into the node vectors; append only after
    // it is no longer used.
    for (auto& [scope, node] : placed) scope->push_back(std::move(node));
  }

  detail::validate(process);
  return process;
}

inline BpmnProcess parse_bpmn(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_bpmn(in);
}

}  // namespace bpmnopt
