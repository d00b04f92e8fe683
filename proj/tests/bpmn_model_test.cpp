#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace bpmnopt;
using testing_support::load_fixture_process;
using testing_support::read_file;
using testing_support::fixture_path;

namespace {

std::string wrap(const std::string& body) {
  return R"(<?xml version="1.0"?>
<definitions xmlns="http://www.omg.org/spec/BPMN/20100524/MODEL" id="d">
  <process id="p">)" + body + R"(</process>
</definitions>)";
}

}  // namespace

TEST(ParseBpmn, MinimalProcess) {
  auto p = parse_bpmn(wrap(R"(
    <startEvent id="s"/><task id="t"/><endEvent id="e"/>
    <sequenceFlow id="f1" sourceRef="s" targetRef="t"/>
    <sequenceFlow id="f2" sourceRef="t" targetRef="e"/>)"));
  EXPECT_EQ(p.id, "p");
  ASSERT_EQ(p.nodes.size(), 3u);
  EXPECT_EQ(p.flows.size(), 2u);
  EXPECT_EQ(p.nodes[0].kind, NodeKind::StartEvent);
  EXPECT_EQ(p.nodes[1].kind, NodeKind::Task);
  EXPECT_EQ(p.nodes[2].kind, NodeKind::EndEvent);
  EXPECT_TRUE(p.warnings.empty());
}

TEST(ParseBpmn, ThreeDishExclusiveModel) {
  auto p = load_fixture_process("exclusive");
  // start and end events plus 1 task, split, 3 options, merge, 1 task
  std::size_t non_events = 0;
  for (const auto& n : p.nodes)
    if (n.kind != NodeKind::StartEvent && n.kind != NodeKind::EndEvent) ++non_events;
  EXPECT_EQ(non_events, 7u);
  ProcessIndex index(p);
  EXPECT_EQ(index.at("split").kind, NodeKind::ExclusiveGateway);
  EXPECT_EQ(index.outgoing("split").size(), 3u);
  EXPECT_EQ(index.incoming("join").size(), 3u);
}

TEST(ParseBpmn, InterruptingBoundaryAttachment) {
  auto p = load_fixture_process("boundary");
  ASSERT_EQ(p.boundary_attachments.size(), 1u);
  EXPECT_EQ(p.boundary_attachments[0].event, "complaint");
  EXPECT_EQ(p.boundary_attachments[0].host, "deliver");
  EXPECT_TRUE(p.boundary_attachments[0].interrupting);
  auto q = load_fixture_process("boundary_noninterrupting");
  EXPECT_FALSE(q.boundary_attachments[0].interrupting);
}

TEST(ParseBpmn, LoopAndMultiInstanceMarkers) {
  auto p = parse_bpmn(wrap(R"(
    <task id="loop"><standardLoopCharacteristics/></task>
    <userTask id="mi"><multiInstanceLoopCharacteristics isSequential="true">
      <loopCardinality>3</loopCardinality></multiInstanceLoopCharacteristics></userTask>
    <callActivity id="call"/>
    <subProcess id="collapsed"/>)"));
  ProcessIndex index(p);
  EXPECT_EQ(index.at("loop").kind, NodeKind::LoopTask);
  EXPECT_EQ(index.at("mi").kind, NodeKind::MultiInstanceTask);
  EXPECT_EQ(index.at("mi").attribute("loop_cardinality"), "3");
  EXPECT_EQ(index.at("mi").attribute("is_sequential"), "true");
  EXPECT_EQ(index.at("call").kind, NodeKind::CallActivity);
  EXPECT_EQ(index.at("collapsed").kind, NodeKind::SubProcess);
  EXPECT_TRUE(index.at("collapsed").children.empty());
}

TEST(ParseBpmn, NestedSubprocessesAndEvents) {
  auto p = load_fixture_process("event_subprocess");
  ProcessIndex index(p);
  EXPECT_EQ(index.at("guest_arrives").kind, NodeKind::EventSubProcess);
  EXPECT_EQ(index.parent("invite_guest"), "guest_arrives");
  EXPECT_EQ(index.at("guest_start").attribute("trigger"), "message");

  auto t = load_fixture_process("timer_barrier");
  EXPECT_EQ(ProcessIndex(t).at("opening").kind, NodeKind::TimerEvent);
  EXPECT_EQ(ProcessIndex(t).at("opening").attribute("timer_type"), "date");
  auto d = load_fixture_process("timer_delay");
  EXPECT_EQ(ProcessIndex(d).at("rest_meat").attribute("timer_type"), "duration");
  EXPECT_EQ(ProcessIndex(d).at("rest_meat").attribute("timer_value"), "PT10M");
}

TEST(ParseBpmn, CompensationAssociationBecomesNode) {
  auto p = load_fixture_process("compensation");
  ProcessIndex index(p);
  const FlowNode& a = index.at("a1");
  EXPECT_EQ(a.kind, NodeKind::CompensationAssociation);
  EXPECT_EQ(a.attribute("source"), "undo");
  EXPECT_EQ(a.attribute("target"), "cancel_table");
  EXPECT_EQ(a.attribute("host"), "book_table");
  EXPECT_EQ(index.at("cancel_table").attribute("is_for_compensation"), "true");
}

TEST(ParseBpmn, UnsupportedElementsBecomeWarnings) {
  auto p = parse_bpmn(wrap(R"(
    <laneSet id="ls"><lane id="l1"/></laneSet>
    <dataObject id="d1"/>
    <task id="t"/>)"));
  EXPECT_EQ(p.nodes.size(), 1u);
  EXPECT_FALSE(p.warnings.empty());
}

TEST(ParseBpmn, PrefixedAndDefaultNamespacesParseAlike) {
  auto prefixed = load_fixture_process("parallel");
  std::string text = read_file(fixture_path("parallel.bpmn"));
  const std::string decl = "xmlns:bpmn=";
  text.replace(text.find(decl), decl.size(), "xmlns=");
  std::string plain;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text.compare(i, 5, "bpmn:") == 0) {
      i += 4;
      continue;
    }
    plain += text[i];
  }
  auto unprefixed = parse_bpmn(plain);
  EXPECT_EQ(prefixed, unprefixed);
}

TEST(ParseBpmn, Deterministic) {
  std::string text = read_file(fixture_path("gateway_loop.bpmn"));
  EXPECT_EQ(parse_bpmn(text), parse_bpmn(text));
}

TEST(ParseBpmn, Errors) {
  EXPECT_THROW(parse_bpmn(std::string_view("<definitions")), ParseError);
  EXPECT_THROW(parse_bpmn(std::string_view("<root xmlns=\"urn:other\"/>")), ParseError);
  EXPECT_THROW(parse_bpmn(wrap(R"(<task id="a"/><sequenceFlow id="f" sourceRef="a" targetRef="zz"/>)")),
               ParseError);
  EXPECT_THROW(parse_bpmn(wrap(R"(<task id="a"/><task id="a"/>)")), ParseError);
  EXPECT_THROW(parse_bpmn(wrap(R"(<task id="a"/><subProcess id="s"><task id="a"/></subProcess>)")), ParseError);
  EXPECT_THROW(parse_bpmn(wrap(R"(<task id="a"/><exclusiveGateway id="g"/>
    <sequenceFlow id="f" sourceRef="a" targetRef="g"/>)")),
               ParseError);
  EXPECT_THROW(parse_bpmn(wrap(R"(<boundaryEvent id="b" attachedToRef="nowhere"/>)")), ParseError);
}
