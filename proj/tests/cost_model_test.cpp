#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

using namespace bpmnopt;

namespace {

Vertex task(const std::string& id, double cost, double sel) {
  Vertex v;
  v.id = id;
  v.origin = id;
  v.cost = cost;
  v.selectivity = sel;
  return v;
}

OrderingInstance two_tasks(std::vector<double> costs, std::vector<double> sels) {
  OrderingInstance inst;
  inst.tasks = {"t1", "t2"};
  inst.costs = std::move(costs);
  inst.selectivities = std::move(sels);
  return inst;
}

TokenFlowDag chain_of(const OrderingInstance& inst, const std::vector<std::size_t>& order) {
  DagBuilder b;
  for (std::size_t i : order) b.add_vertex(task(inst.tasks[i], inst.costs[i], inst.selectivities[i]));
  for (std::size_t k = 0; k + 1 < order.size(); ++k) b.add_edge(inst.tasks[order[k]], inst.tasks[order[k + 1]]);
  b.set_source(inst.tasks[order.front()]);
  return b.build();
}

}  // namespace

TEST(PlanCost, Examples) {
  DagBuilder b;
  b.add_vertex(task("A", 10, 0.5));
  b.add_vertex(task("B", 20, 1));
  b.add_edge("A", "B");
  b.set_source("A");
  EXPECT_DOUBLE_EQ(evaluate_plan_cost(b.build()), 20.0);

  DagBuilder single;
  single.add_vertex(task("only", 7.5, 0.3));
  single.set_source("only");
  EXPECT_DOUBLE_EQ(evaluate_plan_cost(single.build()), 7.5);
}

TEST(PlanCost, AdHocShape) {
  DagBuilder b;
  Vertex src = task("src", 0, 1);
  src.kind = VertexKind::DummyFilter;
  b.add_vertex(src);
  Vertex join = task("join", 0, 0.25);
  join.kind = VertexKind::DummyCombiner;
  join.pipelining = false;
  b.add_vertex(join);
  b.add_vertex(task("after", 8, 1));
  for (int i = 0; i < 4; ++i) {
    std::string t = "t" + std::to_string(i);
    b.add_vertex(task(t, 1, 1));
    b.add_edge("src", t);
    b.add_edge(t, "join");
  }
  b.add_edge("join", "after");
  b.set_source("src");
  EXPECT_DOUBLE_EQ(evaluate_plan_cost(b.build()), 12.0);
}

TEST(PlanCost, RejectsInvalidDag) {
  DagBuilder b;
  b.add_vertex(task("A", 1, 1));
  b.set_source("missing");
  EXPECT_THROW(evaluate_plan_cost(b.build()), ValidationError);
}

TEST(OrderingCost, Examples) {
  auto inst = two_tasks({10, 20}, {0.5, 1});
  std::vector<std::size_t> forward{0, 1};
  std::vector<std::size_t> backward{1, 0};
  EXPECT_DOUBLE_EQ(evaluate_ordering_cost(inst, forward), 20.0);
  EXPECT_DOUBLE_EQ(evaluate_ordering_cost(inst, backward), 30.0);

  auto filters = two_tasks({1, 1}, {0.1, 0.9});
  EXPECT_DOUBLE_EQ(evaluate_ordering_cost(filters, forward), 1.1);
  EXPECT_DOUBLE_EQ(evaluate_ordering_cost(filters, backward), 1.9);

  std::vector<std::size_t> bad{0, 0};
  EXPECT_THROW(evaluate_ordering_cost(inst, bad), SolverError);
  std::vector<std::size_t> short_order{0};
  EXPECT_THROW(evaluate_ordering_cost(inst, short_order), SolverError);
}

TEST(OrderingCost, EqualsChainPlanCostAndOracle) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    auto inst = testing_support::random_instance(rng, 1 + trial % 10, 0.0);
    std::vector<std::size_t> order(inst.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    const double by_order = evaluate_ordering_cost(inst, order);
    EXPECT_EQ(by_order, evaluate_plan_cost(chain_of(inst, order)));
    EXPECT_TRUE(testing_support::near(
        by_order, testing_support::oracle_chain_cost(inst.costs, inst.selectivities, order), 1e-12));
  }
}

TEST(OrderingCost, MetricProperties) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    auto inst = testing_support::random_instance(rng, 2 + trial % 8, 0.0);
    std::vector<std::size_t> order(inst.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const double cost = evaluate_ordering_cost(inst, order);
    EXPECT_GE(cost, inst.costs[order[0]]);

    // Adjacent unit-selectivity tasks commute.
    auto unit = inst;
    unit.selectivities[0] = unit.selectivities[1] = 1.0;
    std::vector<std::size_t> swapped = order;
    std::swap(swapped[0], swapped[1]);
    EXPECT_TRUE(testing_support::near(evaluate_ordering_cost(unit, order), evaluate_ordering_cost(unit, swapped)));

    // All selectivities at most 1: metric bounded by the sum of costs.
    auto filtering = inst;
    double sum = 0.0;
    for (std::size_t i = 0; i < filtering.size(); ++i) {
      filtering.selectivities[i] = 0.01 + 0.99 * u(rng);
      sum += filtering.costs[i];
    }
    EXPECT_LE(evaluate_ordering_cost(filtering, order), sum * (1 + 1e-12));
  }
}
