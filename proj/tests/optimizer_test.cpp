#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "test_support.hpp"

using namespace bpmnopt;
using testing_support::near;
using testing_support::oracle_optimum;
using testing_support::random_instance;

namespace {

OrderingInstance make(std::vector<double> costs, std::vector<double> sels,
                      std::vector<std::pair<std::size_t, std::size_t>> prec = {}) {
  OrderingInstance inst;
  inst.id = "test";
  for (std::size_t i = 0; i < costs.size(); ++i) inst.tasks.push_back("t" + std::to_string(i + 1));
  inst.costs = std::move(costs);
  inst.selectivities = std::move(sels);
  inst.precedence = std::move(prec);
  return inst;
}

OrderingInstance full_chain(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> prec;
  for (std::size_t i = 0; i + 1 < n; ++i) prec.emplace_back(i, i + 1);
  return make(std::vector<double>(n, 3.0), std::vector<double>(n, 0.5), prec);
}

Vertex task(const std::string& id, double cost, double sel, VertexKind kind = VertexKind::Ordinary) {
  Vertex v;
  v.id = id;
  v.origin = id;
  v.kind = kind;
  v.cost = cost;
  v.selectivity = sel;
  return v;
}

}  // namespace

TEST(ExactDp, TwoFilters) {
  auto r = optimize_exact_dp(make({1, 1}, {0.1, 0.9}));
  EXPECT_EQ(r.ordering, (std::vector<std::size_t>{0, 1}));
  EXPECT_DOUBLE_EQ(r.cost, 1.1);
  EXPECT_EQ(r.method, SolveMethod::ExactDP);
}

TEST(ExactDp, ThreeTasks) {
  auto inst = make({10, 1, 1}, {1, 0.1, 0.5});
  auto r = optimize_exact_dp(inst);
  EXPECT_EQ(r.ordering, (std::vector<std::size_t>{1, 2, 0}));
  EXPECT_NEAR(r.cost, 1.6, 1e-12);
  auto b = brute_force_oracle(inst);
  EXPECT_EQ(b.ordering, r.ordering);
  EXPECT_EQ(b.cost, r.cost);
  EXPECT_EQ(b.candidates, 6u);
}

TEST(ExactDp, FullChainKeepsBaseline) {
  auto inst = full_chain(6);
  auto r = optimize_exact_dp(inst);
  EXPECT_EQ(r.ordering, inst.baseline_order());
  EXPECT_EQ(r.improvement, 0.0);
}

TEST(ExactDp, Errors) {
  EXPECT_THROW(optimize_exact_dp(make({1, 1}, {1, 1}, {{0, 1}, {1, 0}})), SolverError);
  OrderingInstance big = make(std::vector<double>(25, 1), std::vector<double>(25, 1));
  EXPECT_THROW(optimize_exact_dp(big), SolverError);
  EXPECT_THROW(optimize_exact_dp(make({1, 1}, {1, 0})), SolverError);
  EXPECT_THROW(brute_force_oracle(make(std::vector<double>(11, 1), std::vector<double>(11, 1))), SolverError);
  EXPECT_THROW(optimize_greedy(make({1, 1, 1}, {1, 1, 1}, {{0, 1}, {1, 2}, {2, 0}})), SolverError);
}

TEST(BruteForce, SingleTaskAndChainCount) {
  auto one = brute_force_oracle(make({4}, {0.5}));
  EXPECT_EQ(one.ordering, (std::vector<std::size_t>{0}));
  EXPECT_EQ(one.cost, 4.0);
  auto chain = brute_force_oracle(full_chain(5));
  EXPECT_EQ(chain.candidates, 1u);
}

TEST(ExactDp, MatchesPermutationOracle) {
  std::mt19937_64 rng(101);
  const double densities[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  for (int trial = 0; trial < 150; ++trial) {
    auto inst = random_instance(rng, 1 + trial % 8, densities[trial % 5]);
    auto r = optimize_exact_dp(inst);
    ASSERT_TRUE(is_linear_extension(inst, r.ordering));
    ASSERT_TRUE(near(r.cost, oracle_optimum(inst), 1e-12));
    ASSERT_EQ(r.cost, brute_force_oracle(inst).cost);
    ASSERT_LE(r.cost, r.baseline_cost);
    ASSERT_TRUE(near(r.improvement, 1 - r.cost / r.baseline_cost));
  }
}

TEST(ExactDp, ScalingCostsKeepsOptimalOrdering) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto inst = random_instance(rng, 7, 0.3);
    auto scaled = inst;
    for (double& c : scaled.costs) c *= 8.0;  // power of two: exact
    auto a = optimize_exact_dp(inst);
    auto b = optimize_exact_dp(scaled);
    EXPECT_EQ(a.ordering, b.ordering);
    EXPECT_EQ(b.cost, 8.0 * a.cost);
  }
}

TEST(ExactDp, FifteenTasksUnderOneSecond) {
  std::mt19937_64 rng(3);
  auto inst = random_instance(rng, 15, 0.0);
  auto start = std::chrono::steady_clock::now();
  auto r = optimize_exact_dp(inst);
  auto elapsed = std::chrono::steady_clock::now() - start;
  EXPECT_LT(std::chrono::duration<double>(elapsed).count(), 1.0);
  EXPECT_TRUE(is_linear_extension(inst, r.ordering));
}

TEST(Greedy, Examples) {
  auto r = optimize_greedy(make({1, 1}, {0.9, 0.1}));
  EXPECT_EQ(r.ordering.front(), 1u);
  EXPECT_EQ(r.cost, optimize_exact_dp(make({1, 1}, {0.9, 0.1})).cost);
  auto chain = optimize_greedy(full_chain(7));
  EXPECT_EQ(chain.ordering, full_chain(7).baseline_order());
  EXPECT_EQ(chain.improvement, 0.0);
}

TEST(Greedy, BoundedByBaselineAndOptimum) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    auto inst = random_instance(rng, 2 + trial % 11, 0.2 * (trial % 5));
    auto g = optimize_greedy(inst);
    auto e = optimize_exact_dp(inst);
    ASSERT_TRUE(is_linear_extension(inst, g.ordering));
    ASSERT_LE(g.cost, g.baseline_cost);
    ASSERT_GE(g.cost, e.cost * (1 - 1e-9));
  }
}

TEST(Optimize, DispatchesAndIsDeterministic) {
  auto inst = make({10, 1, 1}, {1, 0.1, 0.5});
  EXPECT_EQ(optimize(inst, SolveMethod::BruteForce).method, SolveMethod::BruteForce);
  EXPECT_EQ(optimize(inst, SolveMethod::Greedy).method, SolveMethod::Greedy);
  EXPECT_EQ(optimize(inst, SolveMethod::ExactDP).ordering, optimize(inst, SolveMethod::ExactDP).ordering);
}

TEST(ExtractInstances, PureChainIsOneInstance) {
  DagBuilder b;
  for (int i = 0; i < 4; ++i) b.add_vertex(task("t" + std::to_string(i), i + 1, 0.5));
  for (int i = 0; i + 1 < 4; ++i) b.add_edge("t" + std::to_string(i), "t" + std::to_string(i + 1));
  b.set_source("t0");
  auto inst = extract_instances(b.build());
  ASSERT_EQ(inst.size(), 1u);
  EXPECT_EQ(inst[0].tasks, (std::vector<std::string>{"t0", "t1", "t2", "t3"}));
  EXPECT_TRUE(inst[0].precedence.empty());
}

TEST(ExtractInstances, CarriesClosedPrecedence) {
  DagBuilder b;
  for (int i = 0; i < 3; ++i) b.add_vertex(task("t" + std::to_string(i), 1, 1));
  b.add_edge("t0", "t1");
  b.add_edge("t1", "t2");
  b.set_source("t0");
  b.constraints().add_precedence("t0", "t1");
  b.constraints().add_precedence("t1", "t2");
  auto inst = extract_instances(b.build());
  ASSERT_EQ(inst.size(), 1u);
  EXPECT_EQ(inst[0].precedence.size(), 3u);
}

TEST(ExtractInstances, ExclusiveBranchesStaySeparate) {
  auto mapped = testing_support::map_fixture("exclusive");
  const auto& dag = mapped.dag();
  const auto& excl = dag.constraints().exclusion;
  for (const auto& inst : extract_instances(dag))
    for (const auto& a : inst.tasks)
      for (const auto& b : inst.tasks) EXPECT_EQ(excl.count({a, b}), 0u) << a << " " << b;
}

TEST(ExtractInstances, NonPipeliningCombinerSplitsSegments) {
  DagBuilder b;
  b.add_vertex(task("a", 1, 0.5));
  b.add_vertex(task("b", 2, 0.5));
  Vertex c = task("join", 0, 1, VertexKind::DummyCombiner);
  c.pipelining = false;
  b.add_vertex(c);
  b.add_vertex(task("x", 3, 0.5));
  b.add_vertex(task("y", 4, 0.5));
  b.add_edge("a", "b");
  b.add_edge("b", "join");
  b.add_edge("join", "x");
  b.add_edge("x", "y");
  b.set_source("a");
  auto inst = extract_instances(b.build());
  ASSERT_EQ(inst.size(), 2u);
  EXPECT_EQ(inst[0].tasks, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(inst[1].tasks, (std::vector<std::string>{"x", "y"}));
}

TEST(ExtractInstances, NeverSpanTimerBarrier) {
  auto mapped = testing_support::map_fixture("timer_barrier");
  ASSERT_EQ(mapped.dags.size(), 2u);
  for (std::size_t k = 0; k < mapped.dags.size(); ++k)
    for (const auto& inst : extract_instances(mapped.dags[k]))
      for (const auto& t : inst.tasks) EXPECT_TRUE(mapped.dags[k].find(t).has_value());
}

TEST(ApplyOrdering, RewiresChainAndMatchesInstanceCost) {
  DagBuilder b;
  b.add_vertex(task("head", 2, 1));
  b.add_vertex(task("a", 10, 1));
  b.add_vertex(task("b", 1, 0.1));
  b.add_vertex(task("c", 1, 0.5));
  b.add_vertex(task("tail", 4, 1));
  b.add_edge("head", "a");
  b.add_edge("a", "b");
  b.add_edge("b", "c");
  b.add_edge("c", "tail");
  b.set_source("head");
  auto dag = b.build();
  auto instances = extract_instances(dag);
  ASSERT_EQ(instances.size(), 1u);
  auto inst = instances[0];
  auto r = optimize_exact_dp(inst);
  auto rewired = apply_ordering(dag, inst, r.ordering);
  EXPECT_TRUE(validate_dag(rewired).ok());
  EXPECT_TRUE(near(evaluate_plan_cost(rewired), evaluate_ordering_cost(inst, r.ordering)));
  EXPECT_LT(evaluate_plan_cost(rewired), evaluate_plan_cost(dag));
  std::vector<std::size_t> bad{1, 1, 0, 2, 3};
  EXPECT_THROW(apply_ordering(dag, inst, bad), SolverError);
}
