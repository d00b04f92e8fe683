#include <gtest/gtest.h>

#include <sstream>

#include "test_support.hpp"

using namespace bpmnopt;
using testing_support::closure_size;
using testing_support::oracle_closure;

namespace {

std::size_t oracle_closure_size(const OrderingInstance& inst) {
  return closure_size(oracle_closure(inst.size(), inst.precedence));
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.n_values = {6, 7};
  c.densities = {0.75, 0.5};
  c.trials = 10;
  c.seed = 9;
  return c;
}

}  // namespace

TEST(GenerateInstance, DensityOneIsFullOrder) {
  ExperimentRng rng(1);
  auto inst = generate_instance(8, 1.0, rng);
  EXPECT_EQ(oracle_closure_size(inst), 28u);
  EXPECT_EQ(brute_force_oracle(inst).candidates, 1u);
}

TEST(GenerateInstance, DensityZeroHasNoPrecedence) {
  ExperimentRng rng(1);
  EXPECT_TRUE(generate_instance(8, 0.0, rng).precedence.empty());
}

TEST(GenerateInstance, ClosureMeetsTargetWithMinimalOvershoot) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    ExperimentRng rng(seed);
    auto inst = generate_instance(10, 0.5, rng);
    const std::size_t size = oracle_closure_size(inst);
    EXPECT_GE(size, 23u);
    // Without its last sampled pair the closure was still below target.
    auto shorter = inst;
    shorter.precedence.pop_back();
    EXPECT_LT(oracle_closure_size(shorter), 23u);
    for (std::size_t i = 0; i < inst.size(); ++i) {
      EXPECT_GE(inst.costs[i], 1.0);
      EXPECT_LE(inst.costs[i], 100.0);
      EXPECT_GE(inst.selectivities[i], 0.01);
      EXPECT_LE(inst.selectivities[i], 2.0);
    }
    for (auto [a, b] : inst.precedence) EXPECT_LT(a, b);
  }
}

TEST(GenerateInstance, SparserConstraintsArePrefixOfDenser) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ExperimentRng a(seed), b(seed);
    auto sparse = generate_instance(9, 0.5, a);
    auto dense = generate_instance(9, 0.75, b);
    EXPECT_EQ(sparse.costs, dense.costs);
    ASSERT_LE(sparse.precedence.size(), dense.precedence.size());
    EXPECT_TRUE(std::equal(sparse.precedence.begin(), sparse.precedence.end(), dense.precedence.begin()));
  }
}

TEST(ConfigCheck, RejectsInvalid) {
  ExperimentConfig c;
  c.densities = {1.5};
  EXPECT_THROW(run_experiment(c), ValidationError);
  c = ExperimentConfig{};
  c.trials = 0;
  EXPECT_THROW(run_experiment(c), ValidationError);
  c = ExperimentConfig{};
  c.n_values = {25};
  EXPECT_THROW(run_experiment(c), ValidationError);
  c = ExperimentConfig{};
  c.sel_min = 0;
  EXPECT_THROW(run_experiment(c), ValidationError);
}

TEST(RunExperiment, SingleFullyConstrainedTrial) {
  ExperimentConfig c;
  c.n_values = {3};
  c.densities = {1.0};
  c.trials = 1;
  auto r = run_experiment(c);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].improvement, 0.0);
}

TEST(RunExperiment, RowsAreOptimalAndAggregatesRecomputable) {
  auto config = small_config();
  auto r = run_experiment(config);
  ASSERT_EQ(r.rows.size(), 40u);
  for (const auto& row : r.rows) {
    EXPECT_LE(row.optimal_cost, row.baseline_cost);
    EXPECT_GE(row.improvement, 0.0);
    EXPECT_LT(row.improvement, 1.0);
    ExperimentRng rng(trial_seed(config.seed, row.n, row.trial));
    auto inst = generate_instance(row.n, row.density, rng, config);
    EXPECT_TRUE(testing_support::near(row.optimal_cost, testing_support::oracle_optimum(inst), 1e-12));
  }
  ASSERT_EQ(r.aggregates.size(), 4u);
  for (const auto& a : r.aggregates) {
    double sum = 0.0, best = 0.0;
    for (const auto& row : r.rows)
      if (row.n == a.n && row.density == a.density) {
        sum += row.improvement;
        best = std::max(best, row.improvement);
      }
    EXPECT_EQ(a.trials, 10u);
    EXPECT_TRUE(testing_support::near(a.mean_improvement, sum / 10));
    EXPECT_EQ(a.max_improvement, best);
  }
}

TEST(RunExperiment, DeterministicAcrossWorkerCounts) {
  auto config = small_config();
  std::ostringstream one, many;
  write_rows_csv(one, run_experiment(config));
  config.jobs = 4;
  write_rows_csv(many, run_experiment(config));
  EXPECT_EQ(one.str(), many.str());
  EXPECT_EQ(one.str().substr(0, one.str().find('\n')), "n,density,trial,baseline_cost,optimal_cost,improvement");
}

TEST(RunExperiment, SparserDensityNeverLessHeadroomPerPairedTrial) {
  auto config = small_config();
  config.trials = 20;
  auto r = run_experiment(config);
  for (const auto& sparse : r.rows) {
    if (sparse.density != 0.5) continue;
    for (const auto& dense : r.rows)
      if (dense.density == 0.75 && dense.n == sparse.n && dense.trial == sparse.trial)
        EXPECT_LE(sparse.optimal_cost, dense.optimal_cost * (1 + 1e-12));
  }
  EXPECT_GE(r.mean_improvement(0.5), r.mean_improvement(0.75));
}

TEST(WriteSummary, ListsEveryDensity) {
  auto config = small_config();
  std::ostringstream out;
  write_summary(out, run_experiment(config), config);
  EXPECT_NE(out.str().find("density 0.75: mean improvement"), std::string::npos);
  EXPECT_NE(out.str().find("density 0.50: mean improvement"), std::string::npos);
}
