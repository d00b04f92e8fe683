#pragma once

// Synthetic re-ordering study: random chains with random precedence, solved
// exactly, reported as improvement over the generation order.

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "bpmnopt/error.hpp"
#include "bpmnopt/format.hpp"
#include "bpmnopt/optimizer.hpp"
#include "bpmnopt/ordering_instance.hpp"

namespace bpmnopt {

struct ExperimentConfig {
  std::vector<std::size_t> n_values{10, 11, 12, 13, 14, 15};
  std::vector<double> densities{0.75, 0.5};
  std::size_t trials = 100;
  std::uint64_t seed = 42;
  double sel_min = 0.01;
  double sel_max = 2.0;
  double cost_min = 1.0;
  double cost_max = 100.0;
  SolveMethod method = SolveMethod::ExactDP;
  unsigned jobs = 1;

  void check() const {
    if (n_values.empty()) throw ValidationError("experiment: no task counts given");
    for (auto n : n_values)
      if (n < 1 || n > kMaxExactTasks)
        throw ValidationError("experiment: task count " + std::to_string(n) + " outside [1, " +
                              std::to_string(kMaxExactTasks) + "]");
    if (densities.empty()) throw ValidationError("experiment: no densities given");
    for (double d : densities)
      if (!(d >= 0 && d <= 1)) throw ValidationError("experiment: density outside [0,1]");
    if (trials < 1) throw ValidationError("experiment: trials must be at least 1");
    if (!(sel_min > 0 && sel_max >= sel_min)) throw ValidationError("experiment: invalid selectivity range");
    if (!(cost_min > 0 && cost_max >= cost_min)) throw ValidationError("experiment: invalid cost range");
  }
};

struct ExperimentRow {
  std::size_t n = 0;
  double density = 0.0;
  std::size_t trial = 0;
  double baseline_cost = 0.0;
  double optimal_cost = 0.0;
  double improvement = 0.0;
};

struct ExperimentAggregate {
  std::size_t n = 0;
  double density = 0.0;
  std::size_t trials = 0;
  double mean_improvement = 0.0;
  double max_improvement = 0.0;
};

struct ExperimentReport {
  std::vector<ExperimentRow> rows;
  std::vector<ExperimentAggregate> aggregates;  // one per (n, density), config order

  /// Mean improvement over every row with the given density.
  double mean_improvement(double density) const {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& r : rows)
      if (r.density == density) {
        sum += r.improvement;
        ++count;
      }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
  }
  double max_improvement(double density) const {
    double best = 0.0;
    for (const auto& r : rows)
      if (r.density == density) best = std::max(best, r.improvement);
    return best;
  }
};

/// splitmix64 finaliser.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Per-trial seed. Density is deliberately not an input: the instances of one
/// (n, trial) share costs, selectivities and the sampled pair sequence across
/// densities, so a sparser instance's constraints are a prefix of a denser
/// one's.
inline std::uint64_t trial_seed(std::uint64_t seed, std::size_t n, std::size_t trial) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ static_cast<std::uint64_t>(n));
  h = mix64(h ^ static_cast<std::uint64_t>(trial));
  return h;
}

/// Portable draws on top of mt19937_64 (whose raw output is fixed by the
/// standard; the library distributions are not).
class ExperimentRng {
 public:
  explicit ExperimentRng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    double unit = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * unit;
  }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

 private:
  std::mt19937_64 engine_;
};

inline std::size_t constraint_target(std::size_t n, double density) {
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  double target = std::ceil(density * pairs - 1e-9);
  return static_cast<std::size_t>(std::clamp(target, 0.0, pairs));
}

/// Random chain of n tasks. Forward pairs (i < j) are drawn without
/// replacement until the transitive closure holds at least
/// ceil(density * n(n-1)/2) pairs; the last draw may overshoot.
inline OrderingInstance generate_instance(std::size_t n, double density, ExperimentRng& rng,
                                          const ExperimentConfig& ranges = {}) {
  if (!(density >= 0 && density <= 1)) throw ValidationError("density outside [0,1]");
  OrderingInstance inst;
  for (std::size_t i = 0; i < n; ++i) {
    inst.tasks.push_back("t" + std::to_string(i + 1));
    inst.costs.push_back(rng.uniform(ranges.cost_min, ranges.cost_max));
    inst.selectivities.push_back(rng.uniform(ranges.sel_min, ranges.sel_max));
  }

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  for (std::size_t k = pairs.size(); k > 1; --k) std::swap(pairs[k - 1], pairs[rng.below(k)]);

  const std::size_t target = constraint_target(n, density);
  std::vector<std::vector<bool>> closed(n, std::vector<bool>(n, false));
  std::size_t closed_count = 0;
  for (auto [a, b] : pairs) {
    if (closed_count >= target) break;
    if (closed[a][b]) continue;
    inst.precedence.emplace_back(a, b);
    for (std::size_t x = 0; x < n; ++x) {
      if (x != a && !closed[x][a]) continue;
      for (std::size_t y = 0; y < n; ++y) {
        if (y != b && !closed[b][y]) continue;
        if (!closed[x][y]) {
          closed[x][y] = true;
          ++closed_count;
        }
      }
    }
  }
  return inst;
}

inline ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.check();
  struct Job {
    std::size_t n;
    double density;
    std::size_t trial;
  };
  std::vector<Job> jobs;
  for (std::size_t n : config.n_values)
    for (double d : config.densities)
      for (std::size_t t = 0; t < config.trials; ++t) jobs.push_back({n, d, t});

  ExperimentReport report;
  report.rows.resize(jobs.size());
  auto solve = [&](std::size_t k) {
    const Job& job = jobs[k];
    ExperimentRng rng(trial_seed(config.seed, job.n, job.trial));
    OrderingInstance inst = generate_instance(job.n, job.density, rng, config);
    inst.id = "n" + std::to_string(job.n) + "-d" + format_number(job.density) + "-t" + std::to_string(job.trial);
    OptimizationResult r = optimize(inst, config.method);
    report.rows[k] = {job.n, job.density, job.trial, r.baseline_cost, r.cost, r.improvement};
  };

  const unsigned workers = std::max(1U, std::min<unsigned>(config.jobs, static_cast<unsigned>(jobs.size())));
  if (workers == 1) {
    for (std::size_t k = 0; k < jobs.size(); ++k) solve(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < jobs.size(); k = next++) {
          try {
            solve(k);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  for (std::size_t n : config.n_values) {
    for (double d : config.densities) {
      ExperimentAggregate agg{n, d, 0, 0.0, 0.0};
      for (const auto& r : report.rows) {
        if (r.n != n || r.density != d) continue;
        ++agg.trials;
        agg.mean_improvement += r.improvement;
        agg.max_improvement = std::max(agg.max_improvement, r.improvement);
      }
      if (agg.trials > 0) agg.mean_improvement /= static_cast<double>(agg.trials);
      report.aggregates.push_back(agg);
    }
  }
  return report;
}

inline void write_rows_csv(std::ostream& out, const ExperimentReport& report) {
  out << "n,density,trial,baseline_cost,optimal_cost,improvement\n";
  for (const auto& r : report.rows)
    out << r.n << ',' << format_number(r.density) << ',' << r.trial << ',' << format_number(r.baseline_cost) << ','
        << format_number(r.optimal_cost) << ',' << format_number(r.improvement) << '\n';
}

inline void write_aggregates_csv(std::ostream& out, const ExperimentReport& report) {
  out << "n,density,trials,mean_improvement,max_improvement\n";
  for (const auto& a : report.aggregates)
    out << a.n << ',' << format_number(a.density) << ',' << a.trials << ',' << format_number(a.mean_improvement)
        << ',' << format_number(a.max_improvement) << '\n';
}

inline void write_summary(std::ostream& out, const ExperimentReport& report, const ExperimentConfig& config) {
  out << "   n  density  trials  mean_improvement  max_improvement  max_speedup\n";
  for (const auto& a : report.aggregates) {
    const double speedup = a.max_improvement < 1 ? 1.0 / (1.0 - a.max_improvement) : 0.0;
    std::string n = std::to_string(a.n);
    std::string d = format_fixed(a.density, 2);
    std::string t = std::to_string(a.trials);
    std::string mean = format_fixed(100.0 * a.mean_improvement, 2) + "%";
    std::string max = format_fixed(100.0 * a.max_improvement, 2) + "%";
    std::string sp = format_fixed(speedup, 2) + "x";
    out << std::string(4 - std::min<std::size_t>(4, n.size()), ' ') << n << std::string(9 - d.size(), ' ') << d
        << std::string(8 - std::min<std::size_t>(8, t.size()), ' ') << t
        << std::string(18 - std::min<std::size_t>(18, mean.size()), ' ') << mean
        << std::string(17 - std::min<std::size_t>(17, max.size()), ' ') << max
        << std::string(13 - std::min<std::size_t>(13, sp.size()), ' ') << sp << '\n';
  }
  for (double d : config.densities) {
    out << "density " << format_fixed(d, 2) << ": mean improvement " << format_fixed(100.0 * report.mean_improvement(d), 2)
        << "%, max improvement " << format_fixed(100.0 * report.max_improvement(d), 2) << "%\n";
  }
}

}  // namespace bpmnopt
