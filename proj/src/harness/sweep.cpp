#include "decodecal/harness/sweep.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <thread>

namespace decodecal::harness {

namespace {

struct Task {
  StrategySpec spec;
  std::uint64_t seed;
};

using Values = std::array<double, 6>;
constexpr std::array<const char*, 6> kMetricNames = {"J", "ECE", "BS", "G1", "G2", "accuracy"};

Values values_of(const MetricSet& m) {
  return {m.J.value, m.ECE.value, m.BS.value, m.G1.value, m.G2.value, m.accuracy.value};
}

void run_parallel(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& body) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto loop = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(workers, n);
  if (threads <= 1) {
    loop();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(loop);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

ReportSet run_sweep(const SweepConfig& cfg) {
  cfg.validate();
  const World world = load_world_source(cfg.world);
  return run_sweep(cfg, world);
}

ReportSet run_sweep(const SweepConfig& cfg, const World& world) {
  cfg.validate();
  const PreparedWorld prepared(world);
  if (cfg.mode == Mode::exact && !prepared.enumerable())
    throw Error(ErrorKind::enumeration_too_large, "world is too large for exact mode");

  const bool per_seed = cfg.mode == Mode::monte_carlo;
  std::vector<Task> tasks;
  for (const StrategySpec& base : cfg.grid)
    for (double tau : cfg.temperatures) {
      const StrategySpec spec = base.at_temperature(tau);
      if (per_seed)
        for (std::uint64_t seed : cfg.seeds) tasks.push_back({spec, seed});
      else
        tasks.push_back({spec, 0});
    }

  std::vector<Values> results(tasks.size());
  run_parallel(tasks.size(), cfg.workers, [&](std::size_t i) {
    EvalOptions opts;
    opts.mode = cfg.mode;
    opts.n_samples = cfg.samples;
    opts.seeds = {tasks[i].seed};
    opts.rel_tol = cfg.rel_tol;
    results[i] = values_of(evaluate(prepared, tasks[i].spec, opts));
  });

  ReportSet rs;
  rs.provenance = {cfg.hash(), kToolVersion};
  const std::size_t S = cfg.seeds.size();
  const std::size_t stride = per_seed ? S : 1;
  std::size_t t = 0;
  for (const StrategySpec& base : cfg.grid)
    for (double tau : cfg.temperatures) {
      for (std::size_t m = 0; m < kMetricNames.size(); ++m) {
        std::vector<double> xs(S);
        for (std::size_t s = 0; s < S; ++s) xs[s] = results[t + (per_seed ? s : 0)][m];
        ReportRow row{base.encode(), tau, kMetricNames[m], xs[0], 0.0, S};
        if (std::any_of(xs.begin(), xs.end(), [&](double x) { return x != xs[0]; })) {
          double sum = 0.0;
          for (double x : xs) sum += x;
          row.mean = sum / static_cast<double>(S);
          double ss = 0.0;
          for (double x : xs) ss += (x - row.mean) * (x - row.mean);
          row.std = std::sqrt(ss / static_cast<double>(S - 1));
        }
        rs.rows.push_back(std::move(row));
      }
      t += stride;
    }
  rs.sort();
  return rs;
}

}  // namespace decodecal::harness
