#pragma once

/**
 * Strategy-conditioned calibration metrics and the greedy-optimality gap
 * functionals, computed exactly (by enumeration) or by Monte-Carlo rollouts.
 *
 * For a strategy alpha with answer posterior q^alpha, model posterior q,
 * ground truth p and greedy answer a1 = D(greedy rollout), per instance:
 *
 *   J     = E_{a~q^alpha} p(a)
 *   ECE   = E_{a~q^alpha} |q(a) - p(a)|            ECE1 = |q(a1) - p(a1)|
 *   BS    = E_{a~q^alpha} (q(a) - p(a))^2 / q(a)
 *   G1    = E_{a~q^alpha} [q(a1) - q(a)] - ECE1 - ECE
 *   G2    = E_{a~q^alpha} [q(a1) - (1 + q(a)^2) / (2 q(a))] - ECE1 + BS / 2
 *
 * and every world-level value is the uniform mean over instances, summed
 * in instance order.
 */

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "decodecal/core.hpp"
#include "decodecal/rollout.hpp"
#include "decodecal/strategies.hpp"
#include "decodecal/worlds.hpp"

namespace decodecal {

enum class Mode : std::uint8_t { exact, monte_carlo };

std::string_view to_string(Mode m);
Mode mode_from_string(std::string_view s);

struct Estimate {
  double value = 0.0;
  Mode mode = Mode::exact;
  // Monte-Carlo only.
  std::optional<std::size_t> n_samples;
  std::optional<double> std_error;
};

struct EvalOptions {
  Mode mode = Mode::exact;
  // Monte-Carlo draws per seed, spread evenly across instances.
  std::size_t n_samples = 100000;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3};
  double rel_tol = kDefaultRelTol;
};

struct MetricSet {
  Estimate J;
  Estimate ECE;
  Estimate BS;
  Estimate G1;
  Estimate G2;
  // Soft-match accuracy against the gold answer (argmax of p).
  Estimate accuracy;
};

// Per-instance quantities shared by every strategy.
struct PreparedInstance {
  const Instance* instance = nullptr;
  std::size_t max_len = 0;
  // Model posterior; absent when the model is too large to enumerate.
  std::optional<AnswerDist> q;
  CanonicalAnswer a1 = CanonicalAnswer::sentinel();
  TokenSeq greedy_tokens;
  double q_a1 = 0.0;
  double p_a1 = 0.0;
  CanonicalAnswer gold = CanonicalAnswer::sentinel();
};

class PreparedWorld {
 public:
  explicit PreparedWorld(const World& world);

  const World& world() const noexcept { return *world_; }
  const std::vector<PreparedInstance>& instances() const noexcept { return instances_; }
  bool enumerable() const noexcept { return enumerable_; }

  double ece1() const noexcept { return ece1_; }
  double j_greedy() const noexcept { return j_greedy_; }

 private:
  const World* world_;
  std::vector<PreparedInstance> instances_;
  bool enumerable_ = true;
  double ece1_ = 0.0;
  double j_greedy_ = 0.0;
};

// q^alpha for any spec; beam specs give a point mass on the beam answer.
AnswerDist strategy_answer_posterior(const PreparedInstance& inst, const StrategySpec& spec);

MetricSet evaluate(const PreparedWorld& world, const StrategySpec& spec,
                   const EvalOptions& options = {});

Estimate objective_j(const World& world, const StrategySpec& spec, const EvalOptions& options = {});
Estimate ece(const World& world, const StrategySpec& spec, const EvalOptions& options = {});
Estimate brier(const World& world, const StrategySpec& spec, const EvalOptions& options = {});
double gap_g1(const World& world, const StrategySpec& spec);
double gap_g2(const World& world, const StrategySpec& spec);

// Absolute slack on J comparisons in the verdict.
inline constexpr double kVerdictTolerance = 1e-12;

enum class Verdict : std::uint8_t {
  theorem_applies_and_confirmed,
  theorem_applies_and_VIOLATED,
  theorem_silent,
};

std::string_view to_string(Verdict v);

struct TheoremRecord {
  StrategySpec spec;
  double J = 0.0;
  double G1 = 0.0;
  double G2 = 0.0;
  bool cond1_holds = false;
  bool cond2_holds = false;
  // q^alpha is the greedy point mass on every instance; such specs are the
  // greedy strategy itself and do not need either condition.
  bool greedy_equivalent = false;
};

struct TheoremReport {
  std::vector<TheoremRecord> records;
  double J_greedy = 0.0;
  Verdict verdict = Verdict::theorem_silent;

  std::string to_json() const;
};

TheoremReport verify_greedy_optimality(const World& world, const std::vector<StrategySpec>& grid);
TheoremReport verify_greedy_optimality(const PreparedWorld& world,
                                       const std::vector<StrategySpec>& grid);

struct RankCurvePoint {
  std::size_t k = 0;
  double G1 = 0.0;
  double ECE = 0.0;
};

// Exact G1 and ECE of top_k(k) for k = 1..k_max.
std::vector<RankCurvePoint> rank_curve(const PreparedWorld& world, std::size_t k_max);

// Largest answer-space size over the world's instances.
std::size_t max_answer_space(const World& world);

}  // namespace decodecal
