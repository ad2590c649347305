#include "decodecal/calibration.hpp"

#include <array>
#include <cmath>
#include <map>

#include <json.hpp>

namespace decodecal {

std::string_view to_string(Mode m) { return m == Mode::exact ? "exact" : "monte_carlo"; }

Mode mode_from_string(std::string_view s) {
  if (s == "exact") return Mode::exact;
  if (s == "monte_carlo" || s == "mc") return Mode::monte_carlo;
  throw Error(ErrorKind::parse, "unknown estimation mode '" + std::string(s) + "'");
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::theorem_applies_and_confirmed: return "theorem_applies_and_confirmed";
    case Verdict::theorem_applies_and_VIOLATED: return "theorem_applies_and_VIOLATED";
    case Verdict::theorem_silent: return "theorem_silent";
  }
  return "theorem_silent";
}

namespace {

constexpr std::size_t kMetricCount = 6;
enum MetricIndex : std::size_t { kJ, kECE, kBS, kG1, kG2, kAcc };
using MetricValues = std::array<double, kMetricCount>;

double joint_raw_probability(const SequenceModel& model, const InstanceRef& ref,
                             const TokenSeq& seq) {
  double p = 1.0;
  TokenSeq prefix;
  for (TokenId t : seq) {
    p *= model.next_distribution(ref, prefix)[t];
    prefix.push_back(t);
  }
  return p;
}

// Integrand of every metric for one answer a with model confidence q.
MetricValues per_answer(const PreparedInstance& inst, const CanonicalAnswer& a, double q,
                        double rel_tol) {
  const double p = inst.instance->p_true.prob(a);
  if (!(q > 0.0))
    throw Error(ErrorKind::degenerate_support,
                "strategy reaches an answer the model assigns zero probability");
  const double gap = q - p;
  const double abs_gap = std::abs(gap);
  const double ece1 = std::abs(inst.q_a1 - inst.p_a1);
  MetricValues v{};
  v[kJ] = p;
  v[kECE] = abs_gap;
  v[kBS] = gap * gap / q;
  v[kG1] = inst.q_a1 - q - abs_gap - ece1;
  v[kG2] = inst.q_a1 - (1.0 + q * q) / (2.0 * q) + gap * gap / (2.0 * q) - ece1;
  v[kAcc] = answers_match(a, inst.gold, rel_tol) ? 1.0 : 0.0;
  return v;
}

Estimate exact_estimate(double v) { return Estimate{v, Mode::exact, std::nullopt, std::nullopt}; }

MetricSet to_metric_set(const MetricValues& v, const MetricValues& se, Mode mode,
                        std::size_t n_samples) {
  auto make = [&](std::size_t i) {
    if (mode == Mode::exact) return exact_estimate(v[i]);
    return Estimate{v[i], Mode::monte_carlo, n_samples, se[i]};
  };
  return MetricSet{make(kJ), make(kECE), make(kBS), make(kG1), make(kG2), make(kAcc)};
}

struct ExactResult {
  MetricValues values{};
  bool greedy_equivalent = true;
};

ExactResult evaluate_exact(const PreparedWorld& world, const StrategySpec& spec, double rel_tol) {
  if (!world.enumerable())
    throw Error(ErrorKind::enumeration_too_large, "exact mode needs an enumerable world");
  ExactResult out;
  for (const PreparedInstance& inst : world.instances()) {
    const AnswerDist q_alpha = strategy_answer_posterior(inst, spec);
    if (q_alpha.prob(inst.a1) < 1.0 - 1e-12) out.greedy_equivalent = false;
    MetricValues acc{};
    for (const auto& [a, w] : q_alpha.entries()) {
      if (w <= 0.0) continue;
      const MetricValues f = per_answer(inst, a, inst.q->prob(a), rel_tol);
      for (std::size_t m = 0; m < kMetricCount; ++m) acc[m] += w * f[m];
    }
    for (std::size_t m = 0; m < kMetricCount; ++m) out.values[m] += acc[m];
  }
  const double n = static_cast<double>(world.instances().size());
  for (double& v : out.values) v /= n;
  return out;
}

struct Moments {
  std::size_t n = 0;
  MetricValues mean{};
  MetricValues m2{};

  void add(const MetricValues& x) {
    ++n;
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      const double d = x[m] - mean[m];
      mean[m] += d / static_cast<double>(n);
      m2[m] += d * (x[m] - mean[m]);
    }
  }
};

MetricSet evaluate_monte_carlo(const PreparedWorld& world, const StrategySpec& spec,
                               const EvalOptions& options) {
  if (options.seeds.empty()) throw Error(ErrorKind::invalid_parameter, "no Monte-Carlo seeds");
  if (options.n_samples == 0) throw Error(ErrorKind::invalid_parameter, "n_samples must be >= 1");
  const auto& insts = world.instances();
  const std::size_t N = insts.size();
  const std::size_t per_instance = std::max<std::size_t>(1, options.n_samples / N);
  const std::string encoding = spec.encode();

  MetricValues seed_sum{};
  MetricValues var_sum{};
  for (const PreparedInstance& inst : insts) {
    const SequenceModel& model = *inst.instance->model;
    const InstanceRef& ref = inst.instance->ref;
    std::map<TokenSeq, MetricValues> memo;
    auto values_for = [&](const TokenSeq& seq) -> const MetricValues& {
      auto it = memo.find(seq);
      if (it != memo.end()) return it->second;
      const CanonicalAnswer a = decode_answer(seq, model.vocabulary(), inst.instance->space);
      const double q = inst.q ? inst.q->prob(a) : joint_raw_probability(model, ref, seq);
      return memo.emplace(seq, per_answer(inst, a, q, options.rel_tol)).first->second;
    };

    if (spec.deterministic()) {
      // Every draw is identical: zero variance, same value for every seed.
      const TokenSeq seq = spec.family == Family::beam
                               ? beam_search(model, ref, static_cast<std::size_t>(spec.alpha),
                                             inst.max_len)
                                     .tokens
                               : inst.greedy_tokens;
      const MetricValues& f = values_for(seq);
      for (std::size_t m = 0; m < kMetricCount; ++m)
        seed_sum[m] += f[m] * static_cast<double>(options.seeds.size());
      continue;
    }

    TruncatedProcess process(model, ref, spec);
    for (std::uint64_t seed : options.seeds) {
      Rng rng(derive_seed(seed, encoding, ref.id));
      Moments mom;
      for (std::size_t s = 0; s < per_instance; ++s)
        mom.add(values_for(rollout(process, rng, inst.max_len)));
      for (std::size_t m = 0; m < kMetricCount; ++m) {
        seed_sum[m] += mom.mean[m];
        if (mom.n > 1) var_sum[m] += mom.m2[m] / static_cast<double>(mom.n - 1) / static_cast<double>(mom.n);
      }
    }
  }

  // Seed estimate = mean over instances; reported value = mean over seeds.
  const double S = static_cast<double>(options.seeds.size());
  const double Nd = static_cast<double>(N);
  MetricValues value{};
  MetricValues se{};
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    value[m] = seed_sum[m] / (S * Nd);
    se[m] = std::sqrt(var_sum[m]) / (Nd * S);
  }
  return to_metric_set(value, se, Mode::monte_carlo, per_instance * N * options.seeds.size());
}

}  // namespace

PreparedWorld::PreparedWorld(const World& world) : world_(&world) {
  world.validate();
  instances_.reserve(world.instances.size());
  for (const Instance& inst : world.instances) {
    PreparedInstance pi;
    pi.instance = &inst;
    pi.max_len = inst.model->max_length();
    Rng unused(0);
    pi.greedy_tokens = rollout(*inst.model, inst.ref, StrategySpec::greedy(), unused, pi.max_len);
    pi.a1 = decode_answer(pi.greedy_tokens, inst.model->vocabulary(), inst.space);
    if (is_enumerable(*inst.model, pi.max_len)) {
      pi.q = model_answer_posterior(*inst.model, inst.ref, inst.space, pi.max_len);
      pi.q_a1 = pi.q->prob(pi.a1);
    } else {
      enumerable_ = false;
      pi.q_a1 = joint_raw_probability(*inst.model, inst.ref, pi.greedy_tokens);
    }
    pi.p_a1 = inst.p_true.prob(pi.a1);
    pi.gold = gold_answer(inst);
    ece1_ += std::abs(pi.q_a1 - pi.p_a1);
    j_greedy_ += pi.p_a1;
    instances_.push_back(std::move(pi));
  }
  const double n = static_cast<double>(instances_.size());
  ece1_ /= n;
  j_greedy_ /= n;
}

AnswerDist strategy_answer_posterior(const PreparedInstance& inst, const StrategySpec& spec) {
  const Instance& in = *inst.instance;
  if (spec.family == Family::beam) {
    spec.validate();
    const BeamResult beam =
        beam_search(*in.model, in.ref, static_cast<std::size_t>(spec.alpha), inst.max_len);
    return AnswerDist::point_mass(decode_answer(beam.tokens, in.model->vocabulary(), in.space));
  }
  if (spec.family == Family::greedy) return AnswerDist::point_mass(inst.a1);
  return answer_posterior_q_alpha(*in.model, in.ref, spec, in.space, inst.max_len);
}

MetricSet evaluate(const PreparedWorld& world, const StrategySpec& spec, const EvalOptions& options) {
  spec.validate();
  if (options.mode == Mode::exact) {
    const ExactResult r = evaluate_exact(world, spec, options.rel_tol);
    return to_metric_set(r.values, {}, Mode::exact, 0);
  }
  return evaluate_monte_carlo(world, spec, options);
}

Estimate objective_j(const World& world, const StrategySpec& spec, const EvalOptions& options) {
  return evaluate(PreparedWorld(world), spec, options).J;
}

Estimate ece(const World& world, const StrategySpec& spec, const EvalOptions& options) {
  return evaluate(PreparedWorld(world), spec, options).ECE;
}

Estimate brier(const World& world, const StrategySpec& spec, const EvalOptions& options) {
  return evaluate(PreparedWorld(world), spec, options).BS;
}

double gap_g1(const World& world, const StrategySpec& spec) {
  return evaluate(PreparedWorld(world), spec).G1.value;
}

double gap_g2(const World& world, const StrategySpec& spec) {
  return evaluate(PreparedWorld(world), spec).G2.value;
}

TheoremReport verify_greedy_optimality(const PreparedWorld& world,
                                       const std::vector<StrategySpec>& grid) {
  if (grid.empty()) throw Error(ErrorKind::invalid_parameter, "strategy grid is empty");
  TheoremReport report;
  report.J_greedy = world.j_greedy();
  bool applies = true;
  bool violated = false;
  for (const StrategySpec& spec : grid) {
    spec.validate();
    const ExactResult r = evaluate_exact(world, spec, kDefaultRelTol);
    TheoremRecord rec;
    rec.spec = spec;
    rec.J = r.values[kJ];
    rec.G1 = r.values[kG1];
    rec.G2 = r.values[kG2];
    rec.cond1_holds = rec.G1 >= 0.0;
    rec.cond2_holds = rec.G2 >= 0.0;
    rec.greedy_equivalent = r.greedy_equivalent;
    if (!rec.greedy_equivalent && !rec.cond1_holds && !rec.cond2_holds) applies = false;
    if (rec.J > report.J_greedy + kVerdictTolerance) violated = true;
    report.records.push_back(rec);
  }
  if (!applies)
    report.verdict = Verdict::theorem_silent;
  else
    report.verdict = violated ? Verdict::theorem_applies_and_VIOLATED
                              : Verdict::theorem_applies_and_confirmed;
  return report;
}

TheoremReport verify_greedy_optimality(const World& world, const std::vector<StrategySpec>& grid) {
  return verify_greedy_optimality(PreparedWorld(world), grid);
}

std::string TheoremReport::to_json() const {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : records) {
    recs.push_back({{"spec", r.spec.encode()},
                    {"J", r.J},
                    {"G1", r.G1},
                    {"G2", r.G2},
                    {"cond1_holds", r.cond1_holds},
                    {"cond2_holds", r.cond2_holds},
                    {"greedy_equivalent", r.greedy_equivalent}});
  }
  nlohmann::json doc{{"records", recs}, {"J_greedy", J_greedy}, {"verdict", to_string(verdict)}};
  return doc.dump(2);
}

std::vector<RankCurvePoint> rank_curve(const PreparedWorld& world, std::size_t k_max) {
  if (k_max < 1) throw Error(ErrorKind::invalid_parameter, "k_max must be >= 1");
  std::vector<RankCurvePoint> out;
  for (std::size_t k = 1; k <= k_max; ++k) {
    const ExactResult r = evaluate_exact(world, StrategySpec::top_k(k), kDefaultRelTol);
    out.push_back({k, r.values[kG1], r.values[kECE]});
  }
  return out;
}

std::size_t max_answer_space(const World& world) {
  std::size_t m = 0;
  for (const auto& inst : world.instances) m = std::max(m, inst.space.size());
  return m;
}

}  // namespace decodecal
