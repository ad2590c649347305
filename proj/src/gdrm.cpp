#include "decodecal/gdrm.hpp"

#include <algorithm>

#include "decodecal/rollout.hpp"

namespace decodecal {

void GdrmConfig::validate() const {
  if (max_reasoning_len < 1 || max_answer_len < 1)
    throw Error(ErrorKind::invalid_parameter, "GDRM lengths must be >= 1");
  reasoning_spec.validate();
}

namespace {

TokenId require_think_end(const SequenceModel& model) {
  const auto& te = model.vocabulary().think_end();
  if (!te) throw Error(ErrorKind::configuration, "GDRM needs a vocabulary with think_end");
  return *te;
}

std::size_t reasoning_cap(const SequenceModel& model, const GdrmConfig& cfg) {
  return std::min(cfg.max_reasoning_len, model.max_length());
}

bool trace_closed(const TokenSeq& r, TokenId think_end) {
  return !r.empty() && r.back() == think_end;
}

}  // namespace

TokenSeq gdrm_answer_phase(const SequenceModel& model, const InstanceRef& instance,
                           const TokenSeq& reasoning, const GdrmConfig& cfg) {
  if (!reasoning.empty() && reasoning.back() == model.vocabulary().eos()) return {};
  RolloutOptions opts;
  opts.prefix = reasoning;
  if (cfg.separator) opts.prefix.push_back(*cfg.separator);
  if (opts.prefix.size() >= model.max_length()) return {};
  const std::size_t room = model.max_length() - opts.prefix.size();
  Rng unused(0);
  return rollout(model, instance, StrategySpec::greedy(), unused,
                 std::min(cfg.max_answer_len, room), opts);
}

GdrmResult gdrm_decode(const SequenceModel& model, const InstanceRef& instance,
                       const GdrmConfig& cfg, Rng& rng, const AnswerSpace& space) {
  cfg.validate();
  const TokenId think_end = require_think_end(model);
  const std::size_t cap = reasoning_cap(model, cfg);

  GdrmResult out;
  if (cfg.reasoning_spec.family == Family::beam) {
    BeamOptions bo;
    bo.stop_tokens = {think_end, model.vocabulary().eos()};
    out.reasoning = beam_search(model, instance, static_cast<std::size_t>(cfg.reasoning_spec.alpha),
                                cap, bo)
                        .tokens;
  } else {
    RolloutOptions ro;
    ro.extra_stops = {think_end};
    out.reasoning = rollout(model, instance, cfg.reasoning_spec, rng, cap, ro);
  }
  out.truncated_reasoning = !trace_closed(out.reasoning, think_end);
  out.answer_tokens = gdrm_answer_phase(model, instance, out.reasoning, cfg);
  out.answer = decode_answer(out.answer_tokens, model.vocabulary(), space);
  return out;
}

AnswerDist gdrm_answer_posterior(const SequenceModel& model, const InstanceRef& instance,
                                 const AnswerSpace& space, const GdrmConfig& cfg) {
  cfg.validate();
  if (cfg.reasoning_spec.family == Family::beam) {
    Rng unused(0);
    return AnswerDist::point_mass(gdrm_decode(model, instance, cfg, unused, space).answer);
  }
  const TokenId think_end = require_think_end(model);
  RolloutOptions ro;
  ro.extra_stops = {think_end};
  AnswerDist::Map q;
  for (const auto& [trace, p] : enumerate_sequence_probs(model, instance, cfg.reasoning_spec,
                                                          reasoning_cap(model, cfg), ro)) {
    const TokenSeq answer = gdrm_answer_phase(model, instance, trace, cfg);
    q[decode_answer(answer, model.vocabulary(), space)] += p;
  }
  return AnswerDist(std::move(q));
}

double gdrm_objective(const World& world, const GdrmConfig& cfg) {
  world.validate();
  double total = 0.0;
  for (const Instance& inst : world.instances) {
    const AnswerDist q = gdrm_answer_posterior(*inst.model, inst.ref, inst.space, cfg);
    double j = 0.0;
    for (const auto& [a, w] : q.entries()) j += w * inst.p_true.prob(a);
    total += j;
  }
  return total / static_cast<double>(world.instances.size());
}

double sampled_answer_objective(const World& world, const StrategySpec& spec) {
  world.validate();
  double total = 0.0;
  for (const Instance& inst : world.instances) {
    const AnswerDist q = answer_posterior_q_alpha(*inst.model, inst.ref, spec, inst.space,
                                                  inst.model->max_length());
    double j = 0.0;
    for (const auto& [a, w] : q.entries()) j += w * inst.p_true.prob(a);
    total += j;
  }
  return total / static_cast<double>(world.instances.size());
}

}  // namespace decodecal
