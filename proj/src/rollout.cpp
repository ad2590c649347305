#include "decodecal/rollout.hpp"

#include <algorithm>
#include <cmath>

namespace decodecal {

TruncatedProcess::TruncatedProcess(const SequenceModel& model, InstanceRef instance,
                                   StrategySpec spec)
    : model_(&model), instance_(std::move(instance)), spec_(spec) {
  if (spec_.family == Family::beam)
    throw Error(ErrorKind::invalid_parameter, "beam search is not a sampling process");
  spec_.validate();
}

const ProbVector& TruncatedProcess::step(const TokenSeq& prefix) {
  auto it = cache_.find(prefix);
  if (it != cache_.end()) return it->second;
  ProbVector dist = truncated_distribution(model_->next_distribution(instance_, prefix), spec_);
  return cache_.emplace(prefix, std::move(dist)).first->second;
}

namespace {

bool is_stop(const Vocabulary& vocab, const RolloutOptions& options, TokenId t) {
  return t == vocab.eos() ||
         std::find(options.extra_stops.begin(), options.extra_stops.end(), t) !=
             options.extra_stops.end();
}

}  // namespace

TokenSeq rollout(TruncatedProcess& process, Rng& rng, std::size_t max_len,
                 const RolloutOptions& options) {
  const Vocabulary& vocab = process.model().vocabulary();
  const bool greedy = process.spec().family == Family::greedy;
  TokenSeq context = options.prefix;
  const std::size_t start = context.size();
  while (context.size() - start < max_len) {
    const ProbVector& dist = process.step(context);
    const TokenId t = greedy ? greedy_token(dist) : sample_token(dist, rng);
    context.push_back(t);
    if (is_stop(vocab, options, t)) break;
  }
  return TokenSeq(context.begin() + static_cast<long>(start), context.end());
}

TokenSeq rollout(const SequenceModel& model, const InstanceRef& instance, const StrategySpec& spec,
                 Rng& rng, std::size_t max_len, const RolloutOptions& options) {
  TruncatedProcess process(model, instance, spec);
  return rollout(process, rng, max_len, options);
}

bool is_enumerable(const SequenceModel& model, std::size_t max_len) noexcept {
  const double leaves =
      std::pow(static_cast<double>(model.vocabulary().size()), static_cast<double>(max_len));
  return leaves <= kEnumerationGuard;
}

void check_enumerable(const SequenceModel& model, std::size_t max_len) {
  if (!is_enumerable(model, max_len))
    throw Error(ErrorKind::enumeration_too_large,
                "vocabulary " + std::to_string(model.vocabulary().size()) + " ^ length " +
                    std::to_string(max_len) + " exceeds the enumeration guard");
}

SequenceProbs enumerate_sequence_probs(const SequenceModel& model, const InstanceRef& instance,
                                       const StrategySpec& spec, std::size_t max_len,
                                       const RolloutOptions& options) {
  check_enumerable(model, max_len);
  TruncatedProcess process(model, instance, spec);
  const Vocabulary& vocab = model.vocabulary();
  SequenceProbs out;

  struct Node {
    TokenSeq generated;
    double prob;
  };
  std::vector<Node> stack{{{}, 1.0}};
  TokenSeq context;
  while (!stack.empty()) {
    Node node = std::move(stack.back());
    stack.pop_back();
    context = options.prefix;
    context.insert(context.end(), node.generated.begin(), node.generated.end());
    const ProbVector& dist = process.step(context);
    for (std::uint32_t t = 0; t < dist.size(); ++t) {
      const double p = dist.values()[t];
      if (p <= 0.0) continue;
      TokenSeq child = node.generated;
      child.push_back(TokenId{t});
      const double joint = node.prob * p;
      if (is_stop(vocab, options, TokenId{t}) || child.size() >= max_len)
        out[std::move(child)] += joint;
      else
        stack.push_back({std::move(child), joint});
    }
  }
  return out;
}

AnswerDist answer_posterior_q_alpha(const SequenceModel& model, const InstanceRef& instance,
                                    const StrategySpec& spec, const AnswerSpace& space,
                                    std::size_t max_len) {
  AnswerDist::Map q;
  for (const auto& [seq, p] : enumerate_sequence_probs(model, instance, spec, max_len))
    q[decode_answer(seq, model.vocabulary(), space)] += p;
  return AnswerDist(std::move(q));
}

AnswerDist model_answer_posterior(const SequenceModel& model, const InstanceRef& instance,
                                  const AnswerSpace& space, std::size_t max_len) {
  return answer_posterior_q_alpha(model, instance, StrategySpec::temperature(1.0), space, max_len);
}

CanonicalAnswer greedy_answer(const SequenceModel& model, const InstanceRef& instance,
                              const AnswerSpace& space, std::size_t max_len) {
  Rng unused(0);
  return decode_answer(rollout(model, instance, StrategySpec::greedy(), unused, max_len),
                       model.vocabulary(), space);
}

CanonicalAnswer modal_answer(const SequenceModel& model, const InstanceRef& instance,
                             const AnswerSpace& space, std::size_t max_len) {
  return model_answer_posterior(model, instance, space, max_len).argmax();
}

}  // namespace decodecal
