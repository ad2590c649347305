#pragma once

/**
 * Rollouts, exact sequence enumeration and the induced answer posterior
 * q^alpha(a) = sum over sequences decoding to a of the truncated-process
 * sequence probability.
 */

#include <cstddef>
#include <map>
#include <vector>

#include "decodecal/core.hpp"
#include "decodecal/rng.hpp"
#include "decodecal/sequence_model.hpp"
#include "decodecal/strategies.hpp"

namespace decodecal {

// Leaf bound for exact enumeration: V^max_len must not exceed it.
inline constexpr double kEnumerationGuard = 1e7;

/**
 * The truncated sampling process of one (model, instance, spec). Step
 * distributions are memoized per prefix, so repeated rollouts only pay for
 * the model lookup once. Not thread-safe; use one per thread.
 */
class TruncatedProcess {
 public:
  TruncatedProcess(const SequenceModel& model, InstanceRef instance, StrategySpec spec);

  const ProbVector& step(const TokenSeq& prefix);
  const SequenceModel& model() const noexcept { return *model_; }
  const InstanceRef& instance() const noexcept { return instance_; }
  const StrategySpec& spec() const noexcept { return spec_; }

 private:
  const SequenceModel* model_;
  InstanceRef instance_;
  StrategySpec spec_;
  std::map<TokenSeq, ProbVector> cache_;
};

struct RolloutOptions {
  // Generation continues after this prefix; the returned tokens exclude it.
  TokenSeq prefix;
  // Generation ends after emitting any of these (eos is always a stop).
  std::vector<TokenId> extra_stops;
};

/**
 * Samples (or greedily picks) tokens until eos or max_len tokens. Greedy
 * never touches `rng`. Beam specs are rejected; see beam_search.
 */
TokenSeq rollout(const SequenceModel& model, const InstanceRef& instance, const StrategySpec& spec,
                 Rng& rng, std::size_t max_len, const RolloutOptions& options = {});

TokenSeq rollout(TruncatedProcess& process, Rng& rng, std::size_t max_len,
                 const RolloutOptions& options = {});

using SequenceProbs = std::map<TokenSeq, double>;

/**
 * Exact probability of every sequence the truncated process can emit,
 * ending at eos or at max_len tokens. `extra_stops` end a sequence early
 * (used to enumerate reasoning traces).
 */
SequenceProbs enumerate_sequence_probs(const SequenceModel& model, const InstanceRef& instance,
                                       const StrategySpec& spec, std::size_t max_len,
                                       const RolloutOptions& options = {});

// Throws enumeration-too-large when V^max_len exceeds kEnumerationGuard.
void check_enumerable(const SequenceModel& model, std::size_t max_len);
bool is_enumerable(const SequenceModel& model, std::size_t max_len) noexcept;

AnswerDist answer_posterior_q_alpha(const SequenceModel& model, const InstanceRef& instance,
                                    const StrategySpec& spec, const AnswerSpace& space,
                                    std::size_t max_len);

// q(a): the model's own answer posterior (untruncated sampling at tau = 1).
AnswerDist model_answer_posterior(const SequenceModel& model, const InstanceRef& instance,
                                  const AnswerSpace& space, std::size_t max_len);

// a^1 := D(greedy rollout).
CanonicalAnswer greedy_answer(const SequenceModel& model, const InstanceRef& instance,
                              const AnswerSpace& space, std::size_t max_len);

// argmax_a q(a). Equals greedy_answer on answer-level models; can differ once
// answers share a first token.
CanonicalAnswer modal_answer(const SequenceModel& model, const InstanceRef& instance,
                             const AnswerSpace& space, std::size_t max_len);

}  // namespace decodecal
