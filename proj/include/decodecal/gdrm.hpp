#pragma once

/**
 * Two-phase decoding for reasoning models: a reasoning trace r is produced
 * by any strategy (sampling or beam) until think_end, then the answer is
 * decoded greedily from the context x + r.
 */

#include <cstddef>
#include <optional>

#include "decodecal/core.hpp"
#include "decodecal/rng.hpp"
#include "decodecal/sequence_model.hpp"
#include "decodecal/strategies.hpp"
#include "decodecal/worlds.hpp"

namespace decodecal {

struct GdrmConfig {
  StrategySpec reasoning_spec = StrategySpec::temperature(1.0);
  std::size_t max_reasoning_len = 64;
  std::size_t max_answer_len = 16;
  // Inserted between the trace and the answer phase when set.
  std::optional<TokenId> separator;

  void validate() const;
};

struct GdrmResult {
  // Phase-1 tokens, including the closing think_end when present.
  TokenSeq reasoning;
  TokenSeq answer_tokens;
  CanonicalAnswer answer = CanonicalAnswer::sentinel();
  // The trace hit max_reasoning_len or ended with eos before think_end.
  bool truncated_reasoning = false;
};

// Throws a configuration error when the vocabulary has no think_end.
GdrmResult gdrm_decode(const SequenceModel& model, const InstanceRef& instance,
                       const GdrmConfig& cfg, Rng& rng, const AnswerSpace& space);

// Phase 2 alone: greedy answer tokens after a fixed trace.
TokenSeq gdrm_answer_phase(const SequenceModel& model, const InstanceRef& instance,
                           const TokenSeq& reasoning, const GdrmConfig& cfg);

// Exact answer posterior of GDRM, marginalizing over all enumerated traces.
AnswerDist gdrm_answer_posterior(const SequenceModel& model, const InstanceRef& instance,
                                 const AnswerSpace& space, const GdrmConfig& cfg);

// Mean over instances of sum_r P(r) p(answer(r)).
double gdrm_objective(const World& world, const GdrmConfig& cfg);

// Same objective when the whole sequence, answer included, is sampled
// under `spec`.
double sampled_answer_objective(const World& world, const StrategySpec& spec);

}  // namespace decodecal
