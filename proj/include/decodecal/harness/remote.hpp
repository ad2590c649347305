#pragma once

/**
 * Strategy rollouts against an OpenAI-compatible completions endpoint that
 * returns per-position top-n log-probabilities. One request per token:
 *
 *   POST {base_url}{path}  {"prompt": ..., "max_tokens": 1, "logprobs": depth}
 *
 * The reply's choices[0].logprobs.top_logprobs[0] (token -> logprob) is
 * renormalized and truncated client-side. Mass outside the returned top-n
 * is unobservable; each step records it and warns when it could change
 * the candidate set.
 */

#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "decodecal/rng.hpp"
#include "decodecal/strategies.hpp"

namespace decodecal::harness {

struct RemoteEndpoint {
  // Scheme, host and port, e.g. "http://localhost:8000".
  std::string base_url;
  std::string path = "/v1/completions";
  std::optional<std::string> model;
  // Environment variable holding a bearer token.
  std::optional<std::string> auth_env;
  std::size_t depth = 5;
  std::chrono::milliseconds timeout{30000};
  // Retries after the first attempt on connection errors, 429 and 5xx.
  std::size_t max_retries = 3;
  std::chrono::milliseconds backoff_initial{200};
  std::chrono::milliseconds backoff_max{5000};
  std::string eos_text = "<|endoftext|>";

  void validate() const;
  static RemoteEndpoint from_json(std::string_view text);
};

struct StepRecord {
  // Alternatives as returned, sorted by logprob descending then token.
  std::vector<std::pair<std::string, double>> top_logprobs;
  std::string chosen;
  // Sum of exp(logprob) over the alternatives; 1 - covered is the tail.
  double covered_mass = 0.0;
  double tail_mass = 0.0;
  std::size_t candidate_count = 0;
  std::vector<std::string> warnings;
};

struct RemoteRollout {
  std::vector<std::string> tokens;
  std::string text;
  std::vector<StepRecord> steps;
  // Ended by the eos token rather than max_len.
  bool finished = false;
};

RemoteRollout remote_rollout(const RemoteEndpoint& endpoint, const std::string& prompt,
                             const StrategySpec& spec, Rng& rng, std::size_t max_len);

std::string remote_rollout_to_json(const RemoteRollout& r);

// Coverage warnings for one step's renormalized top-n distribution.
std::vector<std::string> coverage_warnings(const StrategySpec& spec, std::size_t depth,
                                           double covered_mass, double max_raw_prob);

}  // namespace decodecal::harness
