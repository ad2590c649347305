#pragma once

/**
 * Decoding strategies: candidate-set selection for every truncation family,
 * renormalized truncated sampling, greedy selection and beam search.
 *
 * Text encoding of a strategy is `family[:param][@tau]`, for example
 * `top_p:0.9@0.7`, `greedy`, `beam:5`. The temperature suffix is omitted
 * when tau == 1.
 */

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "decodecal/core.hpp"
#include "decodecal/rng.hpp"
#include "decodecal/sequence_model.hpp"

namespace decodecal {

enum class Family : std::uint8_t {
  greedy,
  temperature_only,
  top_k,
  top_p,
  min_p,
  epsilon,
  eta,
  beam,
};

std::string_view to_string(Family f);
std::optional<Family> family_from_string(std::string_view s);

struct StrategySpec {
  Family family = Family::greedy;
  // k, p, p_base, epsilon, eta or beam width; unused for greedy / temperature_only.
  double alpha = 0.0;
  double tau = 1.0;

  static StrategySpec greedy() { return {Family::greedy, 0.0, 1.0}; }
  static StrategySpec temperature(double tau) { return {Family::temperature_only, 0.0, tau}; }
  static StrategySpec top_k(std::size_t k, double tau = 1.0) {
    return {Family::top_k, static_cast<double>(k), tau};
  }
  static StrategySpec top_p(double p, double tau = 1.0) { return {Family::top_p, p, tau}; }
  static StrategySpec min_p(double p_base, double tau = 1.0) { return {Family::min_p, p_base, tau}; }
  static StrategySpec epsilon(double eps, double tau = 1.0) { return {Family::epsilon, eps, tau}; }
  static StrategySpec eta(double eta, double tau = 1.0) { return {Family::eta, eta, tau}; }
  static StrategySpec beam(std::size_t width) {
    return {Family::beam, static_cast<double>(width), 1.0};
  }

  bool deterministic() const noexcept {
    return family == Family::greedy || family == Family::beam;
  }
  bool has_alpha() const noexcept {
    return family != Family::greedy && family != Family::temperature_only;
  }
  // Same spec at another temperature; greedy and beam keep tau = 1.
  StrategySpec at_temperature(double t) const;
  // Same spec with the temperature reset to 1.
  StrategySpec without_temperature() const { return at_temperature(1.0); }

  // Throws invalid-parameter when alpha or tau is out of range.
  void validate() const;
  std::string encode() const;
  static StrategySpec parse(std::string_view text);

  bool operator==(const StrategySpec&) const = default;
};

// Sorted ascending by token id; never empty.
using CandidateSet = std::vector<TokenId>;

/**
 * S_t for one step. `dist` must already be temperature-scaled.
 *
 *   greedy            argmax singleton
 *   temperature_only  every token
 *   top_k             k most probable (ties to lower id); k > V acts as k = V
 *   top_p             shortest descending prefix with mass >= p (crossing token kept)
 *   min_p             { i : p_i >= p_base * max p }
 *   epsilon           { i : p_i >= eps }, argmax singleton if empty
 *   eta               { i : p_i >= min(eta, sqrt(eta) * exp(-H)) }, H in nats, same fallback
 */
CandidateSet select_candidates(const ProbVector& dist, const StrategySpec& spec);

ProbVector truncate_renormalize(const ProbVector& dist, const CandidateSet& candidates);

// Full step pipeline: temperature, selection, renormalization.
ProbVector truncated_distribution(const ProbVector& raw, const StrategySpec& spec);

TokenId sample_token(const ProbVector& dist, Rng& rng);

// Argmax with ties to the lowest id.
TokenId greedy_token(const ProbVector& dist);

// Shannon entropy in nats.
double entropy_nats(const ProbVector& dist);

// Slack on the cumulative-mass comparison in top-p so that a prefix summing
// to p up to rounding counts as reaching p.
inline constexpr double kTopPSlack = 1e-12;

struct BeamOptions {
  // Decoding continues from this prefix; returned tokens exclude it.
  TokenSeq prefix;
  // Beams ending in one of these tokens are frozen. Empty means {eos}.
  std::vector<TokenId> stop_tokens;
};

struct BeamResult {
  TokenSeq tokens;
  double log_prob = 0.0;
  // No beam reached a stop token within max_len.
  bool truncated = false;
};

/**
 * Beam search over summed log-probabilities with no length normalization.
 * Completed beams keep their slot; ties are broken toward the
 * lexicographically smaller token sequence. Width 1 reproduces greedy.
 */
BeamResult beam_search(const SequenceModel& model, const InstanceRef& instance,
                       std::size_t width, std::size_t max_len, const BeamOptions& options = {});

}  // namespace decodecal
