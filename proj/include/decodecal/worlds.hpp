#pragma once

/**
 * Synthetic evaluation worlds: instances with a known ground-truth answer
 * posterior p and a model whose answer posterior q is a controlled
 * distortion of p.
 */

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "decodecal/core.hpp"
#include "decodecal/rng.hpp"
#include "decodecal/sequence_model.hpp"

namespace decodecal {

struct MiscalSpec {
  // Weight of the uniform component.
  double uniform_mix = 0.0;
  // p is powerized with exponent 1/gamma before mixing; gamma > 1 flattens.
  double gamma = 1.0;
  // Probability of swapping the two largest masses.
  double argmax_flip_rate = 0.0;

  void validate() const;
  bool operator==(const MiscalSpec&) const = default;
};

struct WorldSpec {
  std::size_t num_instances = 1000;
  // Answers per non-boolean instance; boolean instances use {yes, no}.
  std::size_t answer_set_size = 6;
  // Zipf exponent of the ground-truth rank profile (0 = uniform).
  double head_heaviness = 2.0;
  // Fraction of instances whose gold answer is a single token (booleans included).
  double single_token_fraction = 0.89;
  double boolean_fraction = 0.38;
  // Fraction of instances whose gold answer is a number.
  double numeric_fraction = 0.0;
  // Probability that a boolean instance's gold answer is "yes".
  double yes_rate = 0.5;
  // Options are the letters a-d and the gold option is uniform.
  bool multiple_choice = false;
  MiscalSpec miscal;
  // Multi-token answers are spelled with 2-3 tokens instead of one.
  bool token_level = false;

  void validate() const;
  bool operator==(const WorldSpec&) const = default;
};

struct Instance {
  InstanceRef ref;
  AnswerSpace space;
  AnswerDist p_true;
  std::shared_ptr<const SequenceModel> model;
};

struct World {
  std::vector<Instance> instances;
  std::uint64_t seed = 0;
  std::optional<WorldSpec> spec;

  // Throws invalid-input if empty or ids repeat.
  void validate() const;
};

// Gold answer of an instance: argmax of p_true, ties to space order.
const CanonicalAnswer& gold_answer(const Instance& inst);

/**
 * q = (1 - lambda) * normalize(p^(1/gamma)) + lambda * uniform, then with
 * probability argmax_flip_rate the two largest masses are swapped (ties to
 * the lower index). Probabilities are in space order.
 */
std::vector<double> miscalibrate(std::span<const double> p_true, const MiscalSpec& miscal, Rng& rng);
AnswerDist miscalibrate(const AnswerDist& p_true, const AnswerSpace& space,
                        const MiscalSpec& miscal, Rng& rng);

World generate_world(const WorldSpec& spec, std::uint64_t seed);

// "vqa-headheavy", "mcq4", "chartqa-like", "uniform-tail".
WorldSpec world_presets(std::string_view name);
const std::vector<std::string>& preset_names();

// Answer-level instance built from explicit p and q (q defaults to p).
Instance make_answer_instance(std::string id, std::vector<CanonicalAnswer> answers,
                              std::vector<double> p_true,
                              std::optional<std::vector<double>> q = std::nullopt);

/**
 * Reasoning world for two-phase decoding. Each instance's model emits up to
 * `max_reasoning` reasoning tokens, then think_end, then one answer token
 * and eos. After every trace the answer distribution puts `confidence` on
 * one answer whose ground-truth probability is at least 1/|A|.
 */
World generate_reasoning_world(std::size_t num_instances, std::size_t max_reasoning,
                               double confidence, std::uint64_t seed);

// World file (JSON, format version "1").
std::string world_to_json(const World& world);
World world_from_json(std::string_view text);
void save_world(const World& world, const std::string& path);
World load_world(const std::string& path);

}  // namespace decodecal
