#pragma once

/**
 * Foundational value types: tokens, vocabularies, probability vectors,
 * canonical answers and answer-level distributions.
 *
 * Everything here is immutable after construction and validated on the way
 * in, so downstream code never re-checks normalization.
 */

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "decodecal/error.hpp"

namespace decodecal {

struct TokenId {
  std::uint32_t value = 0;

  constexpr TokenId() = default;
  constexpr explicit TokenId(std::uint32_t v) : value(v) {}
  constexpr auto operator<=>(const TokenId&) const = default;
};

using TokenSeq = std::vector<TokenId>;

class Vocabulary {
 public:
  Vocabulary(std::size_t size, TokenId eos, std::optional<TokenId> think_end = std::nullopt,
             std::optional<std::vector<std::string>> labels = std::nullopt);

  std::size_t size() const noexcept { return size_; }
  TokenId eos() const noexcept { return eos_; }
  const std::optional<TokenId>& think_end() const noexcept { return think_end_; }
  bool has_labels() const noexcept { return labels_.has_value(); }
  const std::optional<std::vector<std::string>>& labels() const noexcept { return labels_; }
  // Throws configuration error when the vocabulary carries no labels.
  const std::string& label(TokenId t) const;
  bool contains(TokenId t) const noexcept { return t.value < size_; }

  bool operator==(const Vocabulary&) const = default;

 private:
  std::size_t size_;
  TokenId eos_;
  std::optional<TokenId> think_end_;
  std::optional<std::vector<std::string>> labels_;
};

// Sums within this distance of 1 are accepted verbatim.
inline constexpr double kSumTolerance = 1e-9;
// Sums within this distance of 1 (but outside kSumTolerance) are renormalized.
inline constexpr double kRenormTolerance = 1e-6;

class ProbVector {
 public:
  // Validates entries (finite, >= 0) and the sum; renormalizes small drift.
  explicit ProbVector(std::vector<double> probs);

  static ProbVector point_mass(std::size_t size, TokenId at);
  static ProbVector uniform(std::size_t size);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](TokenId t) const { return probs_.at(t.value); }
  std::span<const double> values() const noexcept { return probs_; }

  bool operator==(const ProbVector&) const = default;

 private:
  std::vector<double> probs_;
};

class LogitVector {
 public:
  explicit LogitVector(std::vector<double> logits);

  std::size_t size() const noexcept { return logits_.size(); }
  std::span<const double> values() const noexcept { return logits_; }

 private:
  std::vector<double> logits_;
};

enum class AnswerKind : std::uint8_t { text = 0, numeric = 1, boolean = 2, abstain = 3 };

std::string_view to_string(AnswerKind kind);

class CanonicalAnswer {
 public:
  static CanonicalAnswer text(std::string normalized);
  static CanonicalAnswer numeric(double value);
  static CanonicalAnswer boolean(bool yes);
  static CanonicalAnswer abstain();
  // Empty / out-of-space decodes collapse onto this answer.
  static CanonicalAnswer sentinel();

  AnswerKind kind() const noexcept { return kind_; }
  const std::string& text_value() const noexcept { return text_; }
  double numeric_value() const noexcept { return value_; }
  bool is_sentinel() const noexcept { return kind_ == AnswerKind::text && text_.empty(); }

  // String form; canonicalize_answer(render()) == *this.
  std::string render() const;

  auto operator<=>(const CanonicalAnswer&) const = default;

 private:
  CanonicalAnswer(AnswerKind kind, std::string text, double value)
      : kind_(kind), text_(std::move(text)), value_(value) {}

  AnswerKind kind_;
  std::string text_;
  double value_;
};

class AnswerSpace {
 public:
  explicit AnswerSpace(std::vector<CanonicalAnswer> answers);

  std::size_t size() const noexcept { return answers_.size(); }
  const std::vector<CanonicalAnswer>& answers() const noexcept { return answers_; }
  const CanonicalAnswer& operator[](std::size_t i) const { return answers_.at(i); }
  std::optional<std::size_t> index_of(const CanonicalAnswer& a) const;
  bool contains(const CanonicalAnswer& a) const { return index_of(a).has_value(); }

  bool operator==(const AnswerSpace&) const = default;

 private:
  std::vector<CanonicalAnswer> answers_;
};

class AnswerDist {
 public:
  using Map = std::map<CanonicalAnswer, double>;

  explicit AnswerDist(Map entries);
  // Aligned with space order; entries must match space.size().
  static AnswerDist from_space(const AnswerSpace& space, std::span<const double> probs);
  static AnswerDist point_mass(const CanonicalAnswer& a);

  // Zero for answers without an entry.
  double prob(const CanonicalAnswer& a) const;
  const Map& entries() const noexcept { return entries_; }
  // Probabilities listed in space order (absent answers are 0).
  std::vector<double> aligned(const AnswerSpace& space) const;
  // Highest-probability answer, ties broken by canonical ordering.
  const CanonicalAnswer& argmax() const;

  bool operator==(const AnswerDist&) const = default;

 private:
  Map entries_;
};

/// Softmax of logits / tau. Requires tau > 0.
ProbVector softmax_with_temperature(const LogitVector& logits, double tau);

/// Temperature applied to an existing distribution: p_i^(1/tau), renormalized.
/// Zero entries stay zero. tau == 1 returns the input unchanged.
ProbVector apply_temperature(const ProbVector& dist, double tau);

CanonicalAnswer canonicalize_answer(std::string_view raw);

// Default relative tolerance for numeric soft matching.
inline constexpr double kDefaultRelTol = 0.05;

bool answers_match(const CanonicalAnswer& a, const CanonicalAnswer& b,
                   double rel_tol = kDefaultRelTol);

/**
 * Detokenize and canonicalize. Labels are concatenated up to (excluding) the
 * first eos; when the vocabulary defines think_end and the sequence contains
 * it, only the tokens after the first think_end are decoded. Results outside
 * `space` (and the empty string) map to CanonicalAnswer::sentinel().
 */
CanonicalAnswer decode_answer(std::span<const TokenId> tokens, const Vocabulary& vocab,
                              const AnswerSpace& space);

double sequence_probability(std::span<const ProbVector> step_dists,
                            std::span<const TokenId> tokens);

// Shortest round-trip decimal rendering used for every textual number.
std::string format_double(double v);

}  // namespace decodecal
