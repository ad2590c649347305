#pragma once

/**
 * Autoregressive model contract and the tabular toy model.
 *
 * A SequenceModel maps (instance, prefix) to the next-token distribution.
 * TabularModel stores those rows explicitly, which makes every sequence
 * probability exactly enumerable.
 */

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "decodecal/core.hpp"

namespace decodecal {

struct InstanceRef {
  std::string id;

  auto operator<=>(const InstanceRef&) const = default;
};

class SequenceModel {
 public:
  virtual ~SequenceModel() = default;

  virtual ProbVector next_distribution(const InstanceRef& instance,
                                       std::span<const TokenId> prefix) const = 0;
  virtual const Vocabulary& vocabulary() const = 0;
  // Longest sequence (eos included) the model ever emits.
  virtual std::size_t max_length() const = 0;
};

inline ProbVector next_distribution(const SequenceModel& model, const InstanceRef& instance,
                                    std::span<const TokenId> prefix) {
  return model.next_distribution(instance, prefix);
}

class TabularModel final : public SequenceModel {
 public:
  using Rows = std::map<TokenSeq, ProbVector>;

  /**
   * `rows` maps a prefix to its next-token distribution for instance
   * `instance_id`. Construction walks every prefix reachable with positive
   * probability and rejects the table if a row is missing, has the wrong
   * width, or lets a sequence run past `max_len` tokens.
   */
  TabularModel(Vocabulary vocab, std::size_t max_len, std::map<std::string, Rows> table);

  ProbVector next_distribution(const InstanceRef& instance,
                               std::span<const TokenId> prefix) const override;
  const Vocabulary& vocabulary() const override { return vocab_; }
  std::size_t max_length() const override { return max_len_; }

  const std::map<std::string, Rows>& table() const noexcept { return table_; }

 private:
  void validate() const;

  Vocabulary vocab_;
  std::size_t max_len_;
  std::map<std::string, Rows> table_;
};

/**
 * Answer-level model: token i spells answer i, the last token is eos. The
 * root row is `answer_probs` (eos gets 0), each answer token is followed by a
 * forced eos. Sequences have length 2.
 */
std::shared_ptr<const TabularModel> make_answer_level_model(const std::string& instance_id,
                                                            const AnswerSpace& space,
                                                            std::span<const double> answer_probs);

/**
 * Token-level model built as a prefix trie over spellings. `spellings[i]` is
 * the token-label sequence for answer i. Labels shared between spellings
 * become shared tokens, so joint token products equal `answer_probs`.
 */
std::shared_ptr<const TabularModel> make_spelled_model(
    const std::string& instance_id, const std::vector<std::vector<std::string>>& spellings,
    std::span<const double> answer_probs);

}  // namespace decodecal
