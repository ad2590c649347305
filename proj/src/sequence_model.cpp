#include "decodecal/sequence_model.hpp"

#include <algorithm>

namespace decodecal {

TabularModel::TabularModel(Vocabulary vocab, std::size_t max_len,
                           std::map<std::string, Rows> table)
    : vocab_(std::move(vocab)), max_len_(max_len), table_(std::move(table)) {
  if (max_len_ == 0) throw Error(ErrorKind::invalid_input, "max_len must be >= 1");
  if (table_.empty()) throw Error(ErrorKind::invalid_input, "tabular model has no instances");
  validate();
}

void TabularModel::validate() const {
  for (const auto& [id, rows] : table_) {
    std::vector<TokenSeq> stack{TokenSeq{}};
    while (!stack.empty()) {
      TokenSeq prefix = std::move(stack.back());
      stack.pop_back();
      auto it = rows.find(prefix);
      if (it == rows.end())
        throw Error(ErrorKind::missing_entry,
                    "instance '" + id + "' has no row for a reachable prefix of length " +
                        std::to_string(prefix.size()));
      const ProbVector& row = it->second;
      if (row.size() != vocab_.size())
        throw Error(ErrorKind::invalid_input, "row width does not match vocabulary size");
      for (std::uint32_t t = 0; t < row.size(); ++t) {
        if (row.values()[t] <= 0.0) continue;
        const TokenId tok{t};
        if (tok == vocab_.eos()) continue;
        if (prefix.size() + 1 >= max_len_)
          throw Error(ErrorKind::invalid_input,
                      "instance '" + id + "' can emit a sequence longer than max_len");
        TokenSeq child = prefix;
        child.push_back(tok);
        stack.push_back(std::move(child));
      }
    }
  }
}

ProbVector TabularModel::next_distribution(const InstanceRef& instance,
                                           std::span<const TokenId> prefix) const {
  if (!prefix.empty() && prefix.back() == vocab_.eos())
    throw Error(ErrorKind::missing_entry, "prefix already ends with eos");
  auto inst = table_.find(instance.id);
  if (inst == table_.end())
    throw Error(ErrorKind::missing_entry, "unknown instance '" + instance.id + "'");
  auto row = inst->second.find(TokenSeq(prefix.begin(), prefix.end()));
  if (row == inst->second.end())
    throw Error(ErrorKind::missing_entry, "no row for prefix in instance '" + instance.id + "'");
  return row->second;
}

std::shared_ptr<const TabularModel> make_answer_level_model(const std::string& instance_id,
                                                            const AnswerSpace& space,
                                                            std::span<const double> answer_probs) {
  if (answer_probs.size() != space.size())
    throw Error(ErrorKind::invalid_input, "answer probabilities do not match answer space");
  const std::size_t n = space.size();
  std::vector<std::string> labels;
  labels.reserve(n + 1);
  for (const auto& a : space.answers()) labels.push_back(a.render());
  labels.emplace_back("</s>");
  const TokenId eos{static_cast<std::uint32_t>(n)};

  TabularModel::Rows rows;
  std::vector<double> root(answer_probs.begin(), answer_probs.end());
  root.push_back(0.0);
  rows.emplace(TokenSeq{}, ProbVector(std::move(root)));
  for (std::uint32_t i = 0; i < n; ++i)
    if (answer_probs[i] > 0.0) rows.emplace(TokenSeq{TokenId{i}}, ProbVector::point_mass(n + 1, eos));

  std::map<std::string, TabularModel::Rows> table;
  table.emplace(instance_id, std::move(rows));
  return std::make_shared<const TabularModel>(Vocabulary(n + 1, eos, std::nullopt, std::move(labels)),
                                              2, std::move(table));
}

std::shared_ptr<const TabularModel> make_spelled_model(
    const std::string& instance_id, const std::vector<std::vector<std::string>>& spellings,
    std::span<const double> answer_probs) {
  if (spellings.size() != answer_probs.size())
    throw Error(ErrorKind::invalid_input, "spelling count does not match probabilities");

  std::vector<std::string> labels;
  std::map<std::string, std::uint32_t> token_of;
  std::vector<TokenSeq> encoded;
  std::size_t longest = 0;
  for (const auto& spelling : spellings) {
    if (spelling.empty()) throw Error(ErrorKind::invalid_input, "empty spelling");
    TokenSeq seq;
    for (const auto& piece : spelling) {
      auto [it, inserted] = token_of.emplace(piece, static_cast<std::uint32_t>(labels.size()));
      if (inserted) labels.push_back(piece);
      seq.push_back(TokenId{it->second});
    }
    longest = std::max(longest, seq.size());
    encoded.push_back(std::move(seq));
  }
  {
    auto sorted = encoded;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw Error(ErrorKind::invalid_input, "two answers share a spelling");
  }
  const std::size_t vocab_size = labels.size() + 1;
  const TokenId eos{static_cast<std::uint32_t>(labels.size())};
  labels.emplace_back("</s>");

  // mass[node] and the mass of answers ending exactly at node.
  std::map<TokenSeq, double> mass;
  std::map<TokenSeq, double> ending;
  for (std::size_t a = 0; a < encoded.size(); ++a) {
    const double q = answer_probs[a];
    if (q <= 0.0) continue;
    for (std::size_t len = 0; len <= encoded[a].size(); ++len)
      mass[TokenSeq(encoded[a].begin(), encoded[a].begin() + static_cast<long>(len))] += q;
    ending[encoded[a]] += q;
  }

  TabularModel::Rows rows;
  for (const auto& [node, total] : mass) {
    std::vector<double> row(vocab_size, 0.0);
    if (auto e = ending.find(node); e != ending.end()) row[eos.value] = e->second / total;
    TokenSeq child = node;
    child.emplace_back();
    for (std::uint32_t t = 0; t + 1 < vocab_size; ++t) {
      child.back() = TokenId{t};
      if (auto c = mass.find(child); c != mass.end()) row[t] = c->second / total;
    }
    rows.emplace(node, ProbVector(std::move(row)));
  }

  std::map<std::string, TabularModel::Rows> table;
  table.emplace(instance_id, std::move(rows));
  return std::make_shared<const TabularModel>(
      Vocabulary(vocab_size, eos, std::nullopt, std::move(labels)), longest + 1, std::move(table));
}

}  // namespace decodecal
