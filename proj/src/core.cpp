#include "decodecal/core.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <regex>

namespace decodecal {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::invalid_parameter: return "invalid-parameter";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::degenerate_support: return "degenerate-support";
    case ErrorKind::missing_entry: return "missing-entry";
    case ErrorKind::enumeration_too_large: return "enumeration-too-large";
    case ErrorKind::invalid_spec: return "invalid-spec";
    case ErrorKind::unknown_preset: return "unknown-preset";
    case ErrorKind::io: return "io";
    case ErrorKind::parse: return "parse";
    case ErrorKind::transport: return "transport";
    case ErrorKind::http: return "http";
    case ErrorKind::auth: return "auth";
    case ErrorKind::timeout: return "timeout";
  }
  return "unknown";
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  // Plain decimals in the everyday range, shortest round-trip form either way.
  const double mag = std::abs(v);
  const bool fixed = v == 0.0 || (mag >= 1e-6 && mag < 1e15);
  auto [end, ec] = fixed ? std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed)
                         : std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw Error(ErrorKind::invalid_input, "unformattable double");
  return std::string(buf.data(), end);
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(std::size_t size, TokenId eos, std::optional<TokenId> think_end,
                       std::optional<std::vector<std::string>> labels)
    : size_(size), eos_(eos), think_end_(think_end), labels_(std::move(labels)) {
  if (size_ == 0) throw Error(ErrorKind::invalid_input, "vocabulary size must be positive");
  if (eos_.value >= size_) throw Error(ErrorKind::invalid_input, "eos outside vocabulary");
  if (think_end_) {
    if (think_end_->value >= size_)
      throw Error(ErrorKind::invalid_input, "think_end outside vocabulary");
    if (*think_end_ == eos_) throw Error(ErrorKind::invalid_input, "think_end equals eos");
  }
  if (labels_ && labels_->size() != size_)
    throw Error(ErrorKind::invalid_input, "label count does not match vocabulary size");
}

const std::string& Vocabulary::label(TokenId t) const {
  if (!labels_) throw Error(ErrorKind::configuration, "vocabulary has no labels");
  if (!contains(t)) throw Error(ErrorKind::invalid_input, "token outside vocabulary");
  return (*labels_)[t.value];
}

// ---------------------------------------------------------------------------
// ProbVector / LogitVector

ProbVector::ProbVector(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw Error(ErrorKind::invalid_input, "empty probability vector");
  double sum = 0.0;
  for (double p : probs_) {
    if (!std::isfinite(p) || p < 0.0)
      throw Error(ErrorKind::invalid_input, "probability entries must be finite and >= 0");
    sum += p;
  }
  const double drift = std::abs(sum - 1.0);
  if (drift <= kSumTolerance) return;
  if (drift > kRenormTolerance)
    throw Error(ErrorKind::invalid_input,
                "probabilities sum to " + format_double(sum) + ", expected 1");
  for (double& p : probs_) p /= sum;
}

ProbVector ProbVector::point_mass(std::size_t size, TokenId at) {
  std::vector<double> p(size, 0.0);
  p.at(at.value) = 1.0;
  return ProbVector(std::move(p));
}

ProbVector ProbVector::uniform(std::size_t size) {
  return ProbVector(std::vector<double>(size, 1.0 / static_cast<double>(size)));
}

LogitVector::LogitVector(std::vector<double> logits) : logits_(std::move(logits)) {
  if (logits_.empty()) throw Error(ErrorKind::invalid_input, "empty logit vector");
  for (double l : logits_)
    if (!std::isfinite(l)) throw Error(ErrorKind::invalid_input, "non-finite logit");
}

// ---------------------------------------------------------------------------
// Temperature

namespace {

void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw Error(ErrorKind::invalid_parameter, "temperature must be positive and finite");
}

std::vector<double> stable_softmax(std::span<const double> scaled) {
  const double hi = *std::max_element(scaled.begin(), scaled.end());
  std::vector<double> out(scaled.size());
  double z = 0.0;
  for (std::size_t i = 0; i < scaled.size(); ++i) {
    out[i] = std::isinf(scaled[i]) ? 0.0 : std::exp(scaled[i] - hi);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

}  // namespace

ProbVector softmax_with_temperature(const LogitVector& logits, double tau) {
  check_tau(tau);
  std::vector<double> scaled(logits.values().begin(), logits.values().end());
  for (double& v : scaled) v /= tau;
  return ProbVector(stable_softmax(scaled));
}

ProbVector apply_temperature(const ProbVector& dist, double tau) {
  check_tau(tau);
  if (tau == 1.0) return dist;
  std::vector<double> scaled(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const double p = dist.values()[i];
    scaled[i] = p > 0.0 ? std::log(p) / tau : -std::numeric_limits<double>::infinity();
  }
  return ProbVector(stable_softmax(scaled));
}

// ---------------------------------------------------------------------------
// Canonical answers

std::string_view to_string(AnswerKind kind) {
  switch (kind) {
    case AnswerKind::text: return "text";
    case AnswerKind::numeric: return "numeric";
    case AnswerKind::boolean: return "boolean";
    case AnswerKind::abstain: return "abstain";
  }
  return "text";
}

CanonicalAnswer CanonicalAnswer::text(std::string normalized) {
  return CanonicalAnswer(AnswerKind::text, std::move(normalized), 0.0);
}

CanonicalAnswer CanonicalAnswer::numeric(double value) {
  if (!std::isfinite(value)) throw Error(ErrorKind::invalid_input, "numeric answer not finite");
  return CanonicalAnswer(AnswerKind::numeric, {}, value == 0.0 ? 0.0 : value);
}

CanonicalAnswer CanonicalAnswer::boolean(bool yes) {
  return CanonicalAnswer(AnswerKind::boolean, yes ? "yes" : "no", 0.0);
}

CanonicalAnswer CanonicalAnswer::abstain() {
  return CanonicalAnswer(AnswerKind::abstain, "unanswerable", 0.0);
}

CanonicalAnswer CanonicalAnswer::sentinel() { return text(""); }

std::string CanonicalAnswer::render() const {
  return kind_ == AnswerKind::numeric ? format_double(value_) : text_;
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_trailing_punct(char c) {
  return c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':' || c == '"' ||
         c == '\'';
}

// Lowercase, trim and collapse whitespace runs.
std::string normalize_spacing(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
  }
  return out;
}

std::string strip_to_fixed_point(std::string s) {
  static constexpr std::array<std::string_view, 3> kArticles = {"a ", "an ", "the "};
  for (bool changed = true; changed;) {
    changed = false;
    while (!s.empty() && is_trailing_punct(s.back())) {
      s.pop_back();
      changed = true;
    }
    while (!s.empty() && (s.front() == '"' || s.front() == '\'')) {
      s.erase(s.begin());
      changed = true;
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    while (!s.empty() && s.front() == ' ') s.erase(s.begin());
    for (auto article : kArticles) {
      if (s.size() > article.size() && s.starts_with(article)) {
        s.erase(0, article.size());
        changed = true;
        break;
      }
    }
  }
  return s;
}

std::optional<double> parse_number(std::string s) {
  if (!s.empty() && s.back() == '%') {
    s.pop_back();
    while (!s.empty() && s.back() == ' ') s.pop_back();
  }
  if (!s.empty() && s.front() == '+') s.erase(s.begin());
  if (s.empty()) return std::nullopt;
  static const std::regex kGrouped(R"(^-?\d{1,3}(,\d{3})+(\.\d+)?$)");
  if (s.find(',') != std::string::npos) {
    if (!std::regex_match(s, kGrouped)) return std::nullopt;
    std::erase(s, ',');
  }
  const char first = s.front() == '-' ? (s.size() > 1 ? s[1] : '\0') : s.front();
  if (!(std::isdigit(static_cast<unsigned char>(first)) || first == '.')) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(value))
    return std::nullopt;
  return value;
}

}  // namespace

CanonicalAnswer canonicalize_answer(std::string_view raw) {
  std::string s = strip_to_fixed_point(normalize_spacing(raw));
  if (s == "yes") return CanonicalAnswer::boolean(true);
  if (s == "no") return CanonicalAnswer::boolean(false);
  if (s == "unanswerable") return CanonicalAnswer::abstain();
  if (auto v = parse_number(s)) return CanonicalAnswer::numeric(*v);
  return CanonicalAnswer::text(std::move(s));
}

bool answers_match(const CanonicalAnswer& a, const CanonicalAnswer& b, double rel_tol) {
  if (rel_tol < 0.0) throw Error(ErrorKind::invalid_parameter, "rel_tol must be >= 0");
  if (a.kind() != b.kind()) return false;
  if (a.kind() == AnswerKind::numeric) {
    const double bv = b.numeric_value();
    return std::abs(a.numeric_value() - bv) <= rel_tol * std::max(1.0, std::abs(bv));
  }
  return a.text_value() == b.text_value();
}

// ---------------------------------------------------------------------------
// AnswerSpace / AnswerDist

AnswerSpace::AnswerSpace(std::vector<CanonicalAnswer> answers) : answers_(std::move(answers)) {
  if (answers_.empty()) throw Error(ErrorKind::invalid_input, "answer space is empty");
  std::vector<CanonicalAnswer> sorted = answers_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw Error(ErrorKind::invalid_input, "duplicate answer in answer space");
  if (std::any_of(answers_.begin(), answers_.end(),
                  [](const CanonicalAnswer& a) { return a.is_sentinel(); }))
    throw Error(ErrorKind::invalid_input, "answer space cannot contain the empty answer");
}

std::optional<std::size_t> AnswerSpace::index_of(const CanonicalAnswer& a) const {
  auto it = std::find(answers_.begin(), answers_.end(), a);
  if (it == answers_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - answers_.begin());
}

AnswerDist::AnswerDist(Map entries) : entries_(std::move(entries)) {
  double sum = 0.0;
  for (const auto& [a, p] : entries_) {
    if (!std::isfinite(p) || p < 0.0)
      throw Error(ErrorKind::invalid_input, "answer probabilities must be finite and >= 0");
    sum += p;
  }
  const double drift = std::abs(sum - 1.0);
  if (drift <= kSumTolerance) return;
  if (drift > kRenormTolerance)
    throw Error(ErrorKind::invalid_input,
                "answer probabilities sum to " + format_double(sum) + ", expected 1");
  for (auto& [a, p] : entries_) p /= sum;
}

AnswerDist AnswerDist::from_space(const AnswerSpace& space, std::span<const double> probs) {
  if (probs.size() != space.size())
    throw Error(ErrorKind::invalid_input, "probability count does not match answer space");
  Map m;
  for (std::size_t i = 0; i < probs.size(); ++i) m.emplace(space[i], probs[i]);
  return AnswerDist(std::move(m));
}

AnswerDist AnswerDist::point_mass(const CanonicalAnswer& a) { return AnswerDist(Map{{a, 1.0}}); }

double AnswerDist::prob(const CanonicalAnswer& a) const {
  auto it = entries_.find(a);
  return it == entries_.end() ? 0.0 : it->second;
}

std::vector<double> AnswerDist::aligned(const AnswerSpace& space) const {
  std::vector<double> out(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) out[i] = prob(space[i]);
  return out;
}

const CanonicalAnswer& AnswerDist::argmax() const {
  if (entries_.empty()) throw Error(ErrorKind::invalid_input, "empty answer distribution");
  auto best = entries_.begin();
  for (auto it = entries_.begin(); it != entries_.end(); ++it)
    if (it->second > best->second) best = it;
  return best->first;
}

// ---------------------------------------------------------------------------
// Decoding

CanonicalAnswer decode_answer(std::span<const TokenId> tokens, const Vocabulary& vocab,
                              const AnswerSpace& space) {
  if (!vocab.has_labels()) throw Error(ErrorKind::configuration, "decoding requires labels");
  std::size_t begin = 0;
  if (const auto& te = vocab.think_end()) {
    auto it = std::find(tokens.begin(), tokens.end(), *te);
    if (it != tokens.end()) begin = static_cast<std::size_t>(it - tokens.begin()) + 1;
  }
  std::string text;
  for (std::size_t i = begin; i < tokens.size(); ++i) {
    if (tokens[i] == vocab.eos()) break;
    text += vocab.label(tokens[i]);
  }
  CanonicalAnswer a = canonicalize_answer(text);
  return space.contains(a) ? a : CanonicalAnswer::sentinel();
}

double sequence_probability(std::span<const ProbVector> step_dists,
                            std::span<const TokenId> tokens) {
  if (step_dists.size() != tokens.size())
    throw Error(ErrorKind::invalid_input, "step distributions and tokens differ in length");
  double p = 1.0;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t].value >= step_dists[t].size())
      throw Error(ErrorKind::invalid_input, "token outside distribution");
    p *= step_dists[t][tokens[t]];
  }
  return p;
}

}  // namespace decodecal
