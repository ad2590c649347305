#include "decodecal/worlds.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>

namespace decodecal {

void MiscalSpec::validate() const {
  if (!(uniform_mix >= 0.0 && uniform_mix <= 1.0))
    throw Error(ErrorKind::invalid_spec, "uniform_mix must lie in [0, 1]");
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw Error(ErrorKind::invalid_spec, "gamma must be positive");
  if (!(argmax_flip_rate >= 0.0 && argmax_flip_rate <= 1.0))
    throw Error(ErrorKind::invalid_spec, "argmax_flip_rate must lie in [0, 1]");
}

void WorldSpec::validate() const {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (num_instances == 0) throw Error(ErrorKind::invalid_spec, "num_instances must be >= 1");
  if (answer_set_size < 2) throw Error(ErrorKind::invalid_spec, "answer_set_size must be >= 2");
  if (!(head_heaviness >= 0.0) || !std::isfinite(head_heaviness))
    throw Error(ErrorKind::invalid_spec, "head_heaviness must be >= 0");
  if (!unit(single_token_fraction) || !unit(boolean_fraction) || !unit(numeric_fraction) ||
      !unit(yes_rate))
    throw Error(ErrorKind::invalid_spec, "fractions must lie in [0, 1]");
  if (boolean_fraction > single_token_fraction)
    throw Error(ErrorKind::invalid_spec, "boolean_fraction exceeds single_token_fraction");
  if (boolean_fraction + numeric_fraction > 1.0 + 1e-12)
    throw Error(ErrorKind::invalid_spec, "boolean_fraction + numeric_fraction exceeds 1");
  if (boolean_fraction == 1.0 && single_token_fraction != 1.0)
    throw Error(ErrorKind::invalid_spec, "all-boolean worlds are single-token");
  if (multiple_choice && (answer_set_size > 26 || boolean_fraction > 0.0 || numeric_fraction > 0.0))
    throw Error(ErrorKind::invalid_spec,
                "multiple-choice worlds take <= 26 letter options and no boolean/numeric answers");
  miscal.validate();
}

void World::validate() const {
  if (instances.empty()) throw Error(ErrorKind::invalid_input, "world has no instances");
  std::set<std::string> ids;
  for (const auto& inst : instances) {
    if (!ids.insert(inst.ref.id).second)
      throw Error(ErrorKind::invalid_input, "duplicate instance id '" + inst.ref.id + "'");
    if (!inst.model) throw Error(ErrorKind::invalid_input, "instance without a model");
  }
}

const CanonicalAnswer& gold_answer(const Instance& inst) {
  const auto p = inst.p_true.aligned(inst.space);
  return inst.space[static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin())];
}

std::vector<double> miscalibrate(std::span<const double> p_true, const MiscalSpec& miscal, Rng& rng) {
  miscal.validate();
  const std::size_t n = p_true.size();
  std::vector<double> q(n);
  if (miscal.gamma == 1.0) {
    q.assign(p_true.begin(), p_true.end());
  } else {
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      q[i] = p_true[i] > 0.0 ? std::pow(p_true[i], 1.0 / miscal.gamma) : 0.0;
      z += q[i];
    }
    for (double& v : q) v /= z;
  }
  if (miscal.uniform_mix > 0.0) {
    const double lam = miscal.uniform_mix;
    for (double& v : q) v = (1.0 - lam) * v + lam / static_cast<double>(n);
  }
  // Always draw so the stream position does not depend on the rate.
  const bool flip = rng.bernoulli(miscal.argmax_flip_rate);
  if (flip && n >= 2) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return q[a] > q[b]; });
    std::swap(q[idx[0]], q[idx[1]]);
  }
  return q;
}

AnswerDist miscalibrate(const AnswerDist& p_true, const AnswerSpace& space,
                        const MiscalSpec& miscal, Rng& rng) {
  const auto p = p_true.aligned(space);
  return AnswerDist::from_space(space, miscalibrate(p, miscal, rng));
}

// ---------------------------------------------------------------------------
// Presets

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"vqa-headheavy", "mcq4", "chartqa-like",
                                                 "uniform-tail"};
  return names;
}

WorldSpec world_presets(std::string_view name) {
  WorldSpec s;
  if (name == "vqa-headheavy") {
    s.num_instances = 10000;
    s.answer_set_size = 6;
    s.head_heaviness = 2.5;
    s.single_token_fraction = 0.89;
    s.boolean_fraction = 0.38;
    s.numeric_fraction = 0.12;
    s.yes_rate = 0.91;
    s.miscal = {0.01, 1.0, 0.0};
  } else if (name == "mcq4") {
    s.num_instances = 1000;
    s.answer_set_size = 4;
    s.head_heaviness = 1.5;
    s.single_token_fraction = 1.0;
    s.boolean_fraction = 0.0;
    s.numeric_fraction = 0.0;
    s.multiple_choice = true;
    s.miscal = {0.02, 1.0, 0.0};
  } else if (name == "chartqa-like") {
    s.num_instances = 2000;
    s.answer_set_size = 6;
    s.head_heaviness = 2.0;
    s.single_token_fraction = 0.45;
    // 11.74% of the non-numeric remainder are binary.
    s.boolean_fraction = 0.029;
    s.numeric_fraction = 0.7516;
    s.yes_rate = 0.5;
    s.miscal = {0.02, 1.0, 0.0};
  } else if (name == "uniform-tail") {
    s.num_instances = 1000;
    s.answer_set_size = 8;
    s.head_heaviness = 0.3;
    s.single_token_fraction = 0.6;
    s.boolean_fraction = 0.1;
    s.numeric_fraction = 0.3;
    s.yes_rate = 0.5;
    s.miscal = {0.1, 1.5, 0.1};
  } else {
    throw Error(ErrorKind::unknown_preset, "unknown world preset '" + std::string(name) + "'");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Generation

namespace {

constexpr std::array<std::string_view, 36> kSingleText = {
    "red",    "blue",   "green",  "white",  "black",  "gray",    "brown",  "yellow", "orange",
    "pink",   "purple", "dog",    "cat",    "man",    "woman",   "car",    "tree",   "frisbee",
    "pizza",  "left",   "right",  "tennis", "kitchen", "grass",  "water",  "snow",   "wood",
    "bus",    "train",  "horse",  "giraffe", "table", "umbrella", "skiing", "surfing", "china"};

constexpr std::array<std::string_view, 24> kMultiText = {
    "light blue",     "dark blue",      "light green",   "dark green",  "fire hydrant",
    "stop sign",      "tennis racket",  "living room",   "baseball bat", "united states",
    "new york city",  "hot dog",        "cell phone",    "traffic light", "teddy bear",
    "dark gray",      "light brown",    "parking meter", "red and white", "black and white",
    "south korea",    "ice cream",      "wine glass",    "soccer ball"};

constexpr std::array<std::string_view, 6> kCrossType = {"yes", "no", "unanswerable", "0",
                                                        "none", "gray"};

enum class Kind { boolean, text, numeric };

std::string single_number(Rng& rng) {
  static constexpr std::array<int, 8> kRound = {30, 40, 50, 60, 75, 80, 90, 100};
  const auto r = rng.below(40);
  if (r < 32) return std::to_string(r);
  return std::to_string(kRound[r - 32]);
}

std::string multi_number(Rng& rng) {
  switch (rng.below(4)) {
    case 0: {  // decimal like 2.6 or 12.75
      const auto whole = rng.below(100);
      const auto frac = 1 + rng.below(99);
      std::string f = std::to_string(frac);
      if (f.size() == 2 && f.back() == '0') f.pop_back();
      return std::to_string(whole) + "." + f;
    }
    case 1: {  // grouped thousands like 26,000
      const auto thousands = 1 + rng.below(999);
      const auto rest = rng.below(1000);
      std::string r = std::to_string(rest);
      r.insert(r.begin(), 3 - r.size(), '0');
      return std::to_string(thousands) + "," + r;
    }
    case 2:  // percentage
      return std::to_string(1 + rng.below(99)) + "%";
    default:  // 3-4 digit integer
      return std::to_string(100 + rng.below(9900));
  }
}

template <std::size_t N>
std::string pick(const std::array<std::string_view, N>& pool, Rng& rng) {
  return std::string(pool[rng.below(N)]);
}

std::string draw_raw(Kind kind, bool single, Rng& rng) {
  switch (kind) {
    case Kind::boolean: return rng.bernoulli(0.5) ? "yes" : "no";
    case Kind::numeric: return single ? single_number(rng) : multi_number(rng);
    case Kind::text: return single ? pick(kSingleText, rng) : pick(kMultiText, rng);
  }
  return "";
}

// Splits `raw` into 2-3 pieces whose concatenation is `raw`.
std::vector<std::string> spell(const std::string& raw, Rng& rng) {
  std::vector<std::string> words;
  for (std::size_t pos = 0; pos < raw.size();) {
    const auto next = raw.find(' ', pos + 1);
    const auto end = next == std::string::npos ? raw.size() : next;
    words.push_back(raw.substr(pos, end - pos));
    pos = end;
  }
  if (words.size() >= 2) {
    while (words.size() > 3) {
      words[words.size() - 2] += words.back();
      words.pop_back();
    }
    return words;
  }
  if (raw.size() < 2) return {raw};
  const std::size_t pieces = raw.size() >= 3 && rng.bernoulli(0.5) ? 3 : 2;
  std::set<std::size_t> cuts;
  while (cuts.size() + 1 < pieces) cuts.insert(1 + rng.below(raw.size() - 1));
  std::vector<std::string> out;
  std::size_t prev = 0;
  for (std::size_t c : cuts) {
    out.push_back(raw.substr(prev, c - prev));
    prev = c;
  }
  out.push_back(raw.substr(prev));
  return out;
}

std::vector<double> zipf_profile(std::size_t n, double exponent) {
  std::vector<double> w(n);
  double z = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    w[r] = std::pow(static_cast<double>(r + 1), -exponent);
    z += w[r];
  }
  for (double& v : w) v /= z;
  return w;
}

struct DraftAnswer {
  std::string raw;
  bool multi_token;
};

Instance build_instance(const WorldSpec& spec, std::size_t index, Rng& rng) {
  const std::string id = "inst-" + std::to_string(index);
  std::vector<DraftAnswer> drafts;
  std::set<CanonicalAnswer> seen;
  auto add = [&](std::string raw, bool multi) {
    CanonicalAnswer c = canonicalize_answer(raw);
    if (c.is_sentinel() || !seen.insert(c).second) return false;
    drafts.push_back({std::move(raw), multi});
    return true;
  };

  if (spec.multiple_choice) {
    const std::size_t gold = rng.below(spec.answer_set_size);
    add(std::string(1, static_cast<char>('a' + gold)), false);
    for (std::size_t i = 0; i < spec.answer_set_size; ++i)
      if (i != gold) add(std::string(1, static_cast<char>('a' + i)), false);
  } else {
    const double u = rng.uniform();
    const Kind kind = u < spec.boolean_fraction ? Kind::boolean
                      : u < spec.boolean_fraction + spec.numeric_fraction ? Kind::numeric
                                                                          : Kind::text;
    if (kind == Kind::boolean) {
      const bool yes = rng.bernoulli(spec.yes_rate);
      add(yes ? "yes" : "no", false);
      add(yes ? "no" : "yes", false);
    } else {
      const double single_rate = spec.boolean_fraction < 1.0
                                     ? (spec.single_token_fraction - spec.boolean_fraction) /
                                           (1.0 - spec.boolean_fraction)
                                     : 1.0;
      const bool single = rng.bernoulli(single_rate);
      while (!add(draw_raw(kind, single, rng), !single)) {}
      const CanonicalAnswer head = canonicalize_answer(drafts.front().raw);
      std::size_t attempts = 0;
      while (drafts.size() < spec.answer_set_size && attempts++ < 1000) {
        const double r = rng.uniform();
        if (r < 0.15) {
          add(pick(kCrossType, rng), false);
        } else if (kind == Kind::numeric && r < 0.3) {
          // order-of-magnitude distractor
          const double scaled = head.numeric_value() * (rng.bernoulli(0.5) ? 10.0 : 0.1);
          const std::string raw = format_double(std::round(scaled * 100.0) / 100.0);
          add(raw, raw.size() > 2);
        } else {
          const bool s = rng.bernoulli(0.5);
          add(draw_raw(kind, s, rng), !s);
        }
      }
    }
  }

  // Gold at rank 1; distractors take the remaining ranks in random order.
  const double exponent = spec.head_heaviness * rng.uniform(0.5, 1.5);
  const std::vector<double> profile = zipf_profile(drafts.size(), exponent);
  std::vector<std::size_t> rank_of(drafts.size());
  std::iota(rank_of.begin(), rank_of.end(), std::size_t{0});
  for (std::size_t i = rank_of.size() - 1; i > 1; --i)
    std::swap(rank_of[i], rank_of[1 + rng.below(i)]);

  // Shuffle presentation order so the gold answer has no fixed slot.
  std::vector<std::size_t> order(drafts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

  std::vector<CanonicalAnswer> answers;
  std::vector<double> p;
  std::vector<const DraftAnswer*> ordered_drafts;
  for (std::size_t slot : order) {
    answers.push_back(canonicalize_answer(drafts[slot].raw));
    p.push_back(profile[rank_of[slot]]);
    ordered_drafts.push_back(&drafts[slot]);
  }
  AnswerSpace space(std::move(answers));
  const std::vector<double> q = miscalibrate(p, spec.miscal, rng);
  AnswerDist p_true = AnswerDist::from_space(space, p);

  std::shared_ptr<const SequenceModel> model;
  if (spec.token_level) {
    std::vector<std::vector<std::string>> spellings;
    for (const DraftAnswer* d : ordered_drafts)
      spellings.push_back(d->multi_token ? spell(d->raw, rng) : std::vector<std::string>{d->raw});
    model = make_spelled_model(id, spellings, q);
  } else {
    model = make_answer_level_model(id, space, q);
  }
  return Instance{InstanceRef{id}, std::move(space), std::move(p_true), std::move(model)};
}

}  // namespace

World generate_world(const WorldSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  World world;
  world.seed = seed;
  world.spec = spec;
  world.instances.reserve(spec.num_instances);
  for (std::size_t i = 0; i < spec.num_instances; ++i)
    world.instances.push_back(build_instance(spec, i, rng));
  return world;
}

Instance make_answer_instance(std::string id, std::vector<CanonicalAnswer> answers,
                              std::vector<double> p_true, std::optional<std::vector<double>> q) {
  AnswerSpace space(std::move(answers));
  AnswerDist p = AnswerDist::from_space(space, p_true);
  auto model = make_answer_level_model(id, space, q ? *q : p_true);
  return Instance{InstanceRef{std::move(id)}, std::move(space), std::move(p), std::move(model)};
}

// ---------------------------------------------------------------------------
// Reasoning worlds

World generate_reasoning_world(std::size_t num_instances, std::size_t max_reasoning,
                               double confidence, std::uint64_t seed) {
  if (num_instances == 0 || max_reasoning == 0)
    throw Error(ErrorKind::invalid_spec, "reasoning world needs instances and reasoning length");
  if (!(confidence > 0.0 && confidence <= 1.0))
    throw Error(ErrorKind::invalid_spec, "confidence must lie in (0, 1]");
  constexpr std::uint32_t kReasonTokens = 3;
  constexpr std::uint32_t kAnswers = 3;
  const TokenId think_end{kReasonTokens};
  const std::uint32_t first_answer = kReasonTokens + 1;
  const TokenId eos{first_answer + kAnswers};
  const std::size_t V = eos.value + 1;

  Rng rng(seed);
  World world;
  world.seed = seed;
  for (std::size_t n = 0; n < num_instances; ++n) {
    const std::string id = "reason-" + std::to_string(n);
    std::vector<std::string> labels = {"<r0>", "<r1>", "<r2>", "</think>"};
    std::vector<CanonicalAnswer> answers;
    std::set<std::string> used;
    while (answers.size() < kAnswers) {
      const std::string raw = std::to_string(rng.below(50));
      if (!used.insert(raw).second) continue;
      answers.push_back(canonicalize_answer(raw));
      labels.push_back(raw);
    }
    labels.emplace_back("</s>");
    AnswerSpace space(answers);

    std::vector<double> p = zipf_profile(kAnswers, rng.uniform(0.5, 2.5));
    for (std::size_t i = kAnswers - 1; i > 0; --i) std::swap(p[i], p[rng.below(i + 1)]);
    std::vector<std::uint32_t> eligible;
    for (std::uint32_t a = 0; a < kAnswers; ++a)
      if (p[a] >= 1.0 / kAnswers) eligible.push_back(a);

    TabularModel::Rows rows;
    std::vector<TokenSeq> frontier{TokenSeq{}};
    while (!frontier.empty()) {
      TokenSeq prefix = std::move(frontier.back());
      frontier.pop_back();
      std::vector<double> row(V, 0.0);
      if (prefix.size() < max_reasoning) {
        // Stopping becomes likelier as the trace grows.
        const double stop = 0.15 + 0.7 * static_cast<double>(prefix.size()) /
                                       static_cast<double>(max_reasoning);
        double z = 0.0;
        std::array<double, kReasonTokens> w{};
        for (double& x : w) z += (x = rng.uniform(0.2, 1.0));
        for (std::uint32_t t = 0; t < kReasonTokens; ++t) {
          row[t] = (1.0 - stop) * w[t] / z;
          TokenSeq child = prefix;
          child.push_back(TokenId{t});
          frontier.push_back(std::move(child));
        }
        row[think_end.value] = stop;
      } else {
        row[think_end.value] = 1.0;
      }
      rows.emplace(prefix, ProbVector(row));

      TokenSeq closed = prefix;
      closed.push_back(think_end);
      std::vector<double> answer_row(V, 0.0);
      const std::uint32_t top = eligible[rng.below(eligible.size())];
      for (std::uint32_t a = 0; a < kAnswers; ++a)
        answer_row[first_answer + a] =
            a == top ? confidence : (1.0 - confidence) / static_cast<double>(kAnswers - 1);
      rows.emplace(closed, ProbVector(answer_row));
      for (std::uint32_t a = 0; a < kAnswers; ++a) {
        TokenSeq done = closed;
        done.push_back(TokenId{first_answer + a});
        rows.emplace(done, ProbVector::point_mass(V, eos));
      }
    }

    std::map<std::string, TabularModel::Rows> table;
    table.emplace(id, std::move(rows));
    auto model = std::make_shared<const TabularModel>(
        Vocabulary(V, eos, think_end, std::move(labels)), max_reasoning + 3, std::move(table));
    world.instances.push_back(Instance{InstanceRef{id}, space, AnswerDist::from_space(space, p),
                                       std::move(model)});
  }
  return world;
}

}  // namespace decodecal
