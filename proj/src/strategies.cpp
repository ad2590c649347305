#include "decodecal/strategies.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

namespace decodecal {

namespace {

constexpr std::pair<Family, std::string_view> kFamilyNames[] = {
    {Family::greedy, "greedy"},   {Family::temperature_only, "temperature_only"},
    {Family::top_k, "top_k"},     {Family::top_p, "top_p"},
    {Family::min_p, "min_p"},     {Family::epsilon, "epsilon"},
    {Family::eta, "eta"},         {Family::beam, "beam"},
};

double parse_real(std::string_view s, std::string_view what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
    throw Error(ErrorKind::parse, "bad " + std::string(what) + " '" + std::string(s) + "'");
  return v;
}

bool is_positive_integer(double v) { return v >= 1.0 && std::floor(v) == v && v < 1e9; }

// Indices ordered by descending probability, ties to lower id.
std::vector<std::uint32_t> descending_order(const ProbVector& dist) {
  std::vector<std::uint32_t> idx(dist.size());
  std::iota(idx.begin(), idx.end(), 0u);
  const auto p = dist.values();
  std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) { return p[a] > p[b]; });
  return idx;
}

CandidateSet threshold_filter(const ProbVector& dist, double threshold, bool fallback) {
  CandidateSet out;
  const auto p = dist.values();
  for (std::uint32_t i = 0; i < p.size(); ++i)
    if (p[i] >= threshold) out.push_back(TokenId{i});
  if (out.empty() && fallback) out.push_back(greedy_token(dist));
  return out;
}

}  // namespace

std::string_view to_string(Family f) {
  for (const auto& [fam, name] : kFamilyNames)
    if (fam == f) return name;
  return "greedy";
}

std::optional<Family> family_from_string(std::string_view s) {
  for (const auto& [fam, name] : kFamilyNames)
    if (name == s) return fam;
  if (s == "temperature" || s == "temp") return Family::temperature_only;
  return std::nullopt;
}

StrategySpec StrategySpec::at_temperature(double t) const {
  StrategySpec s = *this;
  if (!deterministic()) s.tau = t;
  return s;
}

void StrategySpec::validate() const {
  auto fail = [&](const std::string& why) {
    throw Error(ErrorKind::invalid_parameter, std::string(to_string(family)) + ": " + why);
  };
  if (!(tau > 0.0) || !std::isfinite(tau)) fail("tau must be positive and finite");
  switch (family) {
    case Family::greedy:
      if (tau != 1.0) fail("greedy takes no temperature");
      break;
    case Family::temperature_only:
      break;
    case Family::top_k:
      if (!is_positive_integer(alpha)) fail("k must be an integer >= 1");
      break;
    case Family::top_p:
      if (!(alpha > 0.0 && alpha <= 1.0)) fail("p must lie in (0, 1]");
      break;
    case Family::min_p:
      if (!(alpha > 0.0 && alpha <= 1.0)) fail("p_base must lie in (0, 1]");
      break;
    case Family::epsilon:
      if (!(alpha > 0.0 && alpha < 1.0)) fail("epsilon must lie in (0, 1)");
      break;
    case Family::eta:
      if (!(alpha > 0.0 && alpha < 1.0)) fail("eta must lie in (0, 1)");
      break;
    case Family::beam:
      if (!is_positive_integer(alpha)) fail("beam width must be an integer >= 1");
      if (tau != 1.0) fail("beam search takes no temperature");
      break;
  }
}

std::string StrategySpec::encode() const {
  std::string out(to_string(family));
  if (has_alpha()) out += ":" + format_double(alpha);
  if (tau != 1.0) out += "@" + format_double(tau);
  return out;
}

StrategySpec StrategySpec::parse(std::string_view text) {
  StrategySpec spec;
  std::string_view body = text;
  if (auto at = body.rfind('@'); at != std::string_view::npos) {
    spec.tau = parse_real(body.substr(at + 1), "temperature");
    body = body.substr(0, at);
  }
  std::string_view name = body;
  std::optional<std::string_view> param;
  if (auto colon = body.find(':'); colon != std::string_view::npos) {
    name = body.substr(0, colon);
    param = body.substr(colon + 1);
  }
  auto fam = family_from_string(name);
  if (!fam) throw Error(ErrorKind::parse, "unknown strategy family '" + std::string(name) + "'");
  spec.family = *fam;
  if (spec.has_alpha()) {
    if (!param) throw Error(ErrorKind::parse, "strategy '" + std::string(text) + "' needs a parameter");
    spec.alpha = parse_real(*param, "strategy parameter");
  } else if (param) {
    throw Error(ErrorKind::parse, "strategy '" + std::string(name) + "' takes no parameter");
  }
  spec.validate();
  return spec;
}

CandidateSet select_candidates(const ProbVector& dist, const StrategySpec& spec) {
  spec.validate();
  const std::size_t V = dist.size();
  switch (spec.family) {
    case Family::greedy:
      return {greedy_token(dist)};
    case Family::temperature_only: {
      CandidateSet all(V);
      for (std::uint32_t i = 0; i < V; ++i) all[i] = TokenId{i};
      return all;
    }
    case Family::top_k: {
      const std::size_t k = std::min(static_cast<std::size_t>(spec.alpha), V);
      std::vector<std::uint32_t> idx(V);
      std::iota(idx.begin(), idx.end(), 0u);
      const auto p = dist.values();
      std::nth_element(idx.begin(), idx.begin() + static_cast<long>(k - 1), idx.end(),
                       [&](std::uint32_t a, std::uint32_t b) {
                         return p[a] > p[b] || (p[a] == p[b] && a < b);
                       });
      CandidateSet out;
      for (std::size_t i = 0; i < k; ++i) out.push_back(TokenId{idx[i]});
      std::sort(out.begin(), out.end());
      return out;
    }
    case Family::top_p: {
      CandidateSet out;
      double mass = 0.0;
      for (std::uint32_t i : descending_order(dist)) {
        out.push_back(TokenId{i});
        mass += dist.values()[i];
        if (mass >= spec.alpha - kTopPSlack) break;
      }
      std::sort(out.begin(), out.end());
      return out;
    }
    case Family::min_p: {
      const auto p = dist.values();
      const double top = *std::max_element(p.begin(), p.end());
      return threshold_filter(dist, spec.alpha * top, true);
    }
    case Family::epsilon:
      return threshold_filter(dist, spec.alpha, true);
    case Family::eta: {
      const double threshold =
          std::min(spec.alpha, std::sqrt(spec.alpha) * std::exp(-entropy_nats(dist)));
      return threshold_filter(dist, threshold, true);
    }
    case Family::beam:
      break;
  }
  throw Error(ErrorKind::invalid_parameter, "beam search has no per-step candidate set");
}

ProbVector truncate_renormalize(const ProbVector& dist, const CandidateSet& candidates) {
  if (candidates.empty()) throw Error(ErrorKind::degenerate_support, "empty candidate set");
  double mass = 0.0;
  for (TokenId t : candidates) mass += dist[t];
  if (!(mass > 0.0)) throw Error(ErrorKind::degenerate_support, "candidate set has zero mass");
  std::vector<double> out(dist.size(), 0.0);
  for (TokenId t : candidates) out[t.value] = dist[t] / mass;
  return ProbVector(std::move(out));
}

ProbVector truncated_distribution(const ProbVector& raw, const StrategySpec& spec) {
  if (spec.family == Family::greedy) return ProbVector::point_mass(raw.size(), greedy_token(raw));
  const ProbVector scaled = apply_temperature(raw, spec.tau);
  return truncate_renormalize(scaled, select_candidates(scaled, spec));
}

TokenId sample_token(const ProbVector& dist, Rng& rng) {
  const double u = rng.uniform();
  const auto p = dist.values();
  double cum = 0.0;
  std::uint32_t last_positive = 0;
  for (std::uint32_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    cum += p[i];
    last_positive = i;
    if (u < cum) return TokenId{i};
  }
  // u landed in the rounding gap above the final cumulative sum.
  return TokenId{last_positive};
}

TokenId greedy_token(const ProbVector& dist) {
  const auto p = dist.values();
  return TokenId{static_cast<std::uint32_t>(std::max_element(p.begin(), p.end()) - p.begin())};
}

double entropy_nats(const ProbVector& dist) {
  double h = 0.0;
  for (double p : dist.values())
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

BeamResult beam_search(const SequenceModel& model, const InstanceRef& instance,
                       std::size_t width, std::size_t max_len, const BeamOptions& options) {
  if (width < 1) throw Error(ErrorKind::invalid_parameter, "beam width must be >= 1");
  if (max_len < 1) throw Error(ErrorKind::invalid_parameter, "max_len must be >= 1");
  std::vector<TokenId> stops = options.stop_tokens;
  if (stops.empty()) stops.push_back(model.vocabulary().eos());
  auto is_stop = [&](TokenId t) { return std::find(stops.begin(), stops.end(), t) != stops.end(); };

  struct Beam {
    TokenSeq seq;
    double score;
    bool done;
  };
  auto better = [](const Beam& a, const Beam& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.seq < b.seq;
  };

  std::vector<Beam> pool{{{}, 0.0, false}};
  for (std::size_t step = 0; step < max_len; ++step) {
    if (std::all_of(pool.begin(), pool.end(), [](const Beam& b) { return b.done; })) break;
    std::vector<Beam> next;
    for (const Beam& b : pool) {
      if (b.done) {
        next.push_back(b);
        continue;
      }
      TokenSeq context = options.prefix;
      context.insert(context.end(), b.seq.begin(), b.seq.end());
      const ProbVector dist = model.next_distribution(instance, context);
      for (std::uint32_t t = 0; t < dist.size(); ++t) {
        const double p = dist.values()[t];
        if (p <= 0.0) continue;
        Beam child{b.seq, b.score + std::log(p), false};
        child.seq.push_back(TokenId{t});
        child.done = is_stop(TokenId{t});
        next.push_back(std::move(child));
      }
    }
    std::sort(next.begin(), next.end(), better);
    if (next.size() > width) next.resize(width);
    pool = std::move(next);
  }

  const Beam* best_done = nullptr;
  for (const Beam& b : pool)
    if (b.done && (!best_done || better(b, *best_done))) best_done = &b;
  if (best_done) return {best_done->seq, best_done->score, false};
  // Pool is already sorted best-first.
  return {pool.front().seq, pool.front().score, true};
}

}  // namespace decodecal
