#include "decodecal/harness/remote.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace decodecal::harness {

using nlohmann::json;

namespace {

constexpr double kTailNoise = 1e-9;

std::vector<std::pair<std::string, double>> parse_step(const std::string& body) {
  try {
    const json doc = json::parse(body);
    const json& top = doc.at("choices").at(0).at("logprobs").at("top_logprobs").at(0);
    std::vector<std::pair<std::string, double>> out;
    for (const auto& [tok, lp] : top.items()) out.emplace_back(tok, lp.get<double>());
    if (out.empty()) throw Error(ErrorKind::parse, "endpoint returned no alternatives");
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, std::string("endpoint response: ") + e.what());
  }
}

class Transport {
 public:
  explicit Transport(const RemoteEndpoint& ep) : ep_(ep), client_(ep.base_url) {
    const auto secs = std::chrono::duration_cast<std::chrono::microseconds>(ep.timeout);
    client_.set_connection_timeout(secs);
    client_.set_read_timeout(secs);
    client_.set_write_timeout(secs);
    if (ep.auth_env) {
      const char* token = std::getenv(ep.auth_env->c_str());
      if (!token || !*token)
        throw Error(ErrorKind::auth, "environment variable '" + *ep.auth_env + "' is not set");
      headers_.emplace("Authorization", std::string("Bearer ") + token);
    }
  }

  std::string post(const std::string& body) {
    Error last(ErrorKind::transport, "no attempt made");
    for (std::size_t attempt = 0; attempt <= ep_.max_retries; ++attempt) {
      if (attempt > 0) {
        const auto shift = std::min<std::size_t>(attempt - 1, 20);
        const std::chrono::milliseconds wait =
            std::min<std::chrono::milliseconds>(ep_.backoff_max, ep_.backoff_initial * (1L << shift));
        std::this_thread::sleep_for(wait);
      }
      auto res = client_.Post(ep_.path, headers_, body, "application/json");
      if (!res) {
        const httplib::Error e = res.error();
        const bool timed_out = e == httplib::Error::ConnectionTimeout || e == httplib::Error::Read;
        last = Error(timed_out ? ErrorKind::timeout : ErrorKind::transport,
                     ep_.base_url + ep_.path + ": " + httplib::to_string(e));
        continue;
      }
      const int status = res->status;
      if (status >= 200 && status < 300) return res->body;
      const std::string what = ep_.base_url + ep_.path + ": HTTP " + std::to_string(status);
      if (status == 401 || status == 403) throw Error(ErrorKind::auth, what);
      if (status == 429 || status >= 500) {
        last = Error(ErrorKind::http, what);
        continue;
      }
      throw Error(ErrorKind::http, what);
    }
    throw last;
  }

 private:
  const RemoteEndpoint& ep_;
  httplib::Client client_;
  httplib::Headers headers_;
};

}  // namespace

void RemoteEndpoint::validate() const {
  if (base_url.empty()) throw Error(ErrorKind::configuration, "endpoint base_url is empty");
  if (depth < 1) throw Error(ErrorKind::configuration, "logprobs depth must be >= 1");
  if (timeout.count() <= 0) throw Error(ErrorKind::configuration, "timeout must be positive");
  if (backoff_initial.count() < 0 || backoff_max < backoff_initial)
    throw Error(ErrorKind::configuration, "invalid backoff bounds");
}

RemoteEndpoint RemoteEndpoint::from_json(std::string_view text) {
  RemoteEndpoint ep;
  try {
    const json doc = json::parse(text);
    for (const auto& [key, _] : doc.items()) {
      static const std::vector<std::string> known = {
          "base_url", "path", "model", "auth_env", "depth", "timeout_ms",
          "max_retries", "backoff_ms", "backoff_max_ms", "eos_text"};
      if (std::find(known.begin(), known.end(), key) == known.end())
        throw Error(ErrorKind::configuration, "unknown endpoint field '" + key + "'");
    }
    ep.base_url = doc.at("base_url").get<std::string>();
    if (doc.contains("path")) ep.path = doc.at("path").get<std::string>();
    if (doc.contains("model")) ep.model = doc.at("model").get<std::string>();
    if (doc.contains("auth_env")) ep.auth_env = doc.at("auth_env").get<std::string>();
    if (doc.contains("depth")) ep.depth = doc.at("depth").get<std::size_t>();
    if (doc.contains("timeout_ms")) ep.timeout = std::chrono::milliseconds(doc.at("timeout_ms").get<long>());
    if (doc.contains("max_retries")) ep.max_retries = doc.at("max_retries").get<std::size_t>();
    if (doc.contains("backoff_ms"))
      ep.backoff_initial = std::chrono::milliseconds(doc.at("backoff_ms").get<long>());
    if (doc.contains("backoff_max_ms"))
      ep.backoff_max = std::chrono::milliseconds(doc.at("backoff_max_ms").get<long>());
    if (doc.contains("eos_text")) ep.eos_text = doc.at("eos_text").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::configuration, std::string("endpoint config: ") + e.what());
  }
  ep.validate();
  return ep;
}

std::vector<std::string> coverage_warnings(const StrategySpec& spec, std::size_t depth,
                                           double covered_mass, double max_raw_prob) {
  std::vector<std::string> w;
  const double tail = std::max(0.0, 1.0 - covered_mass);
  const bool has_tail = tail > kTailNoise;
  switch (spec.family) {
    case Family::greedy:
      break;
    case Family::temperature_only:
      if (has_tail) w.push_back("tail mass " + format_double(tail) + " outside top-n is dropped");
      break;
    case Family::top_k:
      if (spec.alpha > static_cast<double>(depth))
        w.push_back("k = " + format_double(spec.alpha) + " exceeds logprobs depth " +
                    std::to_string(depth));
      break;
    case Family::top_p:
      if (covered_mass < spec.alpha)
        w.push_back("top-n mass " + format_double(covered_mass) + " does not cover p = " +
                    format_double(spec.alpha));
      break;
    case Family::min_p:
      if (tail >= spec.alpha * max_raw_prob && has_tail)
        w.push_back("unseen tokens may pass the min-p threshold");
      break;
    case Family::epsilon:
      if (tail >= spec.alpha && has_tail) w.push_back("unseen tokens may pass the epsilon threshold");
      break;
    case Family::eta:
      if (has_tail) w.push_back("entropy and eta threshold computed over top-n only");
      break;
    case Family::beam:
      break;
  }
  return w;
}

RemoteRollout remote_rollout(const RemoteEndpoint& endpoint, const std::string& prompt,
                             const StrategySpec& spec, Rng& rng, std::size_t max_len) {
  endpoint.validate();
  spec.validate();
  if (spec.family == Family::beam)
    throw Error(ErrorKind::invalid_parameter, "beam search is not supported remotely");
  if (max_len < 1) throw Error(ErrorKind::invalid_parameter, "max_len must be >= 1");

  Transport transport(endpoint);
  RemoteRollout out;
  std::string context = prompt;
  while (out.tokens.size() < max_len) {
    json req{{"prompt", context}, {"max_tokens", 1}, {"logprobs", endpoint.depth}};
    if (endpoint.model) req["model"] = *endpoint.model;
    StepRecord rec;
    rec.top_logprobs = parse_step(transport.post(req.dump()));

    std::vector<double> probs;
    for (const auto& [_, lp] : rec.top_logprobs) probs.push_back(std::exp(lp));
    for (double p : probs) rec.covered_mass += p;
    rec.tail_mass = std::max(0.0, 1.0 - rec.covered_mass);
    if (!(rec.covered_mass > 0.0)) throw Error(ErrorKind::parse, "alternatives carry no mass");
    for (double& p : probs) p /= rec.covered_mass;

    const ProbVector dist = truncated_distribution(ProbVector(probs), spec);
    for (double p : dist.values()) rec.candidate_count += p > 0.0 ? 1 : 0;
    const TokenId pick = spec.family == Family::greedy ? greedy_token(dist) : sample_token(dist, rng);
    rec.chosen = rec.top_logprobs[pick.value].first;
    rec.warnings = coverage_warnings(spec, endpoint.depth, rec.covered_mass,
                                     std::exp(rec.top_logprobs.front().second));
    out.steps.push_back(rec);
    if (rec.chosen == endpoint.eos_text) {
      out.finished = true;
      break;
    }
    out.tokens.push_back(rec.chosen);
    out.text += rec.chosen;
    context += rec.chosen;
  }
  return out;
}

std::string remote_rollout_to_json(const RemoteRollout& r) {
  json steps = json::array();
  for (const StepRecord& s : r.steps) {
    json alts = json::array();
    for (const auto& [tok, lp] : s.top_logprobs) alts.push_back({{"token", tok}, {"logprob", lp}});
    steps.push_back({{"top_logprobs", alts},
                     {"chosen", s.chosen},
                     {"covered_mass", s.covered_mass},
                     {"tail_mass", s.tail_mass},
                     {"candidate_count", s.candidate_count},
                     {"warnings", s.warnings}});
  }
  json doc{{"tokens", r.tokens}, {"text", r.text}, {"finished", r.finished}, {"steps", steps}};
  return doc.dump(2) + "\n";
}

}  // namespace decodecal::harness
