#include "decodecal/harness/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace decodecal::harness {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const char* where) {
  if (!obj.is_object()) throw Error(ErrorKind::configuration, std::string(where) + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw Error(ErrorKind::configuration, std::string("unknown field '") + key + "' in " + where);
  }
}

}  // namespace

void SweepConfig::validate() const {
  if (grid.empty()) throw Error(ErrorKind::configuration, "strategy grid is empty");
  if (seeds.empty()) throw Error(ErrorKind::configuration, "seed list is empty");
  if (temperatures.empty()) throw Error(ErrorKind::configuration, "temperature list is empty");
  for (double t : temperatures)
    if (!(t > 0.0) || !std::isfinite(t))
      throw Error(ErrorKind::configuration, "temperatures must be positive");
  if (std::set<double>(temperatures.begin(), temperatures.end()).size() != temperatures.size())
    throw Error(ErrorKind::configuration, "temperatures repeat");
  std::set<std::string> seen;
  for (const StrategySpec& s : grid) {
    if (s.tau != 1.0)
      throw Error(ErrorKind::configuration,
                  "grid entry '" + s.encode() + "' carries a temperature; use \"temperatures\"");
    s.validate();
    if (!seen.insert(s.encode()).second)
      throw Error(ErrorKind::configuration, "grid entry '" + s.encode() + "' repeats");
  }
  if (samples == 0) throw Error(ErrorKind::configuration, "samples must be >= 1");
  if (workers == 0) throw Error(ErrorKind::configuration, "workers must be >= 1");
  if (!(rel_tol >= 0.0)) throw Error(ErrorKind::configuration, "rel_tol must be >= 0");
  if (!world.path) world_presets(world.preset);
}

SweepConfig SweepConfig::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, std::string("config: ") + e.what());
  }
  SweepConfig cfg;
  try {
    reject_unknown(doc,
                   {"version", "world", "strategies", "temperatures", "seeds", "mode", "samples",
                    "workers", "out", "rel_tol"},
                   "config");
    if (!doc.contains("version")) throw Error(ErrorKind::configuration, "config lacks 'version'");
    if (doc.at("version").get<int>() != kConfigVersion)
      throw Error(ErrorKind::configuration, "unsupported config version");
    if (doc.contains("world")) {
      const json& w = doc.at("world");
      reject_unknown(w, {"path", "preset", "seed", "num_instances", "token_level"}, "world");
      if (w.contains("path")) {
        if (w.size() != 1)
          throw Error(ErrorKind::configuration, "world.path excludes the preset fields");
        cfg.world.path = w.at("path").get<std::string>();
      }
      if (w.contains("preset")) cfg.world.preset = w.at("preset").get<std::string>();
      if (w.contains("seed")) cfg.world.seed = w.at("seed").get<std::uint64_t>();
      if (w.contains("num_instances")) cfg.world.num_instances = w.at("num_instances").get<std::size_t>();
      if (w.contains("token_level")) cfg.world.token_level = w.at("token_level").get<bool>();
    }
    if (doc.contains("strategies")) {
      for (const json& s : doc.at("strategies"))
        cfg.grid.push_back(StrategySpec::parse(s.get<std::string>()));
    } else {
      cfg.grid = default_grid();
    }
    if (doc.contains("temperatures")) cfg.temperatures = doc.at("temperatures").get<std::vector<double>>();
    if (doc.contains("seeds")) cfg.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    if (doc.contains("mode")) cfg.mode = mode_from_string(doc.at("mode").get<std::string>());
    if (doc.contains("samples")) cfg.samples = doc.at("samples").get<std::size_t>();
    if (doc.contains("workers")) cfg.workers = doc.at("workers").get<std::size_t>();
    if (doc.contains("out")) cfg.out = doc.at("out").get<std::string>();
    if (doc.contains("rel_tol")) cfg.rel_tol = doc.at("rel_tol").get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::configuration, std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string SweepConfig::to_json() const {
  json w = json::object();
  if (world.path) {
    w["path"] = *world.path;
  } else {
    w["preset"] = world.preset;
    w["seed"] = world.seed;
    if (world.num_instances) w["num_instances"] = *world.num_instances;
    if (world.token_level) w["token_level"] = *world.token_level;
  }
  std::vector<std::string> strategies;
  for (const auto& s : grid) strategies.push_back(s.encode());
  json doc{{"version", kConfigVersion},
           {"world", w},
           {"strategies", strategies},
           {"temperatures", temperatures},
           {"seeds", seeds},
           {"mode", to_string(mode)},
           {"samples", samples},
           {"workers", workers},
           {"out", out},
           {"rel_tol", rel_tol}};
  return doc.dump();
}

std::string SweepConfig::hash() const {
  // Worker count and output directory do not affect results.
  SweepConfig canonical = *this;
  canonical.workers = 1;
  canonical.out.clear();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(stable_hash(canonical.to_json())));
  return buf;
}

SweepConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return SweepConfig::from_json(ss.str());
}

World load_world_source(const WorldSource& source) {
  if (source.path) return load_world(*source.path);
  WorldSpec spec = world_presets(source.preset);
  if (source.num_instances) spec.num_instances = *source.num_instances;
  if (source.token_level) spec.token_level = *source.token_level;
  return generate_world(spec, source.seed);
}

std::vector<StrategySpec> default_grid() {
  std::vector<StrategySpec> g = {StrategySpec::greedy(), StrategySpec::temperature(1.0)};
  for (std::size_t k : {5, 10, 50}) g.push_back(StrategySpec::top_k(k));
  for (double p : {0.8, 0.9, 0.95}) g.push_back(StrategySpec::top_p(p));
  for (double p : {0.05, 0.1, 0.2}) g.push_back(StrategySpec::min_p(p));
  for (double e : {3e-4, 1e-3, 9e-3}) g.push_back(StrategySpec::epsilon(e));
  for (double e : {3e-4, 2e-3, 4e-3}) g.push_back(StrategySpec::eta(e));
  return g;
}

std::vector<double> default_temperatures() { return {0.7, 1.0, 2.0}; }

std::vector<StrategySpec> default_beam_grid() {
  return {StrategySpec::beam(3), StrategySpec::beam(5), StrategySpec::beam(10)};
}

}  // namespace decodecal::harness
