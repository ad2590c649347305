#pragma once

/**
 * Sweep configuration. JSON, `"version": 1`; unknown fields are rejected.
 *
 *   {
 *     "version": 1,
 *     "world": {"preset": "vqa-headheavy", "seed": 7, "num_instances": 500},
 *     "strategies": ["greedy", "top_k:5", "top_p:0.9", "beam:3"],
 *     "temperatures": [0.7, 1.0, 2.0],
 *     "seeds": [0, 1, 2, 3],
 *     "mode": "exact",
 *     "samples": 100000,
 *     "workers": 4,
 *     "out": "out"
 *   }
 *
 * "world" may instead be {"path": "world.json"}. Grid entries carry no
 * temperature; it comes from "temperatures".
 */

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "decodecal/calibration.hpp"
#include "decodecal/strategies.hpp"
#include "decodecal/worlds.hpp"

namespace decodecal::harness {

inline constexpr int kConfigVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

struct WorldSource {
  std::optional<std::string> path;
  std::string preset = "vqa-headheavy";
  std::uint64_t seed = 0;
  std::optional<std::size_t> num_instances;
  std::optional<bool> token_level;

  bool operator==(const WorldSource&) const = default;
};

struct SweepConfig {
  WorldSource world;
  std::vector<StrategySpec> grid;
  std::vector<double> temperatures = {1.0};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3};
  Mode mode = Mode::exact;
  // Monte-Carlo draws per seed.
  std::size_t samples = 100000;
  std::size_t workers = 1;
  std::string out = "out";
  double rel_tol = kDefaultRelTol;

  // Throws configuration errors for empty grids/seeds, tau <= 0, repeated
  // grid entries or grid entries carrying a temperature.
  void validate() const;

  static SweepConfig from_json(std::string_view text);
  std::string to_json() const;
  // Stable hash of the canonical JSON form.
  std::string hash() const;

  bool operator==(const SweepConfig&) const = default;
};

SweepConfig load_config(const std::string& path);

World load_world_source(const WorldSource& source);

// Default truncation grid and temperatures.
std::vector<StrategySpec> default_grid();
std::vector<double> default_temperatures();
std::vector<StrategySpec> default_beam_grid();

}  // namespace decodecal::harness
