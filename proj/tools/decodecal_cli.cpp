// decodecal: command-line front end for worlds, sweeps, theorem checks,
// rank curves, GDRM decoding and remote rollouts.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "decodecal/calibration.hpp"
#include "decodecal/gdrm.hpp"
#include "decodecal/harness/config.hpp"
#include "decodecal/harness/remote.hpp"
#include "decodecal/harness/report.hpp"
#include "decodecal/harness/sweep.hpp"
#include "decodecal/worlds.hpp"

using namespace decodecal;
using namespace decodecal::harness;
namespace fs = std::filesystem;

namespace {

struct WorldArgs {
  std::string path;
  std::string preset = "vqa-headheavy";
  std::size_t num_instances = 0;
  bool token_level = false;
};

void add_world_args(CLI::App* cmd, WorldArgs& w) {
  cmd->add_option("--world", w.path, "World file (JSON)");
  cmd->add_option("--preset", w.preset, "World preset when no file is given")
      ->check(CLI::IsMember(preset_names()));
  cmd->add_option("--num-instances", w.num_instances, "Override the preset instance count");
  cmd->add_flag("--token-level", w.token_level, "Spell multi-token answers with 2-3 tokens");
}

World resolve_world(const WorldArgs& w, std::uint64_t seed) {
  if (!w.path.empty()) return load_world(w.path);
  WorldSource src;
  src.preset = w.preset;
  src.seed = seed;
  if (w.num_instances > 0) src.num_instances = w.num_instances;
  if (w.token_level) src.token_level = true;
  return load_world_source(src);
}

std::string out_file(const std::string& dir, const std::string& name) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create output directory '" + dir + "': " + ec.message());
  return (fs::path(dir) / name).string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<StrategySpec> theorem_grid(const std::vector<std::string>& encoded) {
  std::vector<StrategySpec> grid;
  std::set<std::string> seen;
  auto add = [&](const StrategySpec& s) {
    if (seen.insert(s.encode()).second) grid.push_back(s);
  };
  if (!encoded.empty()) {
    for (const auto& e : encoded) add(StrategySpec::parse(e));
    return grid;
  }
  for (const auto& base : default_grid())
    for (double tau : default_temperatures()) add(base.at_temperature(tau));
  for (const auto& b : default_beam_grid()) add(b);
  return grid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decoding-strategy calibration and greedy-optimality toolkit"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string config_path;
  std::string out_dir = "out";
  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Master seed");
    cmd->add_option("--config", config_path, "Config file (JSON)");
    cmd->add_option("--out", out_dir, "Output directory");
  };

  // gen-world
  auto* gen = app.add_subcommand("gen-world", "Generate a synthetic world file");
  common(gen);
  WorldArgs gen_world;
  gen->add_option("--preset", gen_world.preset, "World preset")->check(CLI::IsMember(preset_names()));
  gen->add_option("--num-instances", gen_world.num_instances, "Override the preset instance count");
  gen->add_flag("--token-level", gen_world.token_level, "Spell multi-token answers with 2-3 tokens");
  bool reasoning = false;
  std::size_t max_think = 4;
  double confidence = 0.95;
  gen->add_flag("--reasoning", reasoning, "Generate a reasoning world for gdrm instead");
  gen->add_option("--max-think", max_think, "Reasoning world: longest trace");
  gen->add_option("--confidence", confidence, "Reasoning world: post-trace answer confidence");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run a strategy x temperature x seed sweep");
  common(sweep);
  std::size_t sweep_workers = 0;
  sweep->add_option("--workers", sweep_workers, "Override the worker count");

  // verify-theorem
  auto* verify = app.add_subcommand("verify-theorem", "Check the greedy-optimality conditions");
  common(verify);
  WorldArgs verify_world;
  add_world_args(verify, verify_world);
  std::vector<std::string> verify_strategies;
  verify->add_option("--strategies", verify_strategies, "Strategy encodings (default grid if empty)");

  // curves
  auto* curves = app.add_subcommand("curves", "Emit G1^k and ECE^k rank curves");
  common(curves);
  WorldArgs curves_world;
  add_world_args(curves, curves_world);
  std::size_t k_max = 0;
  curves->add_option("--k-max", k_max, "Largest k (default: largest answer space)");

  // gdrm
  auto* gdrm = app.add_subcommand("gdrm", "Two-phase decoding on a reasoning world");
  common(gdrm);
  std::string gdrm_world_path;
  std::string reasoning_spec = "temperature_only";
  std::size_t gdrm_instances = 20;
  GdrmConfig gcfg;
  gdrm->add_option("--world", gdrm_world_path, "Reasoning world file (default: generated)");
  gdrm->add_option("--num-instances", gdrm_instances, "Generated world size");
  gdrm->add_option("--reasoning", reasoning_spec, "Phase-1 strategy");
  gdrm->add_option("--max-think", gcfg.max_reasoning_len, "Longest reasoning trace");
  gdrm->add_option("--max-answer", gcfg.max_answer_len, "Longest answer");

  // remote-eval
  auto* remote = app.add_subcommand("remote-eval", "Roll out a strategy against a logprobs endpoint");
  common(remote);
  std::string endpoint_path;
  std::string prompt;
  std::string remote_strategy = "greedy";
  std::size_t remote_max_len = 32;
  remote->add_option("--endpoint", endpoint_path, "Endpoint config (JSON)")->required();
  remote->add_option("--prompt", prompt, "Prompt text")->required();
  remote->add_option("--strategy", remote_strategy, "Strategy encoding");
  remote->add_option("--max-len", remote_max_len, "Generated token limit");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      World w = reasoning ? generate_reasoning_world(gen_world.num_instances ? gen_world.num_instances : 100,
                                                     max_think, confidence, seed)
                          : resolve_world(gen_world, seed);
      const std::string path = out_file(out_dir, "world.json");
      write_file_atomic(path, world_to_json(w) + "\n");
      std::cout << "wrote " << w.instances.size() << " instances to " << path << "\n";
    } else if (sweep->parsed()) {
      if (config_path.empty()) throw Error(ErrorKind::configuration, "sweep needs --config");
      SweepConfig cfg = load_config(config_path);
      if (sweep->count("--out")) cfg.out = out_dir;
      if (sweep->count("--seed") && !cfg.world.path) cfg.world.seed = seed;
      if (sweep_workers > 0) cfg.workers = sweep_workers;
      const ReportSet rs = run_sweep(cfg);
      emit_report(rs, cfg.out);
      std::cout << "wrote " << rs.rows.size() << " rows to " << cfg.out << "\n";
    } else if (verify->parsed()) {
      const World w = resolve_world(verify_world, seed);
      const TheoremReport rep = verify_greedy_optimality(w, theorem_grid(verify_strategies));
      write_file_atomic(out_file(out_dir, "theorem.json"), rep.to_json() + "\n");
      std::cout << to_string(rep.verdict) << "\n";
      return rep.verdict == Verdict::theorem_applies_and_VIOLATED ? 2 : 0;
    } else if (curves->parsed()) {
      const World w = resolve_world(curves_world, seed);
      const std::size_t k = k_max ? k_max : max_answer_space(w);
      const std::string path = out_file(out_dir, "rank_curves.csv");
      emit_rank_curves(w, k, path);
      std::cout << "wrote " << path << "\n";
    } else if (gdrm->parsed()) {
      const World w = gdrm_world_path.empty()
                          ? generate_reasoning_world(gdrm_instances, 4, 0.95, seed)
                          : load_world(gdrm_world_path);
      gcfg.reasoning_spec = StrategySpec::parse(reasoning_spec);
      nlohmann::json results = nlohmann::json::array();
      double hit = 0.0;
      for (const Instance& inst : w.instances) {
        Rng rng(derive_seed(seed, gcfg.reasoning_spec.encode(), inst.ref.id));
        const GdrmResult r = gdrm_decode(*inst.model, inst.ref, gcfg, rng, inst.space);
        const Vocabulary& v = inst.model->vocabulary();
        std::vector<std::string> trace, answer;
        for (TokenId t : r.reasoning) trace.push_back(v.label(t));
        for (TokenId t : r.answer_tokens) answer.push_back(v.label(t));
        hit += inst.p_true.prob(r.answer);
        results.push_back({{"id", inst.ref.id},
                           {"reasoning", trace},
                           {"answer_tokens", answer},
                           {"answer", r.answer.render()},
                           {"truncated_reasoning", r.truncated_reasoning}});
      }
      nlohmann::json doc{{"reasoning_spec", gcfg.reasoning_spec.encode()},
                         {"mean_p_answer", hit / static_cast<double>(w.instances.size())},
                         {"instances", results}};
      const std::string path = out_file(out_dir, "gdrm.json");
      write_file_atomic(path, doc.dump(2) + "\n");
      std::cout << "wrote " << path << "\n";
    } else if (remote->parsed()) {
      const RemoteEndpoint ep = RemoteEndpoint::from_json(read_file(endpoint_path));
      Rng rng(seed);
      const RemoteRollout r =
          remote_rollout(ep, prompt, StrategySpec::parse(remote_strategy), rng, remote_max_len);
      const std::string path = out_file(out_dir, "remote.json");
      write_file_atomic(path, remote_rollout_to_json(r));
      std::cout << r.text << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "decodecal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
