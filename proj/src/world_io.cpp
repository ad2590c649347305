#include <fstream>
#include <sstream>

#include <json.hpp>

#include "decodecal/worlds.hpp"

namespace decodecal {

using nlohmann::json;

namespace {

constexpr const char* kFormatVersion = "1";

json spec_to_json(const WorldSpec& s) {
  return json{
      {"num_instances", s.num_instances},
      {"answer_set_size", s.answer_set_size},
      {"head_heaviness", s.head_heaviness},
      {"single_token_fraction", s.single_token_fraction},
      {"boolean_fraction", s.boolean_fraction},
      {"numeric_fraction", s.numeric_fraction},
      {"yes_rate", s.yes_rate},
      {"multiple_choice", s.multiple_choice},
      {"miscal",
       {{"uniform_mix", s.miscal.uniform_mix},
        {"gamma", s.miscal.gamma},
        {"argmax_flip_rate", s.miscal.argmax_flip_rate}}},
      {"token_level", s.token_level},
  };
}

WorldSpec spec_from_json(const json& j) {
  WorldSpec s;
  s.num_instances = j.at("num_instances").get<std::size_t>();
  s.answer_set_size = j.at("answer_set_size").get<std::size_t>();
  s.head_heaviness = j.at("head_heaviness").get<double>();
  s.single_token_fraction = j.at("single_token_fraction").get<double>();
  s.boolean_fraction = j.at("boolean_fraction").get<double>();
  s.numeric_fraction = j.at("numeric_fraction").get<double>();
  s.yes_rate = j.at("yes_rate").get<double>();
  s.multiple_choice = j.at("multiple_choice").get<bool>();
  const json& m = j.at("miscal");
  s.miscal = {m.at("uniform_mix").get<double>(), m.at("gamma").get<double>(),
              m.at("argmax_flip_rate").get<double>()};
  s.token_level = j.at("token_level").get<bool>();
  s.validate();
  return s;
}

json tokens_to_json(const TokenSeq& seq) {
  json arr = json::array();
  for (TokenId t : seq) arr.push_back(t.value);
  return arr;
}

json model_to_json(const SequenceModel& model, const std::string& id) {
  const auto* tab = dynamic_cast<const TabularModel*>(&model);
  if (!tab) throw Error(ErrorKind::invalid_input, "only tabular models serialize to world files");
  const auto it = tab->table().find(id);
  if (it == tab->table().end())
    throw Error(ErrorKind::missing_entry, "model holds no rows for instance '" + id + "'");
  const Vocabulary& v = tab->vocabulary();
  json vocab{{"size", v.size()}, {"eos", v.eos().value}};
  vocab["think_end"] = v.think_end() ? json(v.think_end()->value) : json(nullptr);
  vocab["labels"] = v.labels() ? json(*v.labels()) : json(nullptr);
  json rows = json::array();
  for (const auto& [prefix, row] : it->second) {
    rows.push_back({{"prefix", tokens_to_json(prefix)},
                    {"probs", std::vector<double>(row.values().begin(), row.values().end())}});
  }
  return json{{"type", "tabular"}, {"max_len", tab->max_length()}, {"vocab", vocab}, {"rows", rows}};
}

std::shared_ptr<const SequenceModel> model_from_json(const json& j, const std::string& id) {
  if (j.at("type").get<std::string>() != "tabular")
    throw Error(ErrorKind::parse, "unsupported model type '" + j.at("type").get<std::string>() + "'");
  const json& v = j.at("vocab");
  std::optional<TokenId> think_end;
  if (!v.at("think_end").is_null()) think_end = TokenId{v.at("think_end").get<std::uint32_t>()};
  std::optional<std::vector<std::string>> labels;
  if (!v.at("labels").is_null()) labels = v.at("labels").get<std::vector<std::string>>();
  Vocabulary vocab(v.at("size").get<std::size_t>(), TokenId{v.at("eos").get<std::uint32_t>()},
                   think_end, std::move(labels));
  TabularModel::Rows rows;
  for (const json& r : j.at("rows")) {
    TokenSeq prefix;
    for (const json& t : r.at("prefix")) prefix.push_back(TokenId{t.get<std::uint32_t>()});
    rows.emplace(std::move(prefix), ProbVector(r.at("probs").get<std::vector<double>>()));
  }
  std::map<std::string, TabularModel::Rows> table;
  table.emplace(id, std::move(rows));
  return std::make_shared<const TabularModel>(std::move(vocab), j.at("max_len").get<std::size_t>(),
                                              std::move(table));
}

}  // namespace

std::string world_to_json(const World& world) {
  json instances = json::array();
  for (const Instance& inst : world.instances) {
    std::vector<std::string> answers;
    for (const auto& a : inst.space.answers()) answers.push_back(a.render());
    instances.push_back({{"id", inst.ref.id},
                         {"answers", answers},
                         {"p_true", inst.p_true.aligned(inst.space)},
                         {"model", model_to_json(*inst.model, inst.ref.id)}});
  }
  json doc{{"format_version", kFormatVersion},
           {"seed", world.seed},
           {"spec", world.spec ? spec_to_json(*world.spec) : json(nullptr)},
           {"instances", instances}};
  return doc.dump();
}

World world_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, std::string("world file: ") + e.what());
  }
  try {
    if (doc.at("format_version").get<std::string>() != kFormatVersion)
      throw Error(ErrorKind::parse, "unsupported world format version");
    World world;
    world.seed = doc.at("seed").get<std::uint64_t>();
    if (!doc.at("spec").is_null()) world.spec = spec_from_json(doc.at("spec"));
    for (const json& ji : doc.at("instances")) {
      const std::string id = ji.at("id").get<std::string>();
      std::vector<CanonicalAnswer> answers;
      for (const json& a : ji.at("answers")) answers.push_back(canonicalize_answer(a.get<std::string>()));
      AnswerSpace space(std::move(answers));
      AnswerDist p = AnswerDist::from_space(space, ji.at("p_true").get<std::vector<double>>());
      world.instances.push_back(
          Instance{InstanceRef{id}, std::move(space), std::move(p), model_from_json(ji.at("model"), id)});
    }
    world.validate();
    return world;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, std::string("world file: ") + e.what());
  }
}

void save_world(const World& world, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot open '" + path + "' for writing");
  out << world_to_json(world) << '\n';
  if (!out) throw Error(ErrorKind::io, "failed writing '" + path + "'");
}

World load_world(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open world file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return world_from_json(ss.str());
}

}  // namespace decodecal
