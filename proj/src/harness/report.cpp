#include "decodecal/harness/report.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "decodecal/harness/config.hpp"

namespace decodecal::harness {

using nlohmann::json;

void ReportSet::sort() {
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::tie(a.strategy, a.tau, a.metric) < std::tie(b.strategy, b.tau, b.metric);
  });
}

namespace {

// Strategy encodings contain no commas or quotes; quote defensively anyway.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string report_to_csv(const ReportSet& rs) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const ReportRow& r : rs.rows) {
    out += csv_field(r.strategy) + "," + format_double(r.tau) + "," + r.metric + "," +
           format_double(r.mean) + "," + format_double(r.std) + "," + std::to_string(r.n_seeds) + "\n";
  }
  return out;
}

std::string report_to_json(const ReportSet& rs) {
  json rows = json::array();
  for (const ReportRow& r : rs.rows)
    rows.push_back({{"strategy", r.strategy},
                    {"tau", r.tau},
                    {"metric", r.metric},
                    {"mean", r.mean},
                    {"std", r.std},
                    {"n_seeds", r.n_seeds}});
  json doc{{"rows", rows},
           {"provenance",
            {{"config_hash", rs.provenance.config_hash}, {"tool_version", rs.provenance.tool_version}}}};
  return doc.dump(2) + "\n";
}

ReportSet report_from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    ReportSet rs;
    for (const json& r : doc.at("rows"))
      rs.rows.push_back({r.at("strategy").get<std::string>(), r.at("tau").get<double>(),
                         r.at("metric").get<std::string>(), r.at("mean").get<double>(),
                         r.at("std").get<double>(), r.at("n_seeds").get<std::size_t>()});
    const json& p = doc.at("provenance");
    rs.provenance = {p.at("config_hash").get<std::string>(), p.at("tool_version").get<std::string>()};
    return rs;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, std::string("report: ") + e.what());
  }
}

void write_file_atomic(const std::string& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error(ErrorKind::io, "failed writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorKind::io, "cannot move output into '" + path + "'");
  }
}

void emit_report(const ReportSet& rs, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create output directory '" + dir + "': " + ec.message());
  const std::filesystem::path d(dir);
  write_file_atomic((d / "report.csv").string(), report_to_csv(rs));
  write_file_atomic((d / "report.json").string(), report_to_json(rs));
}

std::string rank_curves_to_csv(const std::vector<RankCurvePoint>& points) {
  std::string out = "k,G1,ECE\n";
  for (const auto& p : points)
    out += std::to_string(p.k) + "," + format_double(p.G1) + "," + format_double(p.ECE) + "\n";
  return out;
}

std::vector<RankCurvePoint> emit_rank_curves(const World& world, std::size_t k_max,
                                             const std::string& path) {
  const std::size_t a_max = max_answer_space(world);
  if (k_max < 2 || k_max > a_max)
    throw Error(ErrorKind::invalid_parameter,
                "k_max must lie in [2, " + std::to_string(a_max) + "]");
  const PreparedWorld prepared(world);
  if (!prepared.enumerable())
    throw Error(ErrorKind::enumeration_too_large, "rank curves need an enumerable world");
  auto points = rank_curve(prepared, k_max);
  write_file_atomic(path, rank_curves_to_csv(points));
  return points;
}

}  // namespace decodecal::harness
