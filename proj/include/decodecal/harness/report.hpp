#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "decodecal/calibration.hpp"

namespace decodecal::harness {

struct ReportRow {
  // Strategy encoding without temperature.
  std::string strategy;
  double tau = 1.0;
  std::string metric;
  double mean = 0.0;
  // Sample standard deviation over seeds; exactly 0 when all seeds agree.
  double std = 0.0;
  std::size_t n_seeds = 0;

  bool operator==(const ReportRow&) const = default;
};

struct Provenance {
  std::string config_hash;
  std::string tool_version;

  bool operator==(const Provenance&) const = default;
};

struct ReportSet {
  std::vector<ReportRow> rows;
  Provenance provenance;

  // Sorts rows by (strategy, tau, metric).
  void sort();
  bool operator==(const ReportSet&) const = default;
};

inline constexpr const char* kCsvHeader = "strategy,tau,metric,mean,std,n_seeds";

std::string report_to_csv(const ReportSet& rs);
std::string report_to_json(const ReportSet& rs);
ReportSet report_from_json(std::string_view text);

// Writes report.csv and report.json into `dir`, creating it if needed.
void emit_report(const ReportSet& rs, const std::string& dir);

std::string rank_curves_to_csv(const std::vector<RankCurvePoint>& points);
// Exact top_k curves for k = 1..k_max, written as CSV `k,G1,ECE`. Requires
// 2 <= k_max <= largest answer space.
std::vector<RankCurvePoint> emit_rank_curves(const World& world, std::size_t k_max,
                                             const std::string& path);

// Writes through a temporary file so a failure leaves no partial output.
void write_file_atomic(const std::string& path, std::string_view content);

}  // namespace decodecal::harness
