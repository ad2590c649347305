#pragma once

#include "decodecal/harness/config.hpp"
#include "decodecal/harness/report.hpp"

namespace decodecal::harness {

/**
 * Every (grid entry, temperature, seed) task is evaluated on a pool of
 * cfg.workers threads and reduced in grid order, so the report does not
 * depend on the worker count. Exact mode is seed-independent and computes
 * each strategy once.
 */
ReportSet run_sweep(const SweepConfig& cfg);
ReportSet run_sweep(const SweepConfig& cfg, const World& world);

}  // namespace decodecal::harness
