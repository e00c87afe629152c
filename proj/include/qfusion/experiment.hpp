#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qfusion/stats.hpp"
#include "qfusion/train.hpp"

namespace qfusion::experiment {

/// Full protocol: train both model kinds across the seed set, pair the
/// outcomes by seed, and run the statistical comparison.
struct ExperimentConfig {
    train::RunConfig base;             // model/seed/out_dir fields overridden per run
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::size_t jobs = 1;              // fits run in parallel worker threads
    std::string out_dir = "experiment";
};

struct ExperimentResult {
    stats::ComparisonReport report;  // a = hybrid, b = classical
    std::string report_path;
    std::string summary_path;
};

/// Runs every (model, seed) fit into <out>/<model>/seed-<n>/, then writes
/// <out>/report.json and the metric-table <out>/summary.csv.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const data::Dataset& dataset);

/// Two-row metric table (one per model) with per-run means.
std::string summary_csv(const stats::ComparisonReport& report);

}  // namespace qfusion::experiment
