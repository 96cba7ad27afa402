#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bnlab/diagnostics.hpp"
#include "bnlab/harness/config.hpp"
#include "bnlab/harness/csv.hpp"
#include "bnlab/harness/datasets.hpp"

namespace bnlab::harness {

struct MetricRow {
    std::size_t step = 0;
    double epoch = 0.0;
    double lr = 0.0;
    double loss = 0.0;  // training batch loss before the update
    double train_acc = 0.0;
    std::optional<double> test_acc;
};

struct LegResult {
    double lr = 0.0;
    std::uint64_t seed = 0;
    std::string name;
    std::size_t steps_planned = 0;
    std::size_t steps_run = 0;
    std::vector<MetricRow> metrics;
    std::map<std::string, CsvTable> reports;  // file name -> table
    std::optional<diag::DivergenceEvent> divergence;
    std::optional<double> final_test_acc;

    bool diverged() const noexcept { return divergence.has_value(); }
};

struct RunArtifact {
    ExperimentConfig config;
    std::vector<LegResult> legs;
    std::optional<std::size_t> best_leg;
    double wall_seconds = 0.0;
};

// Loads or synthesizes the data, applies the limits and the channel
// normalization fitted on the training split.
SplitSet prepare_data(const ExperimentConfig& config);

// Seed of the sweep leg for lr; depends only on the run seed and lr.
std::uint64_t leg_seed(std::uint64_t seed, double lr);
std::string leg_name(double lr);

// One training run at a fixed base learning rate. Instruments run once before
// the first update and then after every update whose step count they divide.
LegResult run_leg(const ExperimentConfig& config, const SplitSet& data, double lr);

// Highest final test accuracy among legs that did not diverge.
std::optional<std::size_t> select_best_leg(const std::vector<LegResult>& legs, TieBreak tie_break);

RunArtifact run_experiment(const ExperimentConfig& config);

double evaluate_accuracy(nn::Network& net, const LabeledImageSet& set, std::size_t batch_size);

CsvTable metrics_table(const std::vector<MetricRow>& rows);
nlohmann::ordered_json config_json(const ExperimentConfig& config);

// metrics.csv, one csv per report, divergence tables and summary.json. A
// single-rate run writes into dir; a sweep writes one subdirectory per leg
// plus a top-level summary.json. Returns the written paths relative to dir.
std::vector<std::filesystem::path> emit(const RunArtifact& artifact, const std::filesystem::path& dir);

}  // namespace bnlab::harness
