#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bnlab/harness/datasets.hpp"
#include "bnlab/nn/network.hpp"

namespace bnlab::harness {

enum class DatasetKind { synthetic, cifar10 };

struct DatasetConfig {
    DatasetKind kind = DatasetKind::synthetic;
    std::filesystem::path path;  // cifar10 directory
    SynthSpec synth;
    bool seed_pinned = false;  // synth.seed set explicitly rather than following the run seed
    std::size_t train_limit = 0;  // 0 keeps everything
    std::size_t test_limit = 0;
    bool augment = false;
    bool preprocess = true;
};

struct Instrument {
    std::string name;
    std::size_t every = 0;  // steps between runs; also runs once at init
};

// Instrument names accepted under the diagnostics section.
const std::vector<std::string_view>& instrument_names();

enum class TieBreak { larger_lr, smaller_lr };

struct ExperimentConfig {
    nn::NetworkConfig network;
    DatasetConfig dataset;
    std::uint64_t seed = 0;

    std::size_t batch_size = 128;
    double base_lr = 0.1;
    std::vector<double> lr_sweep;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::size_t epochs = 1;
    std::size_t steps = 0;       // overrides epochs when set
    std::size_t eval_every = 0;  // 0: once per epoch
    TieBreak tie_break = TieBreak::larger_lr;

    bool capture_divergence = true;
    bool stop_on_divergence = true;
    double divergence_threshold = 1e3;
    std::vector<double> divergence_fractions{0.0, 0.25, 0.5, 0.75, 1.0};

    std::vector<Instrument> diagnostics;

    // Standalone commands.
    std::vector<double> probe_alphas;  // empty: default grid
    std::vector<unsigned> rmt_m{1, 2, 3};
    std::size_t rmt_n = 200;
    std::size_t rmt_trials = 5;
    std::vector<double> rmt_sigmas;
    bool rmt_rescale = true;
    std::size_t rmt_points = 200;
    std::string noise_model = "least_squares";
    std::size_t noise_examples = 100;
    std::size_t noise_dim = 10;
    std::vector<std::size_t> noise_batches{1, 5, 25};
    std::vector<double> noise_alphas{0.1, 1.0};
    std::size_t noise_trials = 10000;
    std::vector<std::string> noise_modes{"with_replacement", "without_replacement"};

    std::filesystem::path output_dir = "out";

    // key = value pairs as read, in file order.
    std::vector<std::pair<std::string, std::string>> entries;

    std::vector<double> learning_rates() const;
    // Run seed; the synthetic data follows it unless dataset.seed was given.
    void set_seed(std::uint64_t value);
    void validate() const;
};

// Line-oriented "key = value"; '#' starts a comment; keys are dotted
// (network.depth, train.batch_size, ...). Unknown keys, malformed values and
// duplicates raise ParseError with the line and key. With require_experiment,
// network.depth and dataset must be present.
ExperimentConfig parse_config(std::string_view text, bool require_experiment = true);
ExperimentConfig load_config(const std::filesystem::path& path, bool require_experiment = true);

// Every accepted key.
std::vector<std::string> config_keys();

}  // namespace bnlab::harness
