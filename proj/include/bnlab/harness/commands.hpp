#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "bnlab/harness/config.hpp"
#include "bnlab/noise.hpp"

namespace bnlab::harness {

// Every command writes its files under out and returns their relative paths.
using CommandFn = std::vector<std::filesystem::path> (*)(const ExperimentConfig&, const std::filesystem::path&);

struct Command {
    std::string_view name;
    std::string_view help;
    bool needs_network;  // config must name a network and dataset
    CommandFn run;
};

const std::vector<Command>& commands();

std::vector<std::filesystem::path> cmd_train(const ExperimentConfig& c, const std::filesystem::path& out);
std::vector<std::filesystem::path> cmd_probe_loss(const ExperimentConfig& c, const std::filesystem::path& out);
std::vector<std::filesystem::path> cmd_init_moments(const ExperimentConfig& c, const std::filesystem::path& out);
std::vector<std::filesystem::path> cmd_coherence(const ExperimentConfig& c, const std::filesystem::path& out);
std::vector<std::filesystem::path> cmd_class_heatmap(const ExperimentConfig& c, const std::filesystem::path& out);
std::vector<std::filesystem::path> cmd_rmt_density(const ExperimentConfig& c, const std::filesystem::path& out);
std::vector<std::filesystem::path> cmd_rmt_spectrum(const ExperimentConfig& c, const std::filesystem::path& out);
std::vector<std::filesystem::path> cmd_rmt_condition(const ExperimentConfig& c, const std::filesystem::path& out);
std::vector<std::filesystem::path> cmd_noise_bound(const ExperimentConfig& c, const std::filesystem::path& out);

// y = Xᵀw* + 0.5 e with X, w*, e standard normal, evaluated at an independent
// standard normal w.
noise::LeastSquaresModel toy_least_squares(std::size_t n, std::size_t dim, std::uint64_t seed);

}  // namespace bnlab::harness
