#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bnlab/diagnostics.hpp"
#include "bnlab/harness/csv.hpp"
#include "bnlab/noise.hpp"
#include "bnlab/rmt.hpp"

namespace bnlab::harness {

// Empty tables with the header of each report file.
CsvTable moments_table();
CsvTable coherence_table();
CsvTable histogram_table();
CsvTable heatmap_table();
CsvTable heatmap_summary_table();
CsvTable channel_grads_table();
CsvTable channel_matrix_table();
CsvTable mean_vs_grad_table();
CsvTable probe_table();
CsvTable classwise_table();
CsvTable divergence_moments_table();
CsvTable divergence_summary_table();
CsvTable noise_table();
CsvTable density_table();
CsvTable spectrum_table();
CsvTable ks_table();
CsvTable condition_table();
CsvTable condition_summary_table();

void add_moments(CsvTable& t, std::size_t step, const diag::MomentProfile& p);
void add_coherence(CsvTable& t, std::size_t step, std::span<const diag::CoherenceRow> rows);
void add_histogram(CsvTable& t, std::size_t step, std::size_t layer, const diag::HistogramStats& s);
void add_heatmap(CsvTable& t, CsvTable& summary, std::size_t step, const diag::ClassGradHeatmap& h,
                 std::span<const int> labels);
void add_channel_grads(CsvTable& t, std::size_t step, std::span<const diag::ChannelGradient> grads);
void add_channel_matrix(CsvTable& t, std::size_t step, std::size_t layer, const Tensor& matrix);
void add_mean_vs_grad(CsvTable& t, std::size_t step, std::span<const diag::MeanGradPair> pairs);
void add_probe(CsvTable& t, std::size_t step, const diag::LossProbeCurve& c);
void add_classwise(CsvTable& t, std::size_t step, std::span<const diag::ClasswiseNorms> norms);
// One row per (fraction, layer, channel), and one per (fraction, layer).
void add_divergence(CsvTable& moments, CsvTable& summary, const diag::DivergenceEvent& e);
void add_noise(CsvTable& t, const noise::NoiseEstimate& e);
void add_spectrum(CsvTable& t, const rmt::SpectrumSample& s);
void add_condition(CsvTable& entries, CsvTable& summaries, const rmt::ConditionReport& r);

}  // namespace bnlab::harness
