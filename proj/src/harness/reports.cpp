#include "bnlab/harness/reports.hpp"

#include <string>

namespace bnlab::harness {

namespace {

std::string num(double v) { return format_number(v); }
std::string num(std::size_t v) { return format_number(v); }
std::string flag(bool v) { return v ? "1" : "0"; }
std::string opt(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

}  // namespace

CsvTable moments_table() { return {{"step", "layer", "is_conv", "channel", "mean", "var"}, {}}; }
CsvTable coherence_table() {
    return {{"step", "layer", "a", "b_abs", "partial_b", "partial_xy", "ratio", "saturated"}, {}};
}
CsvTable histogram_table() {
    return {{"step", "layer", "count", "mean", "std", "excess_kurtosis", "tail_ratio", "max_abs"}, {}};
}
CsvTable heatmap_table() { return {{"step", "row", "label", "class", "grad"}, {}}; }
CsvTable heatmap_summary_table() { return {{"step", "modal_column", "dominant_fraction"}, {}}; }
CsvTable channel_grads_table() { return {{"step", "layer", "channel", "value"}, {}}; }
CsvTable channel_matrix_table() { return {{"step", "layer", "in_channel", "out_channel", "value"}, {}}; }
CsvTable mean_vs_grad_table() {
    return {{"step", "layer", "in_channel", "out_channel", "activation_mean", "mean_abs_grad"}, {}};
}
CsvTable probe_table() { return {{"step", "alpha", "relative_loss", "non_finite"}, {}}; }
CsvTable classwise_table() { return {{"step", "class", "param", "norm"}, {}}; }
CsvTable divergence_moments_table() { return {{"fraction", "loss", "layer", "is_conv", "channel", "mean", "var"}, {}}; }
CsvTable divergence_summary_table() {
    return {{"fraction", "loss", "layer", "mean_variance", "mean_abs_mean"}, {}};
}
CsvTable noise_table() {
    return {{"alpha", "b", "C", "empirical", "std_err", "closed_form", "bound", "mode", "exact"}, {}};
}
CsvTable density_table() { return {{"M", "x", "rho"}, {}}; }
CsvTable spectrum_table() { return {{"M", "trial", "eigenvalue"}, {}}; }
CsvTable ks_table() { return {{"M", "n", "trials", "ks"}, {}}; }
CsvTable condition_table() { return {{"M", "trial", "kappa", "sigma_max", "saturated"}, {}}; }
CsvTable condition_summary_table() {
    return {{"M", "used", "saturated", "kappa_mean", "kappa_std", "kappa_median", "sigma_max_mean", "sigma_max_std",
             "sigma_max_median"},
            {}};
}

void add_moments(CsvTable& t, std::size_t step, const diag::MomentProfile& p) {
    for (const auto& l : p.layers)
        for (std::size_t c = 0; c < l.moments.mean.size(); ++c)
            t.add({num(step), num(l.layer), flag(l.is_conv), num(c), num(l.moments.mean[c]), num(l.moments.var[c])});
}

void add_coherence(CsvTable& t, std::size_t step, std::span<const diag::CoherenceRow> rows) {
    for (const auto& r : rows)
        t.add({num(step), num(r.layer), num(r.a), num(r.b_abs), num(r.partial_b), num(r.partial_xy), num(r.ratio),
               flag(r.saturated)});
}

void add_histogram(CsvTable& t, std::size_t step, std::size_t layer, const diag::HistogramStats& s) {
    t.add({num(step), num(layer), num(s.count), num(s.mean), num(s.std), opt(s.excess_kurtosis), opt(s.tail_ratio),
           num(s.max_abs)});
}

void add_heatmap(CsvTable& t, CsvTable& summary, std::size_t step, const diag::ClassGradHeatmap& h,
                 std::span<const int> labels) {
    const std::size_t b = h.grads.dim(0), k = h.grads.dim(1);
    for (std::size_t r = 0; r < b; ++r)
        for (std::size_t j = 0; j < k; ++j)
            t.add({num(step), num(r), std::to_string(labels[r]), num(j), num(h.grads[r * k + j])});
    summary.add({num(step), num(h.modal_column), num(h.dominant_fraction)});
}

void add_channel_grads(CsvTable& t, std::size_t step, std::span<const diag::ChannelGradient> grads) {
    for (const auto& g : grads) t.add({num(step), num(g.layer), num(g.channel), num(g.value)});
}

void add_channel_matrix(CsvTable& t, std::size_t step, std::size_t layer, const Tensor& matrix) {
    const std::size_t ci = matrix.dim(0), co = matrix.dim(1);
    for (std::size_t i = 0; i < ci; ++i)
        for (std::size_t o = 0; o < co; ++o) t.add({num(step), num(layer), num(i), num(o), num(matrix[i * co + o])});
}

void add_mean_vs_grad(CsvTable& t, std::size_t step, std::span<const diag::MeanGradPair> pairs) {
    for (const auto& p : pairs)
        t.add({num(step), num(p.layer), num(p.in_channel), num(p.out_channel), num(p.activation_mean),
               num(p.mean_abs_grad)});
}

void add_probe(CsvTable& t, std::size_t step, const diag::LossProbeCurve& c) {
    for (std::size_t i = 0; i < c.alphas.size(); ++i)
        t.add({num(step), num(c.alphas[i]), num(c.relative_losses[i]), flag(c.non_finite[i])});
}

void add_classwise(CsvTable& t, std::size_t step, std::span<const diag::ClasswiseNorms> norms) {
    for (const auto& n : norms)
        for (std::size_t i = 0; i < n.names.size(); ++i) t.add({num(step), num(n.cls), n.names[i], num(n.norms[i])});
}

void add_divergence(CsvTable& moments, CsvTable& summary, const diag::DivergenceEvent& e) {
    for (const auto& s : e.snapshots)
        for (const auto& l : s.profile.layers) {
            for (std::size_t c = 0; c < l.moments.mean.size(); ++c)
                moments.add({num(s.fraction), num(s.loss), num(l.layer), flag(l.is_conv), num(c),
                             num(l.moments.mean[c]), num(l.moments.var[c])});
            summary.add({num(s.fraction), num(s.loss), num(l.layer), num(l.mean_variance()), num(l.mean_abs_mean())});
        }
}

void add_noise(CsvTable& t, const noise::NoiseEstimate& e) {
    t.add({num(e.alpha), num(e.b), num(e.c), num(e.empirical), num(e.std_err), num(e.closed_form), num(e.bound),
           std::string(noise::to_string(e.mode)), num(e.exact)});
}

void add_spectrum(CsvTable& t, const rmt::SpectrumSample& s) {
    for (std::size_t tr = 0; tr < s.trials; ++tr)
        for (double v : s.trial(tr)) t.add({num(std::size_t{s.m}), num(tr), num(v)});
}

void add_condition(CsvTable& entries, CsvTable& summaries, const rmt::ConditionReport& r) {
    for (const auto& e : r.entries)
        entries.add({num(std::size_t{e.m}), num(e.trial), num(e.kappa), num(e.sigma_max), flag(e.saturated)});
    for (const auto& s : r.summaries)
        summaries.add({num(std::size_t{s.m}), num(s.used), num(s.saturated), num(s.kappa_mean), num(s.kappa_std),
                       num(s.kappa_median), num(s.sigma_max_mean), num(s.sigma_max_std), num(s.sigma_max_median)});
}

}  // namespace bnlab::harness
