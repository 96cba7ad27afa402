#include "bnlab/harness/commands.hpp"

#include <string>

#include "bnlab/diagnostics.hpp"
#include "bnlab/error.hpp"
#include "bnlab/harness/experiment.hpp"
#include "bnlab/harness/reports.hpp"
#include "bnlab/rmt.hpp"

namespace bnlab::harness {

namespace fs = std::filesystem;

const std::vector<Command>& commands() {
    static const std::vector<Command> list{
        {"train", "train per config (optionally sweeping learning rates)", true, cmd_train},
        {"probe-loss", "relative loss after a gradient step of each size, at init", true, cmd_probe_loss},
        {"rmt-density", "tabulate the product-matrix singular value density", false, cmd_rmt_density},
        {"rmt-spectrum", "sample product spectra and their KS distance to the density", false, cmd_rmt_spectrum},
        {"rmt-condition", "condition numbers and largest singular values of products", false, cmd_rmt_condition},
        {"noise-bound", "SGD noise estimates against the alpha^2 C / b bound", false, cmd_noise_bound},
        {"init-moments", "per-layer channel moments at init", true, cmd_init_moments},
        {"coherence", "sign coherence of conv gradients at init", true, cmd_coherence},
        {"class-heatmap", "logit gradients per example and class at init", true, cmd_class_heatmap},
    };
    return list;
}

namespace {

struct InitState {
    SplitSet data;
    nn::Network net;
    LabeledImageSet batch;
};

InitState at_init(const ExperimentConfig& c) {
    c.validate();
    SplitSet data = prepare_data(c);
    SeededRng rng(c.seed, 0);
    nn::Network net = nn::build_network(c.network, rng);
    LabeledImageSet batch = data.train.head(c.batch_size);
    return {std::move(data), std::move(net), std::move(batch)};
}

}  // namespace

std::vector<fs::path> cmd_train(const ExperimentConfig& c, const fs::path& out) {
    return emit(run_experiment(c), out);
}

std::vector<fs::path> cmd_probe_loss(const ExperimentConfig& c, const fs::path& out) {
    InitState s = at_init(c);
    const auto alphas = c.probe_alphas.empty() ? diag::default_probe_alphas() : c.probe_alphas;
    CsvTable t = probe_table();
    add_probe(t, 0, diag::loss_step_probe(s.net, s.batch.images, s.batch.labels, alphas));
    ArtifactWriter w(out);
    w.csv("probe_loss.csv", t);
    return w.files();
}

std::vector<fs::path> cmd_init_moments(const ExperimentConfig& c, const fs::path& out) {
    InitState s = at_init(c);
    const diag::MomentProfile p = diag::depth_moment_profile(s.net, s.batch.images);
    CsvTable t = moments_table();
    add_moments(t, 0, p);
    CsvTable summary{{"layer", "is_conv", "mean_variance", "mean_abs_mean"}, {}};
    for (const auto& l : p.layers)
        summary.add({format_number(l.layer), l.is_conv ? "1" : "0", format_number(l.mean_variance()),
                     format_number(l.mean_abs_mean())});
    ArtifactWriter w(out);
    w.csv("moments.csv", t);
    w.csv("moment_summary.csv", summary);
    return w.files();
}

std::vector<fs::path> cmd_coherence(const ExperimentConfig& c, const fs::path& out) {
    InitState s = at_init(c);
    CsvTable t = coherence_table(), m = channel_matrix_table();
    add_coherence(t, 0, diag::sign_coherence(s.net, s.batch.images, s.batch.labels));
    for (const auto& tap : s.net.taps())
        if (tap.weight->is_conv()) add_channel_matrix(m, 0, tap.index, diag::channel_grad_matrix(tap.weight->weight_grad()));
    ArtifactWriter w(out);
    w.csv("coherence.csv", t);
    w.csv("channel_matrix.csv", m);
    return w.files();
}

std::vector<fs::path> cmd_class_heatmap(const ExperimentConfig& c, const fs::path& out) {
    InitState s = at_init(c);
    CsvTable t = heatmap_table(), summary = heatmap_summary_table();
    add_heatmap(t, summary, 0, diag::class_grad_heatmap(s.net, s.batch.images, s.batch.labels), s.batch.labels);
    ArtifactWriter w(out);
    w.csv("class_heatmap.csv", t);
    w.csv("class_heatmap_summary.csv", summary);
    return w.files();
}

std::vector<fs::path> cmd_rmt_density(const ExperimentConfig& c, const fs::path& out) {
    CsvTable t = density_table();
    for (unsigned m : c.rmt_m) {
        const double upper = rmt::support_upper(m);
        for (std::size_t j = 0; j < c.rmt_points; ++j) {
            const double x = upper * (static_cast<double>(j) + 0.5) / static_cast<double>(c.rmt_points);
            t.add({format_number(std::size_t{m}), format_number(x), format_number(rmt::density(m, x))});
        }
    }
    ArtifactWriter w(out);
    w.csv("density.csv", t);
    return w.files();
}

std::vector<fs::path> cmd_rmt_spectrum(const ExperimentConfig& c, const fs::path& out) {
    CsvTable t = spectrum_table(), ks = ks_table();
    for (unsigned m : c.rmt_m) {
        std::vector<double> sigmas = c.rmt_sigmas;
        if (!sigmas.empty() && sigmas.size() != m) sigmas.assign(m, sigmas.front());
        const auto s = rmt::sample_product_spectrum(m, c.rmt_n, sigmas, c.rmt_trials, c.seed, c.rmt_rescale);
        add_spectrum(t, s);
        bool unit = true;
        for (double v : sigmas) unit = unit && v == 1.0;
        if (c.rmt_rescale || unit) {
            const auto sorted = s.sorted();
            const double d = rmt::ks_distance(sorted, [m](double x) { return rmt::cdf(m, x); });
            ks.add({format_number(std::size_t{m}), format_number(c.rmt_n), format_number(c.rmt_trials),
                    format_number(d)});
        }
    }
    ArtifactWriter w(out);
    w.csv("spectrum.csv", t);
    w.csv("ks.csv", ks);
    return w.files();
}

std::vector<fs::path> cmd_rmt_condition(const ExperimentConfig& c, const fs::path& out) {
    std::vector<rmt::SpectrumSample> samples;
    for (unsigned m : c.rmt_m) {
        std::vector<double> sigmas = c.rmt_sigmas;
        if (!sigmas.empty() && sigmas.size() != m) sigmas.assign(m, sigmas.front());
        samples.push_back(rmt::sample_product_spectrum(m, c.rmt_n, sigmas, c.rmt_trials, c.seed, c.rmt_rescale));
    }
    CsvTable entries = condition_table(), summaries = condition_summary_table();
    add_condition(entries, summaries, rmt::condition_report(samples));
    ArtifactWriter w(out);
    w.csv("condition.csv", entries);
    w.csv("condition_summary.csv", summaries);
    return w.files();
}

noise::LeastSquaresModel toy_least_squares(std::size_t n, std::size_t dim, std::uint64_t seed) {
    SeededRng rng(seed, 0);
    Tensor x({n, dim});
    for (auto& v : x.storage()) v = rng.normal();
    std::vector<double> truth(dim), w(dim), y(n);
    for (auto& v : truth) v = rng.normal();
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < dim; ++j) s += x[i * dim + j] * truth[j];
        y[i] = s + 0.5 * rng.normal();
    }
    for (auto& v : w) v = rng.normal();
    return noise::LeastSquaresModel(std::move(x), std::move(y), std::move(w));
}

std::vector<fs::path> cmd_noise_bound(const ExperimentConfig& c, const fs::path& out) {
    std::optional<noise::GradientSet> grads;
    if (c.noise_model == "least_squares") {
        auto model = toy_least_squares(c.noise_examples, c.noise_dim, c.seed);
        grads = noise::per_example_gradients(model);
    } else {
        c.validate();
        SplitSet data = prepare_data(c);
        SeededRng rng(c.seed, 0);
        nn::Network net = nn::build_network(c.network, rng);
        const LabeledImageSet sample = data.train.head(c.noise_examples);
        noise::NetworkModel model(net, sample.images, sample.labels);
        grads = noise::per_example_gradients(model);
    }
    for (auto b : c.noise_batches)
        if (b > grads->size())
            throw ConfigError("noise.b value " + std::to_string(b) + " exceeds the " + std::to_string(grads->size()) +
                              " examples");
    CsvTable t = noise_table();
    for (const auto& mode_name : c.noise_modes) {
        const noise::Sampling mode = noise::parse_sampling(mode_name);
        for (auto b : c.noise_batches)
            for (double alpha : c.noise_alphas)
                add_noise(t, noise::estimate_noise(*grads, b, alpha, c.noise_trials, c.seed, mode));
    }
    ArtifactWriter w(out);
    w.csv("noise.csv", t);
    return w.files();
}

}  // namespace bnlab::harness
