#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bnlab/diagnostics.hpp"
#include "bnlab/error.hpp"
#include "bnlab/harness/commands.hpp"
#include "bnlab/harness/config.hpp"
#include "bnlab/harness/csv.hpp"
#include "bnlab/harness/datasets.hpp"
#include "bnlab/harness/experiment.hpp"
#include "bnlab/nn/batchnorm.hpp"
#include "bnlab/nn/generalized_norm.hpp"
#include "bnlab/nn/loss.hpp"
#include "bnlab/nn/network.hpp"
#include "bnlab/noise.hpp"
#include "bnlab/rmt.hpp"
#include "support/testing.hpp"

using namespace bnlab;
using bnlab::testing::bit_equal;
using bnlab::testing::check_gradients;
using bnlab::testing::check_layer;
using bnlab::testing::random_tensor;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

class Notes {
public:
    template <class... Args>
    void add(const char* fmt, Args... args) {
        char buf[512];
        std::snprintf(buf, sizeof buf, fmt, args...);
        if (!text_.empty()) text_ += "; ";
        text_ += buf;
    }
    const std::string& str() const { return text_; }

private:
    std::string text_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path work_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "bnlab_acceptance" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size() / 2;
    return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

// ---- 1 ----------------------------------------------------------------------

Outcome gradient_correctness() {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    std::size_t layers = 0, entries = 0;
    double worst = 0.0;
    auto take = [&](const char* what, const testing::GradCheck& g) {
        ++layers;
        entries += g.checked;
        worst = std::max(worst, g.worst);
        if (!g.ok()) {
            out.pass = false;
            out.detail += std::string(what) + " failed (" + g.first_failure + "); ";
        }
    };

    nn::DenseLayer dense(random_tensor({4, 6}, 1), random_tensor({4}, 2));
    take("dense", check_layer(dense, random_tensor({3, 6}, 3), nn::Mode::probe, 1e-6, 4));
    nn::Conv3x3Layer conv(random_tensor({3, 2, 3, 3}, 5));
    take("conv", check_layer(conv, random_tensor({2, 2, 4, 5}, 6), nn::Mode::probe, 1e-6, 7));

    for (int mask = 0; mask < 16; ++mask) {
        nn::BatchNormOptions opt;
        opt.toggles = {(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0, (mask & 8) != 0};
        for (bool spatial : {true, false}) {
            nn::NormLayer bn(3, nn::Grouping::batch(), opt);
            bn.state().gamma = random_tensor({3}, 10 + mask, 1);
            bn.state().beta = random_tensor({3}, 10 + mask, 2);
            const Tensor x = spatial ? random_tensor({2, 3, 2, 3}, 30 + mask) : random_tensor({5, 3}, 50 + mask);
            take("batch norm", check_layer(bn, x, nn::Mode::probe, 1e-6, 70 + mask));
        }
    }
    for (nn::Grouping g : {nn::Grouping::layer(), nn::Grouping::instance(), nn::Grouping::group(2)}) {
        nn::NormLayer n(4, g, {});
        n.state().gamma = random_tensor({4}, 90, 1);
        n.state().beta = random_tensor({4}, 90, 2);
        take("generalized norm", check_layer(n, random_tensor({3, 4, 2, 3}, 91), nn::Mode::probe, 1e-6, 92));
    }

    Tensor z = random_tensor({4, 5}, 93, 0, 2.0);
    const std::vector<int> labels{0, 4, 2, 2};
    const Tensor gz = nn::softmax_xent(z, labels).grad_logits;
    take("softmax cross-entropy",
         check_gradients([&] { return nn::softmax_xent(z, labels).loss; }, {&z}, {gz}, 1e-6));

    for (auto placement : {nn::NormPlacement::none, nn::NormPlacement::per_layer, nn::NormPlacement::final_only}) {
        nn::NetworkConfig cfg;
        cfg.depth = 6;
        cfg.width = 4;
        cfg.class_count = 3;
        cfg.input_shape = {2, 4, 4};
        cfg.normalization = placement;
        SeededRng rng(3);
        nn::Network net = nn::build_network(cfg, rng);
        const Tensor x = random_tensor({4, 2, 4, 4}, 94);
        const std::vector<int> y{0, 2, 1, 2};
        net.compute_gradients(x, y, nn::Mode::probe);
        std::vector<Tensor*> vars;
        std::vector<Tensor> grads;
        for (auto& p : net.params()) {
            vars.push_back(p.value);
            grads.push_back(*p.grad);
        }
        take("depth-6 network", check_gradients([&] { return net.loss(x, y, nn::Mode::probe); }, vars, grads, 1e-4));
    }

    const double t = seconds_since(t0);
    if (t >= 60.0) out.pass = false;
    Notes n;
    n.add("%zu checks, %zu entries, worst rel %.2e, %.1f s", layers, entries, worst, t);
    out.detail += n.str();
    return out;
}

// ---- 2 ----------------------------------------------------------------------

Outcome bn_postcondition() {
    Outcome out;
    double worst_mean = 0.0, worst_var = 0.0;
    std::size_t channels = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        SeededRng rng(seed, 5);
        std::size_t b, h, w;
        do {
            b = 2 + rng.uniform_index(7);
            h = 1 + rng.uniform_index(4);
            w = 1 + rng.uniform_index(4);
        } while (b * h * w < 8);
        const std::size_t c = 1 + rng.uniform_index(4);
        const double scale = std::exp(3.0 * rng.normal()), shift = 10.0 * rng.normal();
        Tensor x({b, c, h, w});
        for (auto& v : x.storage()) v = shift + scale * rng.normal();
        nn::BatchNormOptions opt;
        opt.toggles.use_gamma = opt.toggles.use_beta = false;
        nn::BatchNormLayer layer(c, opt);
        const Tensor y = nn::bn_forward_train(x, layer).output;
        const nn::ChannelStats in = nn::channel_statistics(x), o = nn::channel_statistics(y);
        for (std::size_t k = 0; k < c; ++k) {
            if (!(in.var[k] > 1e-3)) continue;
            ++channels;
            worst_mean = std::max(worst_mean, std::fabs(o.mean[k]));
            worst_var = std::max(worst_var, std::fabs(o.var[k] - in.var[k] / (in.var[k] + opt.eps)));
        }
    }
    out.pass = channels > 0 && worst_mean < 1e-8 && worst_var < 1e-6;
    Notes n;
    n.add("%zu channels, max |mean| %.2e, max variance error %.2e", channels, worst_mean, worst_var);
    out.detail = n.str();
    return out;
}

// ---- 3 ----------------------------------------------------------------------

// Mass of rho_M over (0, U) with x = U t^{M+1} (removes the origin
// singularity) and t = 1 - (1 - s)^2 (removes the square-root edge), then
// composite Gauss-Legendre on s.
double total_mass(unsigned m) {
    static const double node[5] = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                    0.9061798459386640};
    static const double weight[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                     0.2369268850561891, 0.2369268850561891};
    const double u = rmt::support_upper(m);
    const std::size_t panels = 400;
    double total = 0.0;
    for (std::size_t p = 0; p < panels; ++p) {
        const double a = static_cast<double>(p) / panels, b = static_cast<double>(p + 1) / panels;
        for (int k = 0; k < 5; ++k) {
            const double s = 0.5 * (a + b) + 0.5 * (b - a) * node[k];
            const double t = 1.0 - (1.0 - s) * (1.0 - s);
            const double x = u * std::pow(t, m + 1.0);
            if (!(x > 0.0 && x < u)) continue;
            const double jac = u * (m + 1.0) * std::pow(t, static_cast<double>(m)) * 2.0 * (1.0 - s);
            total += 0.5 * (b - a) * weight[k] * rmt::density(m, x) * jac;
        }
    }
    return total;
}

Outcome density_reduction() {
    Outcome out;
    double worst_rel = 0.0;
    for (int j = 0; j < 1000; ++j) {
        const double x = 4.0 * (j + 0.5) / 1000.0;
        const double a = rmt::density(1, x), b = rmt::mp_density(x);
        worst_rel = std::max(worst_rel, std::fabs(a - b) / std::fabs(b));
    }
    Notes n;
    n.add("MP grid worst rel %.2e", worst_rel);
    if (!(worst_rel <= 1e-10)) out.pass = false;
    for (unsigned m = 1; m <= 5; ++m) {
        const double mass = total_mass(m);
        n.add("mass M=%u 1%+.1e", m, mass - 1.0);
        if (!(std::fabs(mass - 1.0) <= 1e-6)) out.pass = false;
    }
    const bool edges = rmt::support_upper(1) == 4.0 && rmt::support_upper(2) == 27.0 / 4.0;
    bool domain = true;
    for (unsigned m : {1u, 2u}) {
        const double u = rmt::support_upper(m);
        domain = domain && rmt::density(m, u * (1.0 - 1e-9)) > 0.0;
        for (double x : {0.0, u, u * 1.01}) {
            try {
                rmt::density(m, x);
                domain = false;
            } catch (const DomainError&) {
            }
        }
    }
    n.add("edges 4 and 27/4 %s", edges && domain ? "ok" : "wrong");
    out.pass = out.pass && edges && domain;
    out.detail = n.str();
    return out;
}

// ---- 4 ----------------------------------------------------------------------

Outcome spectrum_match() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto s1 = rmt::sample_product_spectrum(1, 512, {}, 10, 11);
    const double d1 = rmt::ks_distance(s1.sorted(), rmt::mp_cdf);
    const auto s3 = rmt::sample_product_spectrum(3, 512, {}, 10, 13);
    const double d3 = rmt::ks_distance(s3.sorted(), [](double x) { return rmt::cdf(3, x); });
    const double t = seconds_since(t0);
    Outcome out;
    out.pass = d1 < 0.02 && d3 < 0.03 && t < 300.0;
    Notes n;
    n.add("KS M=1 %.5f, KS M=3 %.5f, %.1f s", d1, d3, t);
    out.detail = n.str();
    return out;
}

// ---- 5 ----------------------------------------------------------------------

Outcome condition_growth() {
    std::vector<rmt::SpectrumSample> samples;
    for (unsigned m : {1u, 2u, 4u, 8u}) samples.push_back(rmt::sample_product_spectrum(m, 200, {}, 5, 17));
    const auto report = rmt::condition_report(samples);
    Outcome out;
    Notes n;
    for (std::size_t i = 0; i < report.summaries.size(); ++i) {
        const auto& s = report.summaries[i];
        n.add("M=%u kappa %.3g sigma_max %.3g", s.m, s.kappa_median, s.sigma_max_median);
        if (s.used == 0) out.pass = false;
        if (i > 0) {
            const auto& p = report.summaries[i - 1];
            if (!(s.kappa_median > p.kappa_median) || !(s.sigma_max_median > p.sigma_max_median)) out.pass = false;
        }
    }
    out.detail = n.str();
    return out;
}

// ---- 6 ----------------------------------------------------------------------

Outcome sgd_noise() {
    Outcome out;
    Notes n;
    const noise::GradientSet toy({{1.0}, {2.0}, {3.0}, {6.0}});
    double total = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            const double d = toy.mean()[0] - 0.5 * (toy.gradient(i)[0] + toy.gradient(j)[0]);
            total += d * d;
        }
    const double enumerated = total / 16.0;
    const double c_over_b = noise::noise_constant(toy) / 2.0;
    const double closed = noise::closed_form_noise(toy, 2, 1.0);
    const auto mc = noise::empirical_sgd_noise(toy, 2, 1.0, 100000, 21);
    const bool toy_ok = enumerated == 1.75 && c_over_b == 1.75 &&
                        noise::exact_noise(toy, 2, 1.0, noise::Sampling::with_replacement) == 1.75 &&
                        closed == 0.875 && std::fabs(mc.mean - 1.75) < 4.0 * mc.std_err;
    n.add("enumeration %.17g, C/b %.17g, closed form %.17g, MC %.5f +- %.5f", enumerated, c_over_b, closed, mc.mean,
          mc.std_err);
    out.pass = toy_ok;

    auto model = harness::toy_least_squares(100, 10, 23);
    const noise::GradientSet g = noise::per_example_gradients(model);
    std::size_t bound_checks = 0;
    double worst_ratio_err = 0.0, worst_margin = -INFINITY;
    for (auto mode : {noise::Sampling::with_replacement, noise::Sampling::without_replacement})
        for (std::size_t b : {1, 5, 25}) {
            noise::NoiseEstimate e[2];
            int k = 0;
            for (double alpha : {0.1, 1.0}) {
                e[k] = noise::estimate_noise(g, b, alpha, 20000, 29, mode);
                ++bound_checks;
                worst_margin = std::max(worst_margin, (e[k].empirical - e[k].bound) / e[k].std_err);
                if (!(e[k].empirical <= e[k].bound + 4.0 * e[k].std_err) || !(e[k].exact <= e[k].bound * (1 + 1e-12)) ||
                    !(e[k].closed_form <= e[k].bound))
                    out.pass = false;
                ++k;
            }
            const double ratio = e[1].empirical / e[0].empirical;
            worst_ratio_err = std::max(worst_ratio_err, std::fabs(ratio / 100.0 - 1.0));
            if (!(std::fabs(ratio / 100.0 - 1.0) <= 0.01)) out.pass = false;
        }
    n.add("%zu bound checks, worst (MC - bound)/se %.2f, worst alpha-ratio error %.1e", bound_checks, worst_margin,
          worst_ratio_err);
    out.detail = n.str();
    return out;
}

// ---- 7 ----------------------------------------------------------------------

harness::ExperimentConfig divergence_config(nn::NormPlacement norm, std::uint64_t seed) {
    auto c = harness::parse_config(
        "network.depth = 20\n"
        "network.width = 8\n"
        "dataset = synthetic\n"
        "dataset.per_class = 64\n"
        "dataset.test_per_class = 0\n"
        "train.batch_size = 32\n"
        "train.lr = 0.1\n"
        "train.steps = 200\n");
    c.network.normalization = norm;
    c.set_seed(seed);
    return c;
}

Outcome divergence_reproduction() {
    const auto t0 = std::chrono::steady_clock::now();
    int diverged = 0, completed = 0;
    Notes n;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto plain = divergence_config(nn::NormPlacement::none, seed);
        const auto leg = harness::run_leg(plain, harness::prepare_data(plain), plain.base_lr);
        if (leg.diverged() && leg.divergence->step <= 200) {
            ++diverged;
            n.add("seed %llu none: diverged at step %zu", static_cast<unsigned long long>(seed), leg.divergence->step);
        } else {
            n.add("seed %llu none: no divergence", static_cast<unsigned long long>(seed));
        }

        const auto bn = divergence_config(nn::NormPlacement::per_layer, seed);
        const auto bl = harness::run_leg(bn, harness::prepare_data(bn), bn.base_lr);
        double max_loss = 0.0;
        for (const auto& r : bl.metrics) max_loss = std::max(max_loss, std::isfinite(r.loss) ? r.loss : INFINITY);
        const bool ok = !bl.diverged() && bl.steps_run == 200 && max_loss < 1e3;
        completed += ok;
        n.add("seed %llu bn: %zu steps, final loss %.3g", static_cast<unsigned long long>(seed), bl.steps_run,
              bl.metrics.empty() ? NAN : bl.metrics.back().loss);
    }
    const double t = seconds_since(t0);
    Outcome out;
    out.pass = diverged >= 4 && completed >= 4 && t < 600.0;
    Notes head;
    head.add("unnormalized diverged %d/5, BN completed %d/5, %.1f s", diverged, completed, t);
    out.detail = head.str() + "; " + n.str();
    return out;
}

// ---- 8 ----------------------------------------------------------------------

harness::ExperimentConfig init_config(nn::NormPlacement norm, std::uint64_t seed, std::size_t width,
                                      std::size_t side) {
    auto c = harness::parse_config(
        "network.depth = 20\n"
        "network.init = xavier\n"
        "dataset = synthetic\n"
        "dataset.per_class = 4\n"
        "dataset.test_per_class = 0\n"
        "train.batch_size = 32\n");
    c.network.width = width;
    c.network.normalization = norm;
    c.dataset.synth.image = {3, side, side};
    c.network.input_shape = c.dataset.synth.image;
    c.set_seed(seed);
    return c;
}

// Network and first batch exactly as the init-time commands build them.
std::pair<nn::Network, harness::LabeledImageSet> at_init(const harness::ExperimentConfig& c) {
    const auto data = harness::prepare_data(c);
    SeededRng rng(c.seed, 0);
    return {nn::build_network(c.network, rng), data.train.head(c.batch_size)};
}

// Deepest hidden tap over the first tap; the classifier is not a hidden layer.
double depth_ratio(const diag::MomentProfile& p) {
    return p.layers[p.layers.size() - 2].mean_variance() / p.layers.front().mean_variance();
}

Outcome moment_growth() {
    int grown = 0, flat = 0;
    Notes n;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto [plain, batch] = at_init(init_config(nn::NormPlacement::none, seed, 16, 32));
        const double r0 = depth_ratio(diag::depth_moment_profile(plain, batch.images));
        auto [bn, bbatch] = at_init(init_config(nn::NormPlacement::per_layer, seed, 16, 32));
        const double r1 = depth_ratio(diag::depth_moment_profile(bn, bbatch.images));
        grown += r0 >= 10.0;
        flat += r1 >= 0.5 && r1 <= 2.0;
        n.add("seed %llu none %.3g bn %.3g", static_cast<unsigned long long>(seed), r0, r1);
    }
    Outcome out;
    out.pass = grown >= 4 && flat >= 4;
    Notes head;
    head.add("last/first variance ratio >= 10 in %d/5 unnormalized, in [0.5, 2] in %d/5 BN", grown, flat);
    out.detail = head.str() + "; " + n.str();
    return out;
}

// ---- 9 ----------------------------------------------------------------------

Outcome coherence_ordering() {
    Outcome out;
    double med[2] = {0.0, 0.0};
    std::size_t rows = 0, chain_failures = 0;
    int k = 0;
    for (auto norm : {nn::NormPlacement::per_layer, nn::NormPlacement::none}) {
        auto c = init_config(norm, 1, 8, 16);
        c.network.stream_relu = false;
        auto [net, batch] = at_init(c);
        const auto r = diag::sign_coherence(net, batch.images, batch.labels);
        std::vector<double> ratios;
        for (const auto& row : r) {
            ++rows;
            ratios.push_back(row.ratio);
            const double slack = 1e-12 * row.a;
            if (!(row.a + slack >= row.partial_b && row.a + slack >= row.partial_xy &&
                  row.partial_b + slack >= row.b_abs && row.partial_xy + slack >= row.b_abs))
                ++chain_failures;
        }
        med[k++] = median(ratios);
    }
    out.pass = med[0] >= 5.0 * med[1] && chain_failures == 0;
    Notes n;
    n.add("median a/b BN %.4g, unnormalized %.4g (x%.2f); chain violations %zu of %zu rows", med[0], med[1],
          med[0] / med[1], chain_failures, rows);
    out.detail = n.str();
    return out;
}

// ---- 10, 11 -----------------------------------------------------------------

nn::Network depth6(nn::NormPlacement norm, std::uint64_t seed) {
    nn::NetworkConfig cfg;
    cfg.depth = 6;
    cfg.width = 8;
    cfg.class_count = 10;
    cfg.input_shape = {3, 8, 8};
    cfg.normalization = norm;
    SeededRng rng(seed);
    return nn::build_network(cfg, rng);
}

harness::SplitSet small_data() {
    harness::SplitSet s = harness::synth_dataset({10, 16, 0, 5.0, {3, 8, 8}, 31});
    harness::preprocess(s.train);
    return s;
}

Outcome heatmap_invariants() {
    const auto data = small_data();
    std::size_t batches = 0, rows = 0, bad = 0;
    double worst_sum = 0.0;
    for (auto norm : {nn::NormPlacement::per_layer, nn::NormPlacement::none})
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            nn::Network net = depth6(norm, seed);
            for (std::size_t start = 0; start + 32 <= data.train.size(); start += 32) {
                std::vector<std::size_t> idx(32);
                for (std::size_t i = 0; i < 32; ++i) idx[i] = start + i;
                const auto batch = data.train.gather(idx);
                const auto h = diag::class_grad_heatmap(net, batch.images, batch.labels);
                ++batches;
                const std::size_t k = h.grads.dim(1);
                for (std::size_t r = 0; r < h.grads.dim(0); ++r) {
                    ++rows;
                    double s = 0.0;
                    std::size_t neg = 0;
                    bool at_label = false;
                    for (std::size_t j = 0; j < k; ++j) {
                        const double v = h.grads[r * k + j];
                        s += v;
                        if (v < 0.0) {
                            ++neg;
                            at_label = static_cast<int>(j) == batch.labels[r];
                        }
                    }
                    worst_sum = std::max(worst_sum, std::fabs(s));
                    if (!(std::fabs(s) <= 1e-10) || neg != 1 || !at_label) ++bad;
                }
            }
        }
    Outcome out;
    out.pass = bad == 0 && rows > 0;
    Notes n;
    n.add("%zu batches, %zu rows, %zu violations, worst |row sum| %.2e", batches, rows, bad, worst_sum);
    out.detail = n.str();
    return out;
}

Outcome masking_decomposition() {
    const auto data = small_data();
    const auto batch = data.train.head(32);
    double worst = 0.0;
    std::size_t entries = 0;
    for (auto norm : {nn::NormPlacement::per_layer, nn::NormPlacement::none}) {
        nn::Network net = depth6(norm, 5);
        net.compute_gradients(batch.images, batch.labels, nn::Mode::probe);
        std::vector<Tensor> full;
        for (auto& p : net.params()) full.push_back(*p.grad);
        std::vector<Tensor> total;
        for (std::size_t cls = 0; cls < 10; ++cls) {
            bool mask[10] = {};
            mask[cls] = true;
            const auto g = diag::masked_gradients(net, batch.images, batch.labels, std::span<const bool>(mask, 10));
            if (total.empty())
                total = g;
            else
                for (std::size_t i = 0; i < g.size(); ++i) axpy(1.0, g[i], total[i]);
        }
        for (std::size_t i = 0; i < full.size(); ++i)
            for (std::size_t j = 0; j < full[i].size(); ++j) {
                worst = std::max(worst, std::fabs(total[i][j] - full[i][j]));
                ++entries;
            }
    }
    Outcome out;
    out.pass = worst <= 1e-10;
    Notes n;
    n.add("%zu entries, worst |sum - full| %.2e", entries, worst);
    out.detail = n.str();
    return out;
}

// ---- 12 ---------------------------------------------------------------------

Outcome probe_safety() {
    Outcome out;
    const auto data = small_data();
    const auto batch = data.train.head(32);
    std::size_t buffers = 0;
    for (auto norm : {nn::NormPlacement::per_layer, nn::NormPlacement::none}) {
        nn::Network net = depth6(norm, 7);
        net.compute_gradients(batch.images, batch.labels, nn::Mode::probe);
        const auto before = net.parameter_values();
        std::vector<Tensor> grads;
        for (auto& p : net.params()) grads.push_back(*p.grad);
        std::vector<std::pair<std::vector<double>, std::vector<double>>> running;
        for (auto* n : net.norm_layers()) running.emplace_back(n->state().running_mean, n->state().running_var);

        const auto curve = diag::loss_step_probe(net, batch.images, batch.labels, diag::default_probe_alphas());
        if (curve.relative_losses.front() != 1.0) out.pass = false;
        const auto after = net.parameter_values();
        for (std::size_t i = 0; i < after.size(); ++i, ++buffers)
            if (!bit_equal(before[i], after[i])) out.pass = false;
        std::size_t k = 0;
        for (auto& p : net.params())
            if (!bit_equal(*p.grad, grads[k++])) out.pass = false;
        k = 0;
        for (auto* n : net.norm_layers()) {
            if (n->state().running_mean != running[k].first || n->state().running_var != running[k].second)
                out.pass = false;
            ++k;
        }
    }

    diag::QuadraticObjective q(random_tensor({5}, 41));
    const Tensor x0 = q.point();
    std::vector<double> alphas;
    for (int i = 0; i <= 40; ++i) alphas.push_back(0.05 * i);
    const auto curve = diag::loss_step_probe(q, alphas);
    double worst = 0.0;
    for (std::size_t i = 0; i < alphas.size(); ++i)
        worst = std::max(worst, std::fabs(curve.relative_losses[i] - (1.0 - alphas[i]) * (1.0 - alphas[i])));
    if (!(worst <= 1e-12) || !bit_equal(q.point(), x0) || curve.relative_losses[0] != 1.0) out.pass = false;
    Notes n;
    n.add("%zu parameter tensors compared, quadratic worst error %.2e", buffers, worst);
    out.detail = n.str();
    return out;
}

// ---- 13 ---------------------------------------------------------------------

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(p, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

template <class E>
bool throws(const std::function<void()>& f) {
    try {
        f();
    } catch (const E&) {
        return true;
    } catch (...) {
        return false;
    }
    return false;
}

Outcome parser_fidelity() {
    const fs::path dir = work_dir("cifar");
    SeededRng rng(43);
    std::vector<std::vector<std::uint8_t>> files(6);
    std::size_t records = 0, mismatches = 0;
    const char* names[6] = {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin",
                            "data_batch_4.bin", "data_batch_5.bin", "test_batch.bin"};
    for (std::size_t f = 0; f < 6; ++f) {
        const std::size_t n = 1 + rng.uniform_index(4);
        for (std::size_t r = 0; r < n; ++r) {
            files[f].push_back(static_cast<std::uint8_t>(rng.uniform_index(10)));
            for (std::size_t i = 0; i < 3072; ++i) files[f].push_back(static_cast<std::uint8_t>(rng.uniform_index(256)));
        }
        write_bytes(dir / names[f], files[f]);
    }
    auto compare = [&](const harness::LabeledImageSet& set, std::size_t first, std::size_t last) {
        std::size_t row = 0;
        for (std::size_t f = first; f < last; ++f)
            for (std::size_t r = 0; r * harness::kCifarRecordBytes < files[f].size(); ++r, ++row) {
                ++records;
                const std::uint8_t* rec = files[f].data() + r * harness::kCifarRecordBytes;
                if (set.labels.at(row) != rec[0]) ++mismatches;
                for (std::size_t i = 0; i < 3072; ++i)
                    if (set.images[row * 3072 + i] != static_cast<double>(rec[1 + i])) {
                        ++mismatches;
                        break;
                    }
            }
        if (row != set.size()) ++mismatches;
    };
    compare(harness::load_cifar10(dir, true), 0, 5);
    compare(harness::load_cifar10(dir, false), 5, 6);

    std::vector<std::uint8_t> short_file(3072, 0), long_file(files[0]);
    long_file.push_back(0);
    std::vector<std::uint8_t> bad_label(files[5]);
    bad_label[harness::kCifarRecordBytes * (files[5].size() / harness::kCifarRecordBytes - 1)] = 10;
    write_bytes(dir / "short.bin", short_file);
    write_bytes(dir / "label.bin", bad_label);
    const bool errors = throws<FormatError>([&] { harness::parse_cifar10_bin(dir / "short.bin"); }) &&
                        throws<FormatError>([&] { harness::parse_cifar10_bytes(long_file); }) &&
                        throws<FormatError>([&] { harness::parse_cifar10_bin(dir / "label.bin"); }) &&
                        throws<RunError>([&] { harness::parse_cifar10_bin(dir / "missing.bin"); });

    Outcome out;
    out.pass = mismatches == 0 && records > 0 && errors;
    Notes n;
    n.add("%zu records round-tripped, %zu mismatches, malformed inputs %s", records, mismatches,
          errors ? "rejected" : "NOT rejected");
    out.detail = n.str();
    return out;
}

// ---- 14 ---------------------------------------------------------------------

std::vector<fs::path> csv_files(const fs::path& root) {
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(fs::relative(e.path(), root));
    std::sort(out.begin(), out.end());
    return out;
}

Outcome determinism() {
    struct Job {
        std::string name;
        harness::CommandFn run;
        harness::ExperimentConfig config;
    };
    std::vector<Job> jobs;

    auto diverging = divergence_config(nn::NormPlacement::none, 1);
    jobs.push_back({"train-diverging", harness::cmd_train, diverging});

    auto instrumented = harness::parse_config(
        "network.depth = 8\n"
        "network.width = 8\n"
        "dataset = synthetic\n"
        "dataset.per_class = 16\n"
        "dataset.test_per_class = 4\n"
        "dataset.augment = true\n"
        "train.batch_size = 32\n"
        "train.lr_sweep = 0.05, 0.2\n"
        "train.epochs = 2\n"
        "diagnostics.moments = 5\n"
        "diagnostics.coherence = 5\n"
        "diagnostics.histogram = 5\n"
        "diagnostics.class_heatmap = 5\n"
        "diagnostics.channel_grads = 5\n"
        "diagnostics.channel_matrix = 5\n"
        "diagnostics.mean_vs_grad = 5\n"
        "diagnostics.probe_loss = 5\n"
        "diagnostics.classwise_mask = 5\n");
    instrumented.set_seed(2);
    jobs.push_back({"train-sweep", harness::cmd_train, instrumented});

    for (auto [name, fn] : std::vector<std::pair<const char*, harness::CommandFn>>{
             {"probe-loss", harness::cmd_probe_loss},
             {"init-moments", harness::cmd_init_moments},
             {"coherence", harness::cmd_coherence},
             {"class-heatmap", harness::cmd_class_heatmap}}) {
        auto c = init_config(nn::NormPlacement::per_layer, 3, 8, 16);
        jobs.push_back({name, fn, c});
    }

    auto rmt = harness::parse_config("rmt.n = 64\nrmt.trials = 3\nrmt.points = 50\nseed = 4\n", false);
    jobs.push_back({"rmt-density", harness::cmd_rmt_density, rmt});
    jobs.push_back({"rmt-spectrum", harness::cmd_rmt_spectrum, rmt});
    jobs.push_back({"rmt-condition", harness::cmd_rmt_condition, rmt});
    auto nb = harness::parse_config("noise.trials = 2000\nseed = 5\n", false);
    jobs.push_back({"noise-bound", harness::cmd_noise_bound, nb});

    std::size_t compared = 0;
    std::vector<std::string> differing;
    for (const auto& job : jobs) {
        const fs::path a = work_dir("det_a_" + job.name), b = work_dir("det_b_" + job.name);
        job.run(job.config, a);
        job.run(job.config, b);
        const auto fa = csv_files(a), fb = csv_files(b);
        if (fa != fb || fa.empty()) {
            differing.push_back(job.name + " (file sets)");
            continue;
        }
        for (const auto& f : fa) {
            ++compared;
            if (harness::read_file(a / f) != harness::read_file(b / f))
                differing.push_back(job.name + "/" + f.generic_string());
        }
    }
    Outcome out;
    out.pass = differing.empty();
    Notes n;
    n.add("%zu commands, %zu CSV files byte-compared, %zu differ", jobs.size(), compared, differing.size());
    out.detail = n.str();
    for (const auto& d : differing) out.detail += "; " + d;
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance suite: one PASS/FAIL line per criterion"};
    std::vector<int> only;
    app.add_option("-c,--criteria", only, "Run only these criteria")->check(CLI::Range(1, 14));
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"gradient correctness", gradient_correctness},
        {"BN postcondition", bn_postcondition},
        {"density reduction and mass", density_reduction},
        {"spectrum match", spectrum_match},
        {"condition growth", condition_growth},
        {"SGD noise", sgd_noise},
        {"divergence reproduction", divergence_reproduction},
        {"moment growth at init", moment_growth},
        {"coherence ordering", coherence_ordering},
        {"class-heatmap invariants", heatmap_invariants},
        {"masking decomposition", masking_decomposition},
        {"probe safety", probe_safety},
        {"parser fidelity", parser_fidelity},
        {"determinism", determinism},
    };
    const std::set<int> selected(only.begin(), only.end());
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!selected.empty() && !selected.count(id)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("criterion %2d %s: %s | %s\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed ? 1 : 0;
}
