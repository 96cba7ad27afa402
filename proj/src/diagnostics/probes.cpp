#include <cmath>

#include "bnlab/diagnostics.hpp"
#include "bnlab/error.hpp"

namespace bnlab::diag {

NetworkObjective::NetworkObjective(nn::Network& net, const Tensor& x, std::span<const int> labels)
    : net_(net), x_(x), labels_(labels) {}

double NetworkObjective::loss() { return net_.loss(x_, labels_, nn::Mode::probe); }

double NetworkObjective::loss_and_gradient() { return net_.compute_gradients(x_, labels_, nn::Mode::probe); }

QuadraticObjective::QuadraticObjective(Tensor x0) : x_(std::move(x0)), grad_(x_.shape()) {}

std::vector<nn::ParamRef> QuadraticObjective::params() { return {{"x", &x_, &grad_, false}}; }

double QuadraticObjective::loss() { return 0.5 * x_.squared_norm(); }

double QuadraticObjective::loss_and_gradient() {
    grad_ = x_;
    return loss();
}

std::vector<double> default_probe_alphas() {
    std::vector<double> alphas{0.0};
    const int n = 25;
    const double lo = -5.0, hi = 1.0;
    for (int k = 0; k < n; ++k) alphas.push_back(std::pow(10.0, lo + (hi - lo) * k / (n - 1)));
    return alphas;
}

LossProbeCurve loss_step_probe(Objective& objective, std::span<const double> alphas) {
    for (std::size_t k = 0; k < alphas.size(); ++k) {
        if (!(alphas[k] >= 0.0)) throw ValueError("probe step sizes must be non-negative");
        if (k > 0 && !(alphas[k] > alphas[k - 1])) throw ValueError("probe step sizes must be strictly ascending");
    }

    auto refs = objective.params();
    std::vector<Tensor> saved_values, saved_grads;
    for (const auto& p : refs) {
        saved_values.push_back(*p.value);
        saved_grads.push_back(*p.grad);
    }

    const double base = objective.loss_and_gradient();
    std::vector<Tensor> direction;
    for (const auto& p : refs) direction.push_back(*p.grad);

    LossProbeCurve curve;
    for (double alpha : alphas) {
        double rel = 1.0;
        if (alpha != 0.0) {
            for (std::size_t k = 0; k < refs.size(); ++k) {
                Tensor& v = *refs[k].value;
                for (std::size_t i = 0; i < v.size(); ++i) v[i] = saved_values[k][i] - alpha * direction[k][i];
            }
            rel = objective.loss() / base;
        }
        curve.alphas.push_back(alpha);
        curve.relative_losses.push_back(rel);
        curve.non_finite.push_back(!std::isfinite(rel));
    }

    for (std::size_t k = 0; k < refs.size(); ++k) {
        *refs[k].value = saved_values[k];
        *refs[k].grad = saved_grads[k];
    }
    return curve;
}

LossProbeCurve loss_step_probe(nn::Network& net, const Tensor& x, std::span<const int> labels,
                               std::span<const double> alphas) {
    NetworkObjective objective(net, x, labels);
    return loss_step_probe(objective, alphas);
}

bool is_divergent(double loss, double threshold) { return !std::isfinite(loss) || loss > threshold; }

DivergenceCapture::DivergenceCapture(DivergenceOptions options) : options_(std::move(options)) {
    for (std::size_t k = 0; k < options_.fractions.size(); ++k) {
        const double f = options_.fractions[k];
        if (!(f >= 0.0 && f <= 1.0)) throw ValueError("interpolation fractions must lie in [0, 1]");
        if (k > 0 && !(f > options_.fractions[k - 1])) throw ValueError("interpolation fractions must ascend");
    }
    if (options_.fractions.empty() || options_.fractions.front() != 0.0 || options_.fractions.back() != 1.0)
        throw ValueError("interpolation fractions must include 0 and 1");
}

const std::optional<DivergenceEvent>& DivergenceCapture::observe(nn::Network& net, const std::vector<Tensor>& before,
                                                                 const Tensor& x, std::span<const int> labels,
                                                                 std::size_t step, double pre_loss,
                                                                 double post_loss) {
    if (event_ || !is_divergent(post_loss, options_.threshold)) return event_;

    const std::vector<Tensor> after = net.parameter_values();
    if (after.size() != before.size()) throw DimensionError("pre-update state does not match the network");

    DivergenceEvent ev{step, pre_loss, post_loss, {}};
    for (double f : options_.fractions) {
        if (f == 0.0) {
            net.set_parameter_values(before);
        } else if (f == 1.0) {
            net.set_parameter_values(after);
        } else {
            std::vector<Tensor> mix = before;
            for (std::size_t k = 0; k < mix.size(); ++k)
                for (std::size_t i = 0; i < mix[k].size(); ++i)
                    mix[k][i] = before[k][i] + f * (after[k][i] - before[k][i]);
            net.set_parameter_values(mix);
        }
        const double loss = net.loss(x, labels, nn::Mode::probe);
        ev.snapshots.push_back({f, loss, moment_profile(net)});
    }
    net.set_parameter_values(after);
    event_ = std::move(ev);
    return event_;
}

}  // namespace bnlab::diag
