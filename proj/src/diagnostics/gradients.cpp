#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "bnlab/diagnostics.hpp"
#include "bnlab/error.hpp"
#include "bnlab/nn/loss.hpp"

namespace bnlab::diag {

namespace {

// Type-7 quantile of sorted data.
double quantile(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double t = pos - static_cast<double>(lo);
    return sorted[lo] + t * (sorted[hi] - sorted[lo]);
}

struct Sums {
    double a = 0.0, b_abs = 0.0, partial_b = 0.0, partial_xy = 0.0;
};

CoherenceRow finish_row(std::size_t layer, const Sums& s, std::size_t params) {
    const double n = static_cast<double>(params);
    CoherenceRow row{layer, s.a / n, s.b_abs / n, s.partial_b / n, s.partial_xy / n, 0.0, false};
    if (row.b_abs < 1e-30) {
        row.ratio = kRatioCeiling;
        row.saturated = true;
    } else {
        row.ratio = row.a / row.b_abs;
        if (!(row.ratio <= kRatioCeiling)) {
            row.ratio = kRatioCeiling;
            row.saturated = true;
        }
    }
    return row;
}

std::vector<nn::Tap> conv_taps(const nn::Network& net) {
    std::vector<nn::Tap> out;
    for (const auto& t : net.taps())
        if (t.weight->is_conv()) out.push_back(t);
    return out;
}

}  // namespace

HistogramStats gradient_histogram_stats(std::span<const double> values) {
    if (values.size() < 4) throw SizeError("histogram statistics need at least 4 values");
    HistogramStats st;
    st.count = values.size();
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    st.mean = sum / n;
    double m2 = 0.0, m4 = 0.0;
    std::vector<double> mags;
    mags.reserve(values.size());
    for (double v : values) {
        const double d = v - st.mean;
        m2 += d * d;
        m4 += d * d * d * d;
        mags.push_back(std::abs(v));
    }
    m2 /= n;
    m4 /= n;
    st.std = std::sqrt(m2);
    if (m2 >= 1e-30) st.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    std::sort(mags.begin(), mags.end());
    st.max_abs = mags.back();
    const double median = quantile(mags, 0.5);
    if (median > 0.0) st.tail_ratio = quantile(mags, 0.999) / median;
    return st;
}

CoherenceRow coherence_row(std::size_t layer, const Tensor& input, const Tensor& upstream) {
    if (input.rank() != 4 || upstream.rank() != 4 || input.dim(0) != upstream.dim(0) ||
        input.dim(2) != upstream.dim(2) || input.dim(3) != upstream.dim(3))
        throw DimensionError("coherence needs input [b,ci,h,w] and upstream [b,co,h,w], got " +
                             shape_string(input.shape()) + " and " + shape_string(upstream.shape()));
    const std::size_t nb = input.dim(0), ci = input.dim(1), co = upstream.dim(1);
    const std::size_t h = input.dim(2), w = input.dim(3), plane = h * w;
    const double* in = input.data().data();
    const double* up = upstream.data().data();

    std::vector<Sums> per_pair(co * ci);
    const auto jobs = static_cast<long long>(co * ci);
#pragma omp parallel for schedule(static)
    for (long long job = 0; job < jobs; ++job) {
        const auto o = static_cast<std::size_t>(job) / ci;
        const auto i = static_cast<std::size_t>(job) % ci;
        Sums acc;
        std::vector<double> over_b(plane);
        for (std::size_t kx = 0; kx < 3; ++kx)
            for (std::size_t ky = 0; ky < 3; ++ky) {
                std::fill(over_b.begin(), over_b.end(), 0.0);
                double a = 0.0, total = 0.0, partial_b = 0.0;
                for (std::size_t b = 0; b < nb; ++b) {
                    const double* u = up + (b * co + o) * plane;
                    const double* s = in + (b * ci + i) * plane;
                    double over_xy = 0.0;
                    for (std::size_t x = 0; x < h; ++x) {
                        if (x + kx < 1 || x + kx > h) continue;
                        const std::size_t sx = x + kx - 1;
                        for (std::size_t y = 0; y < w; ++y) {
                            if (y + ky < 1 || y + ky > w) continue;
                            const double d = u[x * w + y] * s[sx * w + (y + ky - 1)];
                            a += std::abs(d);
                            over_xy += d;
                            over_b[x * w + y] += d;
                        }
                    }
                    partial_b += std::abs(over_xy);
                    total += over_xy;
                }
                double partial_xy = 0.0;
                for (double v : over_b) partial_xy += std::abs(v);
                acc.a += a;
                acc.b_abs += std::abs(total);
                acc.partial_b += partial_b;
                acc.partial_xy += partial_xy;
            }
        per_pair[static_cast<std::size_t>(job)] = acc;
    }

    Sums s;
    for (const auto& p : per_pair) {
        s.a += p.a;
        s.b_abs += p.b_abs;
        s.partial_b += p.partial_b;
        s.partial_xy += p.partial_xy;
    }
    return finish_row(layer, s, co * ci * 9);
}

CoherenceRow coherence_row_from_summands(std::size_t layer, const Tensor& summands) {
    if (summands.rank() != 7 || summands.dim(2) != 3 || summands.dim(3) != 3)
        throw DimensionError("summands must be [c_out, c_in, 3, 3, b, h, w], got " + shape_string(summands.shape()));
    const std::size_t params = summands.dim(0) * summands.dim(1) * 9;
    const std::size_t nb = summands.dim(4), plane = summands.dim(5) * summands.dim(6);
    Sums s;
    std::vector<double> over_b(plane);
    for (std::size_t p = 0; p < params; ++p) {
        const double* d = summands.data().data() + p * nb * plane;
        std::fill(over_b.begin(), over_b.end(), 0.0);
        double total = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
            double over_xy = 0.0;
            for (std::size_t k = 0; k < plane; ++k) {
                const double v = d[b * plane + k];
                s.a += std::abs(v);
                over_xy += v;
                over_b[k] += v;
            }
            s.partial_b += std::abs(over_xy);
            total += over_xy;
        }
        s.b_abs += std::abs(total);
        for (double v : over_b) s.partial_xy += std::abs(v);
    }
    return finish_row(layer, s, params);
}

std::vector<CoherenceRow> sign_coherence(nn::Network& net, const Tensor& x, std::span<const int> labels) {
    net.compute_gradients(x, labels, nn::Mode::probe);
    std::vector<CoherenceRow> rows;
    for (const auto& tap : conv_taps(net))
        rows.push_back(coherence_row(tap.index, tap.weight->last_input(), tap.weight->last_upstream()));
    return rows;
}

Tensor channel_grad_matrix(const Tensor& grad_kernel) {
    if (grad_kernel.rank() != 4 || grad_kernel.dim(2) != 3 || grad_kernel.dim(3) != 3)
        throw DimensionError("kernel gradient must be [c_out, c_in, 3, 3]");
    const std::size_t co = grad_kernel.dim(0), ci = grad_kernel.dim(1);
    Tensor m({ci, co});
    for (std::size_t o = 0; o < co; ++o)
        for (std::size_t i = 0; i < ci; ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k < 9; ++k) s += std::abs(grad_kernel[(o * ci + i) * 9 + k]);
            m[i * co + o] = s;
        }
    return m;
}

ClassGradHeatmap class_grad_heatmap(const Tensor& logits, std::span<const int> labels) {
    ClassGradHeatmap hm{nn::per_example_logit_gradients(logits, labels), 0, 0.0};
    const std::size_t nb = logits.dim(0), k = logits.dim(1);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t b = 0; b < nb; ++b) {
        std::size_t best = k;
        for (std::size_t j = 0; j < k; ++j) {
            const double v = hm.grads[b * k + j];
            if (v > 0.0 && (best == k || v > hm.grads[b * k + best])) best = j;
        }
        if (best < k) ++counts[best];
    }
    hm.modal_column = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    hm.dominant_fraction = nb ? static_cast<double>(counts[hm.modal_column]) / static_cast<double>(nb) : 0.0;
    return hm;
}

ClassGradHeatmap class_grad_heatmap(nn::Network& net, const Tensor& x, std::span<const int> labels) {
    return class_grad_heatmap(net.forward(x, nn::Mode::probe), labels);
}

namespace {

std::vector<Tensor> backprop_masked(nn::Network& net, const Tensor& full_grad, std::span<const bool> class_mask) {
    const std::size_t nb = full_grad.dim(0), k = full_grad.dim(1);
    if (class_mask.size() != k)
        throw DimensionError("class mask has " + std::to_string(class_mask.size()) + " entries for " +
                             std::to_string(k) + " classes");
    Tensor g = full_grad;
    for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t j = 0; j < k; ++j)
            if (!class_mask[j]) g[b * k + j] = 0.0;
    net.backward(g);
    std::vector<Tensor> out;
    for (const auto& p : net.params()) out.push_back(*p.grad);
    return out;
}

ClasswiseNorms norms_of(nn::Network& net, std::size_t cls, const std::vector<Tensor>& grads) {
    ClasswiseNorms r{cls, {}, {}};
    const auto refs = net.params();
    for (std::size_t p = 0; p < refs.size(); ++p) {
        r.names.push_back(std::to_string(p) + "." + refs[p].name);
        r.norms.push_back(std::sqrt(grads[p].squared_norm()));
    }
    return r;
}

Tensor batch_logit_gradient(nn::Network& net, const Tensor& x, std::span<const int> labels) {
    return nn::softmax_xent(net.forward(x, nn::Mode::probe), labels).grad_logits;
}

}  // namespace

std::vector<Tensor> masked_gradients(nn::Network& net, const Tensor& x, std::span<const int> labels,
                                     std::span<const bool> class_mask) {
    return backprop_masked(net, batch_logit_gradient(net, x, labels), class_mask);
}

ClasswiseNorms classwise_gradient_mask(nn::Network& net, const Tensor& x, std::span<const int> labels,
                                       std::size_t cls) {
    const Tensor g = batch_logit_gradient(net, x, labels);
    if (cls >= g.dim(1))
        throw LabelError("class " + std::to_string(cls) + " outside [0, " + std::to_string(g.dim(1)) + ")");
    const std::size_t k = g.dim(1);
    std::unique_ptr<bool[]> flags(new bool[k]());
    flags[cls] = true;
    return norms_of(net, cls, backprop_masked(net, g, {flags.get(), k}));
}

std::vector<ClasswiseNorms> classwise_gradient_masks(nn::Network& net, const Tensor& x,
                                                     std::span<const int> labels) {
    const Tensor g = batch_logit_gradient(net, x, labels);
    const std::size_t k = g.dim(1);
    std::unique_ptr<bool[]> flags(new bool[k]);
    std::vector<ClasswiseNorms> out;
    for (std::size_t cls = 0; cls < k; ++cls) {
        for (std::size_t j = 0; j < k; ++j) flags[j] = (j == cls);
        out.push_back(norms_of(net, cls, backprop_masked(net, g, {flags.get(), k})));
    }
    return out;
}

std::vector<MeanGradPair> mean_vs_grad_pairs(nn::Network& net, const Tensor& x, std::span<const int> labels) {
    net.compute_gradients(x, labels, nn::Mode::probe);
    std::vector<MeanGradPair> pairs;
    for (const auto& tap : conv_taps(net)) {
        const ChannelMoments in = channel_moments(tap.weight->last_input());
        const Tensor& g = tap.weight->weight_grad();
        const std::size_t co = g.dim(0), ci = g.dim(1);
        for (std::size_t i = 0; i < ci; ++i)
            for (std::size_t o = 0; o < co; ++o) {
                double s = 0.0;
                for (std::size_t k = 0; k < 9; ++k) s += std::abs(g[(o * ci + i) * 9 + k]);
                pairs.push_back({tap.index, i, o, in.mean[i], s / 9.0});
            }
    }
    return pairs;
}

std::vector<double> channel_gradient_magnitudes(const Tensor& upstream) {
    const auto lay = channel_layout(upstream);
    std::vector<double> out(lay.channels, 0.0);
    for (std::size_t c = 0; c < lay.channels; ++c) {
        double s = 0.0;
        for (std::size_t b = 0; b < lay.batch; ++b)
            for (std::size_t k = 0; k < lay.spatial; ++k) s += upstream[(b * lay.channels + c) * lay.spatial + k];
        out[c] = std::abs(s);
    }
    return out;
}

std::vector<ChannelGradient> channel_gradients(nn::Network& net, const Tensor& x, std::span<const int> labels) {
    net.compute_gradients(x, labels, nn::Mode::probe);
    std::vector<ChannelGradient> out;
    for (const auto& tap : net.taps()) {
        const auto mags = channel_gradient_magnitudes(tap.weight->last_upstream());
        for (std::size_t c = 0; c < mags.size(); ++c) out.push_back({tap.index, c, mags[c]});
    }
    return out;
}

}  // namespace bnlab::diag
