#include "bnlab/nn/generalized_norm.hpp"

#include <cmath>
#include <string>

#include "bnlab/error.hpp"

namespace bnlab::nn {

GroupingKind parse_grouping_kind(std::string_view name) {
    if (name == "batch") return GroupingKind::batch;
    if (name == "layer") return GroupingKind::layer;
    if (name == "instance") return GroupingKind::instance;
    if (name == "group") return GroupingKind::group;
    throw ValueError("unknown normalization grouping '" + std::string(name) + "'");
}

std::string_view to_string(GroupingKind kind) {
    switch (kind) {
        case GroupingKind::batch: return "batch";
        case GroupingKind::layer: return "layer";
        case GroupingKind::instance: return "instance";
        case GroupingKind::group: return "group";
    }
    return "?";
}

namespace {

// A statistics group is a list of (sample, channel range) segments, each
// covering all spatial positions of those channels.
struct Segment {
    std::size_t b, c0, c1;
};

class GroupPlan {
public:
    GroupPlan(const ChannelLayout& lay, Grouping g) : lay_(lay) {
        switch (g.kind) {
            case GroupingKind::batch: per_sample_ = false; break;
            case GroupingKind::layer: groups_per_sample_ = 1; break;
            case GroupingKind::instance: groups_per_sample_ = lay.channels; break;
            case GroupingKind::group:
                if (g.groups == 0 || lay.channels % g.groups != 0)
                    throw GroupingError("group count " + std::to_string(g.groups) + " does not divide " +
                                        std::to_string(lay.channels) + " channels");
                groups_per_sample_ = g.groups;
                break;
        }
    }

    std::size_t count() const { return per_sample_ ? lay_.batch * groups_per_sample_ : lay_.channels; }

    std::size_t elements() const {
        return per_sample_ ? (lay_.channels / groups_per_sample_) * lay_.spatial : lay_.batch * lay_.spatial;
    }

    template <class F>
    void for_each_segment(std::size_t group, F&& f) const {
        if (!per_sample_) {
            for (std::size_t b = 0; b < lay_.batch; ++b) f(Segment{b, group, group + 1});
            return;
        }
        const std::size_t b = group / groups_per_sample_;
        const std::size_t k = group % groups_per_sample_;
        const std::size_t width = lay_.channels / groups_per_sample_;
        f(Segment{b, k * width, (k + 1) * width});
    }

    // Calls f(flat index, channel) for every element of the group in order.
    template <class F>
    void for_each_element(std::size_t group, F&& f) const {
        for_each_segment(group, [&](const Segment& seg) {
            for (std::size_t c = seg.c0; c < seg.c1; ++c) {
                const std::size_t base = (seg.b * lay_.channels + c) * lay_.spatial;
                for (std::size_t s = 0; s < lay_.spatial; ++s) f(base + s, c);
            }
        });
    }

private:
    ChannelLayout lay_;
    bool per_sample_ = true;
    std::size_t groups_per_sample_ = 1;
};

void check_affine(const ChannelLayout& lay, const Tensor& gamma, const Tensor& beta) {
    if (gamma.size() != lay.channels || beta.size() != lay.channels)
        throw DimensionError("affine parameters must have one entry per channel");
}

}  // namespace

GeneralizedNormForward generalized_norm_forward(const Tensor& input, Grouping grouping, const Tensor& gamma,
                                                const Tensor& beta, double eps) {
    const auto lay = channel_layout(input);
    check_affine(lay, gamma, beta);
    const GroupPlan plan(lay, grouping);
    if (plan.elements() < 2)
        throw DegenerateBatchError("normalization group has fewer than 2 elements for shape " +
                                   shape_string(input.shape()));

    GeneralizedNormForward f{Tensor(input.shape()), {input, Tensor(input.shape()), {}, grouping}};
    f.cache.inv_std.resize(plan.count());
    const double n = static_cast<double>(plan.elements());
    const double* x = input.data().data();
    double* xh = f.cache.xhat.data().data();
    double* y = f.output.data().data();

    for (std::size_t g = 0; g < plan.count(); ++g) {
        double sum = 0.0;
        plan.for_each_element(g, [&](std::size_t i, std::size_t) { sum += x[i]; });
        const double mean = sum / n;
        double sq = 0.0;
        plan.for_each_element(g, [&](std::size_t i, std::size_t) {
            const double d = x[i] - mean;
            sq += d * d;
        });
        const double is = 1.0 / std::sqrt(sq / n + eps);
        f.cache.inv_std[g] = is;
        plan.for_each_element(g, [&](std::size_t i, std::size_t c) {
            double v = x[i] - mean;
            v = v * is;
            xh[i] = v;
            v = gamma[c] * v;
            v = v + beta[c];
            y[i] = v;
        });
    }
    return f;
}

Tensor generalized_norm(const Tensor& input, Grouping grouping, const Tensor& gamma, const Tensor& beta,
                        double eps) {
    return generalized_norm_forward(input, grouping, gamma, beta, eps).output;
}

GeneralizedNormGrads generalized_norm_backward(const Tensor& upstream, const GeneralizedNormCache& cache,
                                               const Tensor& gamma) {
    if (upstream.shape() != cache.input.shape())
        throw CacheMismatchError("upstream gradient shape does not match the cached forward input");
    const auto lay = channel_layout(upstream);
    const GroupPlan plan(lay, cache.grouping);
    const double n = static_cast<double>(plan.elements());
    GeneralizedNormGrads g{Tensor(upstream.shape()), Tensor({lay.channels}), Tensor({lay.channels})};
    const double* dy = upstream.data().data();
    const double* xh = cache.xhat.data().data();
    double* dx = g.grad_input.data().data();

    for (std::size_t b = 0; b < lay.batch; ++b)
        for (std::size_t c = 0; c < lay.channels; ++c) {
            const std::size_t base = (b * lay.channels + c) * lay.spatial;
            for (std::size_t s = 0; s < lay.spatial; ++s) {
                g.grad_gamma[c] += dy[base + s] * xh[base + s];
                g.grad_beta[c] += dy[base + s];
            }
        }

    for (std::size_t grp = 0; grp < plan.count(); ++grp) {
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        plan.for_each_element(grp, [&](std::size_t i, std::size_t c) {
            const double d = dy[i] * gamma[c];
            sum_dxhat += d;
            sum_dxhat_xhat += d * xh[i];
        });
        const double mean_dxhat = sum_dxhat / n;
        const double mean_dxhat_xhat = sum_dxhat_xhat / n;
        const double is = cache.inv_std[grp];
        plan.for_each_element(grp, [&](std::size_t i, std::size_t c) {
            dx[i] = is * (dy[i] * gamma[c] - mean_dxhat - xh[i] * mean_dxhat_xhat);
        });
    }
    return g;
}

}  // namespace bnlab::nn
