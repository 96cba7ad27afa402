#include "bnlab/diagnostics.hpp"

#include <cmath>

#include "bnlab/error.hpp"

namespace bnlab::diag {

ChannelMoments channel_moments(const Tensor& acts) {
    if (acts.empty()) throw DimensionError("channel moments of an empty tensor");
    nn::ChannelStats s = nn::channel_statistics(acts);
    return {std::move(s.mean), std::move(s.var)};
}

double LayerMoments::mean_variance() const {
    double sum = 0.0;
    for (double v : moments.var) sum += v;
    return moments.var.empty() ? 0.0 : sum / static_cast<double>(moments.var.size());
}

double LayerMoments::mean_abs_mean() const {
    double sum = 0.0;
    for (double m : moments.mean) sum += std::abs(m);
    return moments.mean.empty() ? 0.0 : sum / static_cast<double>(moments.mean.size());
}

MomentProfile moment_profile(const nn::Network& net) {
    MomentProfile profile;
    for (const auto& tap : net.taps()) {
        const Tensor& acts = tap.norm ? tap.pre_norm() : tap.pre_activation();
        if (acts.empty()) throw CacheMismatchError("moment profile requested before a forward pass");
        profile.layers.push_back({tap.index, tap.weight->is_conv(), channel_moments(acts)});
    }
    return profile;
}

MomentProfile depth_moment_profile(nn::Network& net, const Tensor& batch) {
    net.forward(batch, nn::Mode::probe);
    return moment_profile(net);
}

}  // namespace bnlab::diag
