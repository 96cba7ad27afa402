#include "bnlab/harness/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "bnlab/error.hpp"

namespace bnlab::harness {

namespace {

std::size_t example_size(const Tensor& images) { return images.size() / images.dim(0); }

}  // namespace

LabeledImageSet LabeledImageSet::gather(std::span<const std::size_t> indices) const {
    if (indices.empty()) return {};
    if (size() == 0) throw SizeError("gather from an empty set");
    Shape shape = images.shape();
    shape[0] = indices.size();
    const std::size_t stride = example_size(images);
    LabeledImageSet out{Tensor(shape), {}};
    out.labels.reserve(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const std::size_t i = indices[k];
        if (i >= size()) throw SizeError("example index " + std::to_string(i) + " out of range");
        std::copy_n(images.storage().begin() + static_cast<std::ptrdiff_t>(i * stride), stride,
                    out.images.storage().begin() + static_cast<std::ptrdiff_t>(k * stride));
        out.labels.push_back(labels[i]);
    }
    return out;
}

LabeledImageSet LabeledImageSet::head(std::size_t n) const {
    std::vector<std::size_t> idx(std::min(n, size()));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return gather(idx);
}

LabeledImageSet parse_cifar10_bytes(std::span<const std::uint8_t> bytes) {
    if (bytes.size() % kCifarRecordBytes != 0)
        throw FormatError("CIFAR-10 data length " + std::to_string(bytes.size()) + " is not a multiple of " +
                          std::to_string(kCifarRecordBytes));
    const std::size_t n = bytes.size() / kCifarRecordBytes;
    if (n == 0) return {};
    constexpr std::size_t pixels = kCifarRecordBytes - 1;
    LabeledImageSet out{Tensor({n, 3, 32, 32}), std::vector<int>(n)};
    for (std::size_t r = 0; r < n; ++r) {
        const std::uint8_t* rec = bytes.data() + r * kCifarRecordBytes;
        if (rec[0] > 9)
            throw FormatError("record " + std::to_string(r) + " has label " + std::to_string(rec[0]));
        out.labels[r] = rec[0];
        double* dst = out.images.data().data() + r * pixels;
        for (std::size_t p = 0; p < pixels; ++p) dst[p] = rec[1 + p];
    }
    return out;
}

LabeledImageSet parse_cifar10_bin(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RunError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw RunError("cannot read " + path.string());
    return parse_cifar10_bytes(bytes);
}

LabeledImageSet load_cifar10(const std::filesystem::path& dir, bool train) {
    if (!train) return parse_cifar10_bin(dir / "test_batch.bin");
    std::vector<LabeledImageSet> parts;
    std::size_t total = 0;
    for (int k = 1; k <= 5; ++k) {
        parts.push_back(parse_cifar10_bin(dir / ("data_batch_" + std::to_string(k) + ".bin")));
        total += parts.back().size();
    }
    if (total == 0) return {};
    LabeledImageSet out{Tensor({total, 3, 32, 32}), {}};
    auto dst = out.images.storage().begin();
    for (const auto& p : parts) {
        dst = std::copy(p.images.storage().begin(), p.images.storage().end(), dst);
        out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    }
    return out;
}

namespace {

LabeledImageSet draw_blobs(const std::vector<std::vector<double>>& means, std::size_t per_class,
                           const Shape& image, SeededRng& rng) {
    const std::size_t k = means.size(), dim = shape_size(image);
    if (per_class == 0) return {};
    Shape shape{k * per_class};
    shape.insert(shape.end(), image.begin(), image.end());
    LabeledImageSet out{Tensor(shape), std::vector<int>(k * per_class)};
    double* dst = out.images.data().data();
    for (std::size_t i = 0; i < k * per_class; ++i) {
        const std::size_t c = i % k;
        out.labels[i] = static_cast<int>(c);
        for (std::size_t j = 0; j < dim; ++j) dst[i * dim + j] = means[c][j] + rng.normal();
    }
    return out;
}

}  // namespace

SplitSet synth_dataset(const SynthSpec& spec) {
    if (spec.classes < 2) throw ValueError("synthetic data needs at least two classes");
    if (spec.image.size() != 3) throw DimensionError("synthetic image shape must be (channels, height, width)");
    const std::size_t dim = shape_size(spec.image);
    if (dim < spec.classes) throw DimensionError("image too small for orthogonal class means");
    if (spec.separation < 0.0) throw ValueError("separation must be non-negative");

    SeededRng mean_rng(spec.seed, 0);
    std::vector<std::vector<double>> means;
    while (means.size() < spec.classes) {
        std::vector<double> v(dim);
        for (auto& x : v) x = mean_rng.normal();
        for (const auto& u : means) {
            double dot = 0.0;
            for (std::size_t j = 0; j < dim; ++j) dot += u[j] * v[j];
            for (std::size_t j = 0; j < dim; ++j) v[j] -= dot * u[j];
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-6) continue;
        for (auto& x : v) x /= norm;
        means.push_back(std::move(v));
    }
    const double radius = spec.separation / std::sqrt(2.0);
    for (auto& u : means)
        for (auto& x : u) x *= radius;

    SeededRng train_rng(spec.seed, 1), test_rng(spec.seed, 2);
    return {draw_blobs(means, spec.per_class, spec.image, train_rng),
            draw_blobs(means, spec.test_per_class, spec.image, test_rng)};
}

Tensor augment_with(const Tensor& image, std::size_t dy, std::size_t dx, bool flip) {
    if (image.rank() != 3) throw DimensionError("augment expects a [c, h, w] image, got " + shape_string(image.shape()));
    if (dy > 2 * kAugmentPad || dx > 2 * kAugmentPad) throw ValueError("crop offset outside the padded image");
    const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
    Tensor out(image.shape());
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y) {
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + dy) - static_cast<std::ptrdiff_t>(kAugmentPad);
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t x = 0; x < w; ++x) {
                const std::size_t ox = flip ? w - 1 - x : x;
                const std::ptrdiff_t sx =
                    static_cast<std::ptrdiff_t>(ox + dx) - static_cast<std::ptrdiff_t>(kAugmentPad);
                if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
                out[(ch * h + y) * w + x] = image[(ch * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)];
            }
        }
    return out;
}

Tensor augment(const Tensor& image, SeededRng& rng) {
    const std::size_t dy = rng.uniform_index(2 * kAugmentPad + 1);
    const std::size_t dx = rng.uniform_index(2 * kAugmentPad + 1);
    const bool flip = rng.bernoulli(0.5);
    return augment_with(image, dy, dx, flip);
}

void augment_batch(Tensor& images, SeededRng& rng) {
    if (images.rank() != 4) throw DimensionError("augment_batch expects [n, c, h, w]");
    const Shape one(images.shape().begin() + 1, images.shape().end());
    const std::size_t stride = shape_size(one);
    for (std::size_t i = 0; i < images.dim(0); ++i) {
        const auto first = images.storage().begin() + static_cast<std::ptrdiff_t>(i * stride);
        Tensor img(one, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(stride)));
        const Tensor aug = augment(img, rng);
        std::copy(aug.storage().begin(), aug.storage().end(), first);
    }
}

ChannelNormalizer fit_channel_normalizer(const Tensor& images) {
    if (images.rank() != 4 || images.empty()) throw DimensionError("channel statistics need a non-empty [n, c, h, w]");
    const std::size_t n = images.dim(0), c = images.dim(1), hw = images.dim(2) * images.dim(3);
    ChannelNormalizer norm{std::vector<double>(c, 0.0), std::vector<double>(c, 0.0)};
    const double count = static_cast<double>(n * hw);
    for (std::size_t ch = 0; ch < c; ++ch) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t p = 0; p < hw; ++p) s += images[(i * c + ch) * hw + p];
        const double mean = s / count;
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t p = 0; p < hw; ++p) {
                const double d = images[(i * c + ch) * hw + p] - mean;
                ss += d * d;
            }
        norm.mean[ch] = mean;
        norm.std[ch] = std::max(std::sqrt(ss / count), kStdFloor);
    }
    return norm;
}

void ChannelNormalizer::apply(Tensor& images) const {
    if (images.rank() != 4 || images.dim(1) != mean.size())
        throw DimensionError("normalizer expects [n, " + std::to_string(mean.size()) + ", h, w]");
    const std::size_t n = images.dim(0), c = images.dim(1), hw = images.dim(2) * images.dim(3);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t p = 0; p < hw; ++p) {
                double& v = images[(i * c + ch) * hw + p];
                v = (v - mean[ch]) / std[ch];
            }
}

ChannelNormalizer preprocess(LabeledImageSet& train, std::span<LabeledImageSet* const> others) {
    ChannelNormalizer norm = fit_channel_normalizer(train.images);
    norm.apply(train.images);
    for (auto* set : others)
        if (set->size() > 0) norm.apply(set->images);
    return norm;
}

}  // namespace bnlab::harness
