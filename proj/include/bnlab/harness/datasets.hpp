#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bnlab/rng.hpp"
#include "bnlab/tensor.hpp"

namespace bnlab::harness {

struct LabeledImageSet {
    Tensor images;  // [n, c, h, w]; default-constructed when n = 0
    std::vector<int> labels;

    std::size_t size() const noexcept { return labels.size(); }
    // Copies the listed examples, in order, into a batch.
    LabeledImageSet gather(std::span<const std::size_t> indices) const;
    LabeledImageSet head(std::size_t n) const;
};

inline constexpr std::size_t kCifarRecordBytes = 3073;

// CIFAR-10 binary records: one label byte, then 1024 red, 1024 green and 1024
// blue bytes, each channel row-major over 32 x 32.
LabeledImageSet parse_cifar10_bytes(std::span<const std::uint8_t> bytes);
LabeledImageSet parse_cifar10_bin(const std::filesystem::path& path);

// data_batch_1.bin .. data_batch_5.bin, or test_batch.bin.
LabeledImageSet load_cifar10(const std::filesystem::path& dir, bool train);

struct SynthSpec {
    std::size_t classes = 10;
    std::size_t per_class = 64;
    std::size_t test_per_class = 16;
    double separation = 5.0;
    Shape image{3, 8, 8};
    std::uint64_t seed = 0;
};

struct SplitSet {
    LabeledImageSet train;
    LabeledImageSet test;
};

// Gaussian class blobs with unit within-class variance. The class means are
// orthogonal, each at distance separation / sqrt(2) from the origin, so
// every pair of means is separation apart. Labels cycle 0, 1, ..., K-1.
SplitSet synth_dataset(const SynthSpec& spec);

inline constexpr std::size_t kAugmentPad = 4;

// Zero-pad every side by kAugmentPad, keep the window at offset (dy, dx) in
// the padded image, then mirror columns if flip is set. Offsets run 0..8;
// (4, 4) is the original framing.
Tensor augment_with(const Tensor& image, std::size_t dy, std::size_t dx, bool flip);
// Uniform window offset and a fair coin for the flip.
Tensor augment(const Tensor& image, SeededRng& rng);
void augment_batch(Tensor& images, SeededRng& rng);

inline constexpr double kStdFloor = 1e-8;

struct ChannelNormalizer {
    std::vector<double> mean;
    std::vector<double> std;  // population std, floored at kStdFloor

    void apply(Tensor& images) const;
};

ChannelNormalizer fit_channel_normalizer(const Tensor& images);

// Fits on train and applies the same statistics to every set.
ChannelNormalizer preprocess(LabeledImageSet& train, std::span<LabeledImageSet* const> others = {});

}  // namespace bnlab::harness
