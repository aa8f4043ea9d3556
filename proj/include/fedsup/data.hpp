#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fedsup/tensor.hpp"

// Synthetic eye-state data, the unbalanced normal-size partitioner used to
// split it across clients, and the on-disk dataset format.
namespace fedsup {

struct SyntheticBlinkSpec {
    int height = 24, width = 24;
    int num_samples = 0;
    float noise_std = 0.0f;
    int jitter_px = 0;
    std::uint64_t seed = 0;
};

struct LabeledDataset {
    std::vector<Tensor> images;  // (H,W,1), values in [0,1]
    std::vector<int> labels;
    std::vector<std::string> class_names;

    std::size_t size() const { return images.size(); }
};

inline constexpr int kClassOpen = 0;
inline constexpr int kClassClosed = 1;

// Two balanced classes (counts equal up to 1): an open eye (bright ellipse
// outline with a dark pupil disc at a jittered center) and a closed eye
// (horizontal dark lid arc, no pupil), plus clipped Gaussian pixel noise.
LabeledDataset generate_blink_dataset(const SyntheticBlinkSpec& spec);

struct PartitionSpec {
    int num_parts = 50;
    double mu = 40.0;      // expected part size
    double sigma = 3.0;    // size spread
    std::uint64_t seed = 0;
    bool sigma_is_variance = false;  // treat sigma as a variance instead
};

struct Partition {
    std::vector<std::vector<int>> parts;  // disjoint, non-empty index lists
};

// Part sizes drawn from Normal(mu, sigma^2), rounded, clamped at 1, rescaled
// proportionally if they exceed the dataset; indices dealt out consecutively
// from a seeded shuffle.
Partition partition_unbalanced(std::size_t dataset_size, const PartitionSpec& spec);
Partition partition_unbalanced(const LabeledDataset& dataset, const PartitionSpec& spec);

// File format, little-endian: magic "FSDS", version u32, sample count u32,
// H u32, W u32, C u32, class count u32; per sample label u32 + raw f32
// pixels. Corrupt input raises FormatError naming the byte offset.
void save_dataset(const LabeledDataset& dataset, const std::filesystem::path& path);
LabeledDataset load_dataset(const std::filesystem::path& path);

}  // namespace fedsup
