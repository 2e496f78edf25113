#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hyperquant/tensor.hpp"

namespace hq {

// Immutable classification dataset. Features live in [0,1]; synthetic
// generators render each 2-d sample as a 1x8x8 intensity bump so the same
// data feeds both dense and convolutional targets.
struct Dataset {
    TensorPtr features;  // [n, c, h, w]
    std::vector<int> labels;
    int classes = 0;
    std::vector<int> train_idx, val_idx, test_idx;

    int count() const { return features ? features->dim(0) : 0; }
    std::vector<int> sample_shape() const;
};

enum class SyntheticKind { blobs, spirals };
SyntheticKind synthetic_kind_from(const std::string& name);

// Deterministic per seed. Blobs are Gaussian clusters around per-class
// centroids (linearly separable at low noise); spirals are interleaved arms.
// Throws input_error for n < classes or negative noise.
Dataset make_synthetic(SyntheticKind kind, int n, int classes, float noise, uint64_t seed);

// Assigns disjoint train/val/test index sets covering [0,n) from a seeded
// shuffle. Fractions must be positive and sum to at most 1; the remainder
// goes to test.
void split_dataset(Dataset& ds, double train_frac, double val_frac, uint64_t seed);

// IDX binary container (big-endian dims, magic 0x803 for images and 0x801
// for labels). Pixels are scaled to [0,1]. Malformed files throw format_error
// with the offending byte offset.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
void write_idx(const std::string& images_path, const std::string& labels_path, int count, int rows, int cols,
               const std::vector<uint8_t>& pixels, const std::vector<uint8_t>& labels);

// Gathers the given sample indices into a contiguous batch.
TensorPtr gather_features(const Dataset& ds, const std::vector<int>& idx);
std::vector<int> gather_labels(const Dataset& ds, const std::vector<int>& idx);

}  // namespace hq
