#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qfusion/tensor.hpp"

namespace qfusion::data {

/// Raised on malformed or incomplete data archives.
struct LoadError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One split of 28x28 grayscale images, pixels normalized into [-1,1],
/// binary labels (0 = malignant, 1 = benign under the standard coding).
struct SplitDataset {
    std::string name;
    std::size_t count = 0;
    std::vector<double> images;  // count * 1 * 28 * 28, row-major
    std::vector<int> labels;

    /// [B,1,28,28] tensor for the given sample indices.
    Tensor batch_images(const std::vector<std::size_t>& indices) const;
    std::vector<int> batch_labels(const std::vector<std::size_t>& indices) const;
};

struct Dataset {
    SplitDataset train, val, test;
};

/// v -> v/127.5 - 1, mapping 0..255 onto [-1, 1].
double normalize_pixel(std::uint8_t v);

/// Loads a ZIP of NPY v1.0 members {train,val,test}_images.npy (uint8
/// Nx28x28) and {train,val,test}_labels.npy (uint8 Nx1 or N). An optional
/// flag swaps the 0/1 label coding for differently-coded archives.
Dataset load_archive(const std::string& path, bool swap_labels = false);

/// Deterministic batch index lists. The train split is shuffled by a
/// xoshiro256** generator seeded from (seed, epoch) via splitmix64; the
/// permutation is a pure function of those two values. The last partial
/// batch is kept. Pass shuffle=false for val/test (fixed order).
std::vector<std::vector<std::size_t>> make_batches(std::size_t count,
                                                   std::size_t batch_size,
                                                   std::uint64_t seed,
                                                   std::uint64_t epoch,
                                                   bool shuffle);

/// Writes a small synthetic archive in the real format: class-separable
/// noise images (dark = class 0, bright = class 1) with balanced labels.
void write_synthetic_archive(const std::string& path, std::size_t n_train,
                             std::size_t n_val, std::size_t n_test,
                             std::uint64_t seed);

}  // namespace qfusion::data
