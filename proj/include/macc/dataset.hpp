#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "macc/simulator.hpp"
#include "macc/tensor.hpp"

namespace macc {

inline constexpr double kStdClamp = 1e-8;

/// Normalization record computed from the train split: scalars are z-scored,
/// images are divided by the global train image max.
struct NormStats {
    std::vector<double> scalar_mean;
    std::vector<double> scalar_std;
    double image_max = 1.0;
    /// Columns whose std fell below kStdClamp and was clamped.
    std::vector<bool> clamped;

    friend bool operator==(const NormStats&, const NormStats&) = default;
};

enum class Split { Train, Val };

/// A collection of samples stored column-contiguously per modality.
struct Dataset {
    SimShape shape;
    std::size_t size = 0;
    std::vector<double> x;        // size * d_in
    std::vector<double> images;   // size * n_band * H * W
    std::vector<double> scalars;  // size * n_sca
    NormStats stats;
    Split split = Split::Train;
    bool normalized = false;

    Sample sample(std::size_t i) const;
    void append(const Sample& s);
    std::span<const double> x_row(std::size_t i) const { return {x.data() + i * shape.d_in, shape.d_in}; }
    /// Copy restricted to the given rows, in the given order.
    Dataset subset(std::span<const std::size_t> rows) const;
};

struct DatasetPair {
    Dataset train;
    Dataset val;
    std::uint64_t seed = 0;
};

NormStats compute_stats(const Dataset& train);

Sample normalize(const Sample& s, const NormStats& stats);
Sample denormalize(const Sample& s, const NormStats& stats);
/// Applies normalize() to every sample of a raw dataset.
Dataset normalized(const Dataset& raw);

/// LHS design of n_train + n_val points, simulated, shuffled with the seed;
/// the last n_val shuffled rows form the validation split.
DatasetPair generate_dataset(std::size_t n_train, std::size_t n_val, std::uint64_t seed, const SimShape& shape = {});

/// Binary little-endian file, magic "MACCDS01". Stores raw (unnormalized)
/// samples plus the train normalization record.
void save_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& path, Split split);

/// Mini-batch gathered from a dataset: x (B, d_in), images (B, n_band, H, W),
/// scalars (B, n_sca).
struct Batch {
    Tensor x;
    Tensor images;
    Tensor scalars;
    std::size_t size() const { return x.dim(0); }
};

Batch gather(const Dataset& ds, std::span<const std::size_t> rows);
Batch gather_all(const Dataset& ds);
/// Rows [begin, end) as a batch.
Batch gather_range(const Dataset& ds, std::size_t begin, std::size_t end);

/// Gathers the same rows out of a row-major (size x width) buffer.
Tensor gather_rows(std::span<const double> table, std::size_t width, std::span<const std::size_t> rows,
                   Shape row_shape);

}  // namespace macc
