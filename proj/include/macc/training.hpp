#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "macc/adam.hpp"

namespace macc {

/// Loop settings shared by every trainer.
struct TrainOptions {
    int epochs = 200;
    /// Epochs without validation improvement before stopping; 0 disables.
    int patience = 30;
    std::size_t batch_size = 128;
    AdamConfig adam;
    std::uint64_t seed = 0;
};

/// Per-epoch table of named numeric columns. The last column is always
/// "seconds" (wall time since the start of training).
struct TrainingLog {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    explicit TrainingLog(std::vector<std::string> value_columns = {});
    void add(std::vector<double> values, double seconds);
    double value(std::size_t row, const std::string& column) const;
    std::vector<double> column(const std::string& column) const;
    /// Equality ignoring the wall-time column.
    bool same_values(const TrainingLog& other) const;
    void write_csv(const std::filesystem::path& path) const;
};

/// Splits a permutation into consecutive mini-batches (last one may be short).
std::vector<std::span<const std::size_t>> make_batches(std::span<const std::size_t> order, std::size_t batch_size);

/// Tracks the best validation score for early stopping.
class EarlyStopper {
public:
    explicit EarlyStopper(int patience) : patience_(patience) {}
    /// Returns true when the score improved.
    bool update(double score, int epoch);
    bool should_stop(int epoch) const { return patience_ > 0 && epoch - best_epoch_ >= patience_; }
    double best_score() const { return best_; }
    int best_epoch() const { return best_epoch_; }

private:
    int patience_;
    double best_ = 0.0;
    int best_epoch_ = -1;
    bool any_ = false;
};

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

/// Formats a double so that it round-trips exactly.
std::string format_double(double v);

}  // namespace macc
