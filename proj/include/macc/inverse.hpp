#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "macc/dataset.hpp"
#include "macc/networks.hpp"
#include "macc/training.hpp"

namespace macc {

struct InverseResult {
    InverseNet net;
    TrainingLog log;
    int best_epoch = 0;
};

/// Regresses x from real normalized outputs with MSE; early stop on val MSE.
InverseResult pretrain_inverse(const Dataset& train, const Dataset& val, const ArchConfig& arch,
                               const TrainOptions& options);

/// Val MSE of G(y) against x, no tape.
double inverse_mse(const InverseNet& g, const Dataset& ds);

/// All predictions G(y) for a normalized dataset, (N x d_in) row-major.
std::vector<double> inverse_predict_dataset(const InverseNet& g, const Dataset& ds);

struct InverseLossTerms {
    Tensor regression;  // mse(G(D(z)), x)
    Tensor cycle;       // sum over the batch of |z - F(G(D(z)))|^2
    Tensor total;       // regression + lambda * cycle
};

/// Pseudo-inverse objective on decoded outputs D(z). F and D should be frozen
/// by the caller so that only G accumulates gradients.
InverseLossTerms inverse_loss(const InverseNet& g, const ForwardNet& f, const Prediction& decoded, const Tensor& z,
                              const Tensor& x, double lambda_cyc);
InverseLossTerms inverse_loss(const InverseNet& g, const ForwardNet& f, const Decoder& d, const Tensor& z,
                              const Tensor& x, double lambda_cyc);

/// First round(fraction * n) entries of a seeded permutation, sorted.
std::vector<std::size_t> bootstrap_subset(std::size_t n, double fraction, std::uint64_t seed);

struct EnsembleMember {
    InverseNet net;
    std::uint64_t seed = 0;
    double fraction = 1.0;
    std::size_t subset_size = 0;
    TrainingLog log;
};

struct InverseEnsemble {
    std::vector<EnsembleMember> members;
};

/// Member i trains on bootstrap_subset(n, fraction, seeds[i]) with
/// options.seed = seeds[i]. Members are independent and may run on up to
/// `threads` worker threads.
InverseEnsemble bootstrap_inverses(const Dataset& train, const Dataset& val, const ArchConfig& arch,
                                   const TrainOptions& options, double fraction,
                                   const std::vector<std::uint64_t>& seeds, unsigned threads = 1);

struct ManifestRecord {
    std::size_t member = 0;
    std::string checkpoint;
    std::uint64_t seed = 0;
    double fraction = 1.0;
    std::size_t subset_size = 0;
};

/// Plain text, one "key=value ..." record per line.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);

}  // namespace macc
