#pragma once

#include <cstdint>
#include <vector>

#include "macc/adam.hpp"
#include "macc/dataset.hpp"
#include "macc/networks.hpp"
#include "macc/training.hpp"

namespace macc {

struct WaeConfig {
    double gamma_s = 1e2;
    double gamma_a = 1e-3;
    TrainOptions train;
};

/// Encoder, decoder and latent discriminator trained together.
struct WaeModel {
    ArchConfig arch;
    Encoder encoder;
    Decoder decoder;
    Discriminator discriminator;

    WaeModel(const ArchConfig& arch, std::uint64_t seed);
    WaeModel(const ArchConfig& arch, Encoder encoder, Decoder decoder, Discriminator discriminator);

    Tensor encode(const Tensor& images, const Tensor& scalars) const { return encoder.forward(images, scalars); }
    Prediction decode(const Tensor& z) const { return decoder.forward(z); }
    std::vector<const Network*> networks() const { return {&encoder, &decoder, &discriminator}; }
};

struct WaeLossTerms {
    Tensor image;        // mean squared image residual
    Tensor scalar;       // mean squared scalar residual
    Tensor adversarial;  // -log Disc(E(y)), non-saturating generator form
    Tensor total;        // image + gamma_s * scalar + gamma_a * adversarial
};

WaeLossTerms wae_loss(const WaeModel& model, const Batch& batch, double gamma_s, double gamma_a);

/// Draws B latent codes uniform on [-1, 1]^L.
Tensor sample_prior(std::size_t batch, std::size_t latent_dim, Rng& rng);

/// Cross-entropy of the discriminator with prior codes labelled 1 and
/// encoded codes labelled 0 (mean over both halves).
Tensor discriminator_loss(const WaeModel& model, const Tensor& prior, const Tensor& encoded);

/// One Adam update of the discriminator on a mini-batch; the encoder is
/// evaluated without recording. Returns the pre-update loss.
double discriminator_step(WaeModel& model, Adam& optimizer, const Batch& batch, Rng& rng);

struct WaeEvaluation {
    double image_mse = 0;
    double scalar_mse = 0;
    double adversarial = 0;
    double total = 0;
};

/// Reconstruction metrics over a normalized dataset, chunked, no tape.
WaeEvaluation evaluate_wae(const WaeModel& model, const Dataset& ds, double gamma_s, double gamma_a);

/// Encoded latents for every row of a normalized dataset, (N x L) row-major.
std::vector<double> encode_dataset(const WaeModel& model, const Dataset& ds);

/// Median over latent dimensions of the Kolmogorov-Smirnov statistic between
/// the empirical marginal and U[-1, 1].
double latent_ks_median(const std::vector<double>& latents, std::size_t latent_dim);

struct WaeResult {
    WaeModel model;
    TrainingLog log;
    int best_epoch = 0;
    int epochs_run = 0;
};

/// Alternating discriminator / autoencoder updates per mini-batch with early
/// stopping on val image MSE + gamma_s * scalar MSE. Row 0 of the log scores
/// the untrained model. Throws DivergenceError on a non-finite loss.
WaeResult train_autoencoder(const Dataset& train, const Dataset& val, const ArchConfig& arch,
                            const WaeConfig& config);

}  // namespace macc
