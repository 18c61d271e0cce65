#pragma once

#include <functional>
#include <optional>

#include "macc/dataset.hpp"
#include "macc/networks.hpp"
#include "macc/training.hpp"
#include "macc/wae.hpp"

namespace macc {

struct CyclePenalty {
    Tensor latent;  // sum over the batch of |z - F(G(D(z)))|^2
    Tensor input;   // sum over the batch of |x - G(D(F(x)))|^2
    Tensor total;
};

/// Bidirectional cycle penalty. `decoded_z` must equal D(z); passing a cached
/// copy avoids re-decoding fixed targets. Which parameters receive gradients
/// is decided by the caller through Network::set_trainable.
CyclePenalty cycle_penalty(const ForwardNet& f, const InverseNet& g, const Decoder& d, const Tensor& x,
                           const Tensor& z, const Prediction& decoded_z);
CyclePenalty cycle_penalty(const ForwardNet& f, const InverseNet& g, const Decoder& d, const Tensor& x,
                           const Tensor& z);

struct SurrogateLossTerms {
    Tensor regression;  // mse(F(x), z)
    CyclePenalty penalty;
    Tensor total;  // regression + lambda * penalty.total
};

SurrogateLossTerms surrogate_loss(const ForwardNet& f, const InverseNet& g, const Decoder& d, const Tensor& x,
                                  const Tensor& z, const Prediction& decoded_z, double lambda_cyc);

/// D(F(x)).
Prediction predict_outputs(const ForwardNet& f, const Decoder& d, const Tensor& x);

struct SurrogateConfig {
    double lambda_cyc = 0.05;
    TrainOptions train;
};

struct SurrogateResult {
    ForwardNet forward;
    /// The pseudo-inverse after co-training.
    InverseNet inverse;
    TrainingLog log;
    int best_epoch = 0;
    /// Set when a non-finite loss stopped training; the networks above are
    /// then the last good (best validated) state.
    std::optional<int> diverged_at;
};

/// Per mini-batch, one forward-surrogate update on the regularized objective
/// followed by one pseudo-inverse update on its cycle objective, starting from
/// the pretrained inverse. The WAE stays frozen; z = E(y) targets are encoded
/// once. Early stop on val latent regression MSE.
SurrogateResult train_surrogate(const Dataset& train, const Dataset& val, const WaeModel& wae,
                                const InverseNet& pretrained_inverse, const SurrogateConfig& config);

struct BaselineResult {
    BaselineNet net;
    TrainingLog log;
    int best_epoch = 0;
};

/// Direct x -> y network trained from random initialization on
/// mse(images) + gamma_s * mse(scalars).
BaselineResult train_baseline(const Dataset& train, const Dataset& val, const ArchConfig& arch, double gamma_s,
                              const TrainOptions& options);

}  // namespace macc
