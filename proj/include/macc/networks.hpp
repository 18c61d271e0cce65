#pragma once

#include <cstddef>
#include <vector>

#include "macc/layers.hpp"
#include "macc/simulator.hpp"

namespace macc {

/// Extents every network is built from.
struct ArchConfig {
    SimShape shape;
    std::size_t latent_dim = 32;

    /// Image extents must survive four stride-2 halvings.
    void validate() const;
};

/// Decoded (or predicted) outputs: images (B, n_band, H, W), scalars (B, n_sca).
struct Prediction {
    Tensor images;
    Tensor scalars;
};

/// Two-branch encoder: 3 stride-2 convolutions over the image stack and a
/// two-layer scalar MLP, concatenated and mapped to the latent code by a
/// fully-connected layer with tanh (z in [-1, 1]^L).
class Encoder : public Network {
public:
    Encoder(const ArchConfig& arch, Rng& rng);
    Tensor forward(const Tensor& images, const Tensor& scalars) const;
    std::vector<LayerDesc> descriptors() const override;
    std::vector<Tensor> parameters() const override;

private:
    ArchConfig arch_;
    Conv2d c1_, c2_, c3_;
    Linear s1_, s2_, merge_;
};

/// Mirror of the encoder: fully-connected expansion, then three transposed
/// convolutions ending in a sigmoid, and a linear scalar head.
class Decoder : public Network {
public:
    Decoder(const ArchConfig& arch, Rng& rng);
    Prediction forward(const Tensor& z) const;
    std::vector<LayerDesc> descriptors() const override;
    std::vector<Tensor> parameters() const override;

private:
    ArchConfig arch_;
    std::size_t bottom_h_, bottom_w_, flat_;
    Linear expand_;
    ConvTranspose2d t1_, t2_, t3_;
    Linear s1_, s2_;
};

/// L -> 64 -> 64 -> 1 with ReLU and a sigmoid output.
class Discriminator : public Network {
public:
    Discriminator(const ArchConfig& arch, Rng& rng);
    Tensor forward(const Tensor& z) const;
    std::vector<LayerDesc> descriptors() const override;
    std::vector<Tensor> parameters() const override;

private:
    Linear l1_, l2_, l3_;
};

/// Pseudo-inverse: 4 stride-2 convolutions and a scalar branch, merged by
/// concatenation, then 4 fully-connected layers to d_in sigmoid outputs.
class InverseNet : public Network {
public:
    InverseNet(const ArchConfig& arch, Rng& rng);
    Tensor forward(const Tensor& images, const Tensor& scalars) const;
    Tensor forward(const Prediction& y) const { return forward(y.images, y.scalars); }
    std::vector<LayerDesc> descriptors() const override;
    std::vector<Tensor> parameters() const override;

private:
    Conv2d c1_, c2_, c3_, c4_;
    Linear s1_;
    Linear f1_, f2_, f3_, f4_;
};

/// Forward surrogate X -> Z: d_in -> 128 -> 256 -> 256 -> L, ReLU, tanh output.
class ForwardNet : public Network {
public:
    ForwardNet(const ArchConfig& arch, Rng& rng);
    Tensor forward(const Tensor& x) const;
    std::vector<LayerDesc> descriptors() const override;
    std::vector<Tensor> parameters() const override;

private:
    Linear l1_, l2_, l3_, l4_;
};

/// Conventional x -> y network with the exact layer stack of the surrogate
/// path (forward stack followed by a decoder-shaped head), trained end to end.
class BaselineNet : public Network {
public:
    BaselineNet(const ArchConfig& arch, Rng& rng);
    Prediction forward(const Tensor& x) const;
    std::vector<LayerDesc> descriptors() const override;
    std::vector<Tensor> parameters() const override;

private:
    ForwardNet trunk_;
    Decoder head_;
};

}  // namespace macc
