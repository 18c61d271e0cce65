#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "macc/ops.hpp"
#include "macc/rng.hpp"
#include "macc/tensor.hpp"

namespace macc {

enum class LayerKind : std::uint32_t {
    Linear = 1,
    Conv2d = 2,
    ConvTranspose2d = 3,
};

/// Serializable description of one parametric layer.
struct LayerDesc {
    LayerKind kind;
    std::vector<std::uint32_t> extents;

    friend bool operator==(const LayerDesc&, const LayerDesc&) = default;
};

std::string describe(const LayerDesc& d);

/// Parameter tensors are owned per layer; copying a layer deep-copies them.
class Linear {
public:
    Linear() = default;
    Linear(std::string name, std::size_t in, std::size_t out, Rng& rng);
    Linear(const Linear& other);
    Linear& operator=(const Linear& other);
    Linear(Linear&&) noexcept = default;
    Linear& operator=(Linear&&) noexcept = default;

    Tensor forward(const Tensor& x) const;
    LayerDesc desc() const;
    std::vector<Tensor> parameters() const { return {weight_, bias_}; }

    std::size_t in_features() const { return in_; }
    std::size_t out_features() const { return out_; }

private:
    std::string name_;
    std::size_t in_ = 0, out_ = 0;
    Tensor weight_, bias_;
};

class Conv2d {
public:
    Conv2d() = default;
    Conv2d(std::string name, std::size_t in_channels, std::size_t out_channels, ops::ConvGeometry geometry, Rng& rng);
    Conv2d(const Conv2d& other);
    Conv2d& operator=(const Conv2d& other);
    Conv2d(Conv2d&&) noexcept = default;
    Conv2d& operator=(Conv2d&&) noexcept = default;

    Tensor forward(const Tensor& x) const;
    LayerDesc desc() const;
    std::vector<Tensor> parameters() const { return {weight_, bias_}; }
    const ops::ConvGeometry& geometry() const { return geometry_; }

private:
    std::string name_;
    std::size_t in_ = 0, out_ = 0;
    ops::ConvGeometry geometry_;
    Tensor weight_, bias_;
};

class ConvTranspose2d {
public:
    ConvTranspose2d() = default;
    ConvTranspose2d(std::string name, std::size_t in_channels, std::size_t out_channels,
                    ops::ConvGeometry geometry, Rng& rng);
    ConvTranspose2d(const ConvTranspose2d& other);
    ConvTranspose2d& operator=(const ConvTranspose2d& other);
    ConvTranspose2d(ConvTranspose2d&&) noexcept = default;
    ConvTranspose2d& operator=(ConvTranspose2d&&) noexcept = default;

    Tensor forward(const Tensor& x) const;
    LayerDesc desc() const;
    std::vector<Tensor> parameters() const { return {weight_, bias_}; }

private:
    std::string name_;
    std::size_t in_ = 0, out_ = 0;
    ops::ConvGeometry geometry_;
    Tensor weight_, bias_;
};

/// Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero bias.
Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Common interface of every trainable network in the project.
class Network {
public:
    virtual ~Network() = default;
    virtual std::vector<LayerDesc> descriptors() const = 0;
    virtual std::vector<Tensor> parameters() const = 0;

    /// Toggles requires_grad on every parameter; frozen networks still pass
    /// gradients through to their inputs.
    void set_trainable(bool on) const;
    std::size_t parameter_count() const;
    /// Copies parameter values from a network with identical descriptors.
    void copy_parameters_from(const Network& other) const;
};

}  // namespace macc
