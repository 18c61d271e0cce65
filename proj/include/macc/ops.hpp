#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "macc/tensor.hpp"

namespace macc::ops {

/// Spatial geometry shared by convolution and transposed convolution.
struct ConvGeometry {
    std::size_t kernel = 3;
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t output_padding = 0;  // transposed convolution only
};

/// floor((in + 2p - k) / s) + 1
std::size_t conv_out_extent(std::size_t in, const ConvGeometry& g);
/// (in - 1) s - 2p + k + output_padding
std::size_t conv_transpose_out_extent(std::size_t in, const ConvGeometry& g);

// x: (B, in), weight: (out, in), bias: (out)
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias, std::string_view label = "linear");

// x: (N, C, H, W), weight: (O, C, k, k), bias: (O)
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, const ConvGeometry& g,
              std::string_view label = "conv2d");

// x: (N, C, H, W), weight: (C, O, k, k), bias: (O)
Tensor conv_transpose2d(const Tensor& x, const Tensor& weight, const Tensor& bias, const ConvGeometry& g,
                        std::string_view label = "conv_transpose2d");

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

/// Concatenation along `axis`; all other extents must agree.
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis = 1);
/// Elements [start, start + length) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
Tensor reshape(const Tensor& x, Shape shape);
/// Keeps axis 0 and flattens the rest.
Tensor flatten(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Mean of squared differences over all elements.
Tensor mse(const Tensor& pred, const Tensor& target);
/// Sum of squared differences over all elements.
Tensor sse(const Tensor& a, const Tensor& b);

inline constexpr double kBceClamp = 1e-7;
/// Mean binary cross-entropy; probabilities are clamped to [1e-7, 1 - 1e-7].
Tensor bce(const Tensor& prob, const Tensor& labels);
Tensor bce(const Tensor& prob, double label);

}  // namespace macc::ops
