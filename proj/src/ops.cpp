#include "macc/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "macc/error.hpp"

namespace macc::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
using Impl = detail::TensorImpl;
using ImplPtr = std::shared_ptr<Impl>;

[[noreturn]] void shape_fail(std::string_view label, const std::string& what, const Shape& a, const Shape& b) {
    throw ShapeError(std::string(label) + ": " + what + ": got " + shape_str(a) + " and " + shape_str(b));
}

void require_same(std::string_view label, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_fail(label, "shape mismatch", a.shape(), b.shape());
}

struct SpatialDims {
    std::size_t n, c, h, w;
};

SpatialDims spatial(std::string_view label, const Tensor& x) {
    if (x.rank() != 4) throw ShapeError(std::string(label) + ": expected (N, C, H, W) input, got " + shape_str(x.shape()));
    return {x.dim(0), x.dim(1), x.dim(2), x.dim(3)};
}

// Unfolds one (C, H, W) image into a (C k k) x (Ho Wo) patch matrix.
// `ld` is the row stride of the patch matrix, so several images can be
// unfolded side by side into one wide matrix.
void im2col(const double* img, std::size_t C, std::size_t H, std::size_t W, const ConvGeometry& g, std::size_t Ho,
            std::size_t Wo, double* col, std::size_t ld) {
    const auto k = g.kernel, s = g.stride;
    const auto p = static_cast<std::ptrdiff_t>(g.padding);
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t ki = 0; ki < k; ++ki) {
            for (std::size_t kj = 0; kj < k; ++kj) {
                double* row = col + ((c * k + ki) * k + kj) * ld;
                for (std::size_t oh = 0; oh < Ho; ++oh) {
                    auto ih = static_cast<std::ptrdiff_t>(oh * s + ki) - p;
                    double* dst = row + oh * Wo;
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) {
                        std::fill(dst, dst + Wo, 0.0);
                        continue;
                    }
                    const double* src = img + (c * H + static_cast<std::size_t>(ih)) * W;
                    for (std::size_t ow = 0; ow < Wo; ++ow) {
                        auto iw = static_cast<std::ptrdiff_t>(ow * s + kj) - p;
                        dst[ow] = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(W)) ? 0.0 : src[iw];
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatters patch columns back onto the (C, H, W) image.
void col2im(const double* col, std::size_t C, std::size_t H, std::size_t W, const ConvGeometry& g, std::size_t Ho,
            std::size_t Wo, double* img, std::size_t ld) {
    const auto k = g.kernel, s = g.stride;
    const auto p = static_cast<std::ptrdiff_t>(g.padding);
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t ki = 0; ki < k; ++ki) {
            for (std::size_t kj = 0; kj < k; ++kj) {
                const double* row = col + ((c * k + ki) * k + kj) * ld;
                for (std::size_t oh = 0; oh < Ho; ++oh) {
                    auto ih = static_cast<std::ptrdiff_t>(oh * s + ki) - p;
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
                    double* dst = img + (c * H + static_cast<std::size_t>(ih)) * W;
                    const double* src = row + oh * Wo;
                    for (std::size_t ow = 0; ow < Wo; ++ow) {
                        auto iw = static_cast<std::ptrdiff_t>(ow * s + kj) - p;
                        if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(W)) dst[iw] += src[ow];
                    }
                }
            }
        }
    }
}

template <class F, class G>
Tensor unary(const Tensor& x, F forward, G derivative) {
    Buffer out(x.numel());
    auto in = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward(in[i]);
    auto xi = x.impl();
    return detail::make_result(x.shape(), std::move(out), {xi}, [xi, derivative](const Impl& o) {
        auto& gx = xi->grad_buffer();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o.grad[i] * derivative(xi->data[i], o.data[i]);
    });
}

}  // namespace

std::size_t conv_out_extent(std::size_t in, const ConvGeometry& g) {
    if (g.stride == 0 || g.kernel == 0) throw ShapeError("conv: kernel and stride must be positive");
    auto padded = in + 2 * g.padding;
    if (padded < g.kernel) return 0;
    return (padded - g.kernel) / g.stride + 1;
}

std::size_t conv_transpose_out_extent(std::size_t in, const ConvGeometry& g) {
    if (g.stride == 0 || g.kernel == 0) throw ShapeError("conv_transpose: kernel and stride must be positive");
    auto full = (in - 1) * g.stride + g.kernel + g.output_padding;
    if (full <= 2 * g.padding) return 0;
    return full - 2 * g.padding;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias, std::string_view label) {
    if (x.rank() != 2 || weight.rank() != 2 || x.dim(1) != weight.dim(1)) {
        shape_fail(label, "input (B, in) does not match weight (out, in)", x.shape(), weight.shape());
    }
    const auto B = x.dim(0), in = x.dim(1), out = weight.dim(0);
    if (bias.numel() != out) shape_fail(label, "bias does not match weight rows", bias.shape(), weight.shape());

    Buffer y(B * out);
    MapMat Y(y.data(), B, out);
    Y.noalias() = ConstMapMat(x.data().data(), B, in) * ConstMapMat(weight.data().data(), out, in).transpose();
    Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data().data(), out);

    auto xi = x.impl(), wi = weight.impl(), bi = bias.impl();
    return detail::make_result({B, out}, std::move(y), {xi, wi, bi}, [xi, wi, bi, B, in, out](const Impl& o) {
        ConstMapMat dY(o.grad.data(), B, out);
        if (xi->requires_grad) {
            MapMat(xi->grad_buffer().data(), B, in).noalias() += dY * ConstMapMat(wi->data.data(), out, in);
        }
        if (wi->requires_grad) {
            MapMat(wi->grad_buffer().data(), out, in).noalias() += dY.transpose() * ConstMapMat(xi->data.data(), B, in);
        }
        if (bi->requires_grad) {
            Eigen::Map<Eigen::RowVectorXd>(bi->grad_buffer().data(), out) += dY.colwise().sum();
        }
    });
}

namespace {

// Samples per GEMM so that a K-row patch matrix stays around 1 MiB.
std::size_t samples_per_chunk(std::size_t K, std::size_t P, std::size_t N) {
    const std::size_t target_cols = std::max<std::size_t>(P, (std::size_t{1} << 17) / K);
    return std::clamp<std::size_t>(target_cols / P, 1, N);
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, const ConvGeometry& g,
              std::string_view label) {
    auto [N, C, H, W] = spatial(label, x);
    if (weight.rank() != 4 || weight.dim(1) != C || weight.dim(2) != g.kernel || weight.dim(3) != g.kernel) {
        shape_fail(label, "input channels/kernel do not match weight (O, C, k, k)", x.shape(), weight.shape());
    }
    const auto O = weight.dim(0);
    if (bias.numel() != O) shape_fail(label, "bias does not match output channels", bias.shape(), weight.shape());
    const auto Ho = conv_out_extent(H, g), Wo = conv_out_extent(W, g);
    if (Ho == 0 || Wo == 0) shape_fail(label, "kernel larger than padded input", x.shape(), weight.shape());

    // Groups of samples are unfolded side by side into one (C k k) x (G Ho Wo)
    // patch matrix so each GEMM is wide but still cache resident.
    const auto K = C * g.kernel * g.kernel, P = Ho * Wo, CHW = C * H * W;
    const auto G = samples_per_chunk(K, P, N);
    Buffer y(N * O * P);
    {
        RowMat col(K, G * P), prod(O, G * P);
        ConstMapMat Wm(weight.data().data(), O, K);
        for (std::size_t n0 = 0; n0 < N; n0 += G) {
            const auto g_n = std::min(G, N - n0), cols = g_n * P;
            for (std::size_t j = 0; j < g_n; ++j) {
                im2col(x.data().data() + (n0 + j) * CHW, C, H, W, g, Ho, Wo, col.data() + j * P, cols);
            }
            MapMat pm(prod.data(), O, cols);
            pm.noalias() = Wm * ConstMapMat(col.data(), K, cols);
            for (std::size_t j = 0; j < g_n; ++j) {
                for (std::size_t o = 0; o < O; ++o) {
                    const double bo = bias.data()[o];
                    const double* src = prod.data() + o * cols + j * P;
                    double* dst = y.data() + ((n0 + j) * O + o) * P;
                    for (std::size_t q = 0; q < P; ++q) dst[q] = src[q] + bo;
                }
            }
        }
    }

    auto xi = x.impl(), wi = weight.impl(), bi = bias.impl();
    return detail::make_result({N, O, Ho, Wo}, std::move(y), {xi, wi, bi}, [=](const Impl& o) {
        RowMat col(K, G * P), dY(O, G * P), dcol(K, G * P);
        ConstMapMat Wm(wi->data.data(), O, K);
        for (std::size_t n0 = 0; n0 < N; n0 += G) {
            const auto g_n = std::min(G, N - n0), cols = g_n * P;
            for (std::size_t j = 0; j < g_n; ++j) {
                for (std::size_t c = 0; c < O; ++c) {
                    std::copy_n(o.grad.data() + ((n0 + j) * O + c) * P, P, dY.data() + c * cols + j * P);
                }
            }
            ConstMapMat dYm(dY.data(), O, cols);
            if (wi->requires_grad) {
                for (std::size_t j = 0; j < g_n; ++j) {
                    im2col(xi->data.data() + (n0 + j) * CHW, C, H, W, g, Ho, Wo, col.data() + j * P, cols);
                }
                MapMat(wi->grad_buffer().data(), O, K).noalias() +=
                    dYm * ConstMapMat(col.data(), K, cols).transpose();
            }
            if (bi->requires_grad) {
                Eigen::Map<Eigen::VectorXd>(bi->grad_buffer().data(), O) += dYm.rowwise().sum();
            }
            if (xi->requires_grad) {
                MapMat dc(dcol.data(), K, cols);
                dc.noalias() = Wm.transpose() * dYm;
                auto& gx = xi->grad_buffer();
                for (std::size_t j = 0; j < g_n; ++j) {
                    col2im(dcol.data() + j * P, C, H, W, g, Ho, Wo, gx.data() + (n0 + j) * CHW, cols);
                }
            }
        }
    });
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& weight, const Tensor& bias, const ConvGeometry& g,
                        std::string_view label) {
    auto [N, C, H, W] = spatial(label, x);
    if (weight.rank() != 4 || weight.dim(0) != C || weight.dim(2) != g.kernel || weight.dim(3) != g.kernel) {
        shape_fail(label, "input channels/kernel do not match weight (C, O, k, k)", x.shape(), weight.shape());
    }
    if (g.output_padding >= g.stride) {
        throw ShapeError(std::string(label) + ": output_padding must be smaller than stride");
    }
    const auto O = weight.dim(1);
    if (bias.numel() != O) shape_fail(label, "bias does not match output channels", bias.shape(), weight.shape());
    const auto Ho = conv_transpose_out_extent(H, g), Wo = conv_transpose_out_extent(W, g);
    if (Ho == 0 || Wo == 0) shape_fail(label, "padding removes the whole output", x.shape(), weight.shape());

    // Adjoint of a convolution from (O, Ho, Wo) down to (C, H, W) with the
    // same geometry: GEMM into patch space, then col2im per sample.
    const auto K = O * g.kernel * g.kernel, P = H * W, Q = Ho * Wo;
    const auto G = samples_per_chunk(K, P, N);
    Buffer y(N * O * Q, 0.0);
    {
        RowMat xs(C, G * P), col(K, G * P);
        ConstMapMat Wm(weight.data().data(), C, K);
        for (std::size_t n0 = 0; n0 < N; n0 += G) {
            const auto g_n = std::min(G, N - n0), cols = g_n * P;
            for (std::size_t j = 0; j < g_n; ++j) {
                for (std::size_t c = 0; c < C; ++c) {
                    std::copy_n(x.data().data() + ((n0 + j) * C + c) * P, P, xs.data() + c * cols + j * P);
                }
            }
            MapMat cm(col.data(), K, cols);
            cm.noalias() = Wm.transpose() * ConstMapMat(xs.data(), C, cols);
            for (std::size_t j = 0; j < g_n; ++j) {
                double* out = y.data() + (n0 + j) * O * Q;
                col2im(col.data() + j * P, O, Ho, Wo, g, H, W, out, cols);
                for (std::size_t c = 0; c < O; ++c) {
                    const double bc = bias.data()[c];
                    for (std::size_t q = 0; q < Q; ++q) out[c * Q + q] += bc;
                }
            }
        }
    }

    auto xi = x.impl(), wi = weight.impl(), bi = bias.impl();
    return detail::make_result({N, O, Ho, Wo}, std::move(y), {xi, wi, bi}, [=](const Impl& o) {
        ConstMapMat Wm(wi->data.data(), C, K);
        if (xi->requires_grad || wi->requires_grad) {
            RowMat dcol(K, G * P), xs(C, G * P), dxs(C, G * P);
            for (std::size_t n0 = 0; n0 < N; n0 += G) {
                const auto g_n = std::min(G, N - n0), cols = g_n * P;
                for (std::size_t j = 0; j < g_n; ++j) {
                    im2col(o.grad.data() + (n0 + j) * O * Q, O, Ho, Wo, g, H, W, dcol.data() + j * P, cols);
                }
                ConstMapMat dc(dcol.data(), K, cols);
                if (wi->requires_grad) {
                    for (std::size_t j = 0; j < g_n; ++j) {
                        for (std::size_t c = 0; c < C; ++c) {
                            std::copy_n(xi->data.data() + ((n0 + j) * C + c) * P, P, xs.data() + c * cols + j * P);
                        }
                    }
                    MapMat(wi->grad_buffer().data(), C, K).noalias() += ConstMapMat(xs.data(), C, cols) * dc.transpose();
                }
                if (xi->requires_grad) {
                    MapMat dm(dxs.data(), C, cols);
                    dm.noalias() = Wm * dc;
                    auto& gx = xi->grad_buffer();
                    for (std::size_t j = 0; j < g_n; ++j) {
                        for (std::size_t c = 0; c < C; ++c) {
                            double* dst = gx.data() + ((n0 + j) * C + c) * P;
                            const double* src = dxs.data() + c * cols + j * P;
                            for (std::size_t q = 0; q < P; ++q) dst[q] += src[q];
                        }
                    }
                }
            }
        }
        if (bi->requires_grad) {
            auto& gb = bi->grad_buffer();
            for (std::size_t n = 0; n < N; ++n) {
                for (std::size_t c = 0; c < O; ++c) {
                    const double* src = o.grad.data() + (n * O + c) * Q;
                    double acc = 0.0;
                    for (std::size_t q = 0; q < Q; ++q) acc += src[q];
                    gb[c] += acc;
                }
            }
        }
    });
}

Tensor relu(const Tensor& x) {
    return unary(
        x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
    return unary(
        x,
        [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
        [](double, double out) { return out * (1.0 - out); });
}

Tensor tanh(const Tensor& x) {
    return unary(
        x, [](double v) { return std::tanh(v); }, [](double, double out) { return 1.0 - out * out; });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const auto& ref = parts.front().shape();
    if (axis >= ref.size()) throw ShapeError("concat: axis out of range for " + shape_str(ref));
    std::size_t outer = 1, inner = 1, total = 0;
    for (std::size_t i = 0; i < axis; ++i) outer *= ref[i];
    for (std::size_t i = axis + 1; i < ref.size(); ++i) inner *= ref[i];
    for (const auto& p : parts) {
        const auto& s = p.shape();
        bool ok = s.size() == ref.size();
        for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == ref[i];
        if (!ok) shape_fail("concat", "extents differ off the concatenation axis", ref, s);
        total += s[axis];
    }
    Shape out_shape = ref;
    out_shape[axis] = total;
    Buffer out(outer * total * inner);
    std::vector<std::shared_ptr<Impl>> inputs;
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (const auto& p : parts) {
        const auto len = p.shape()[axis] * inner;
        for (std::size_t o = 0; o < outer; ++o) {
            std::copy_n(p.data().data() + o * len, len, out.data() + o * total * inner + off);
        }
        offsets.push_back(off);
        off += len;
        inputs.push_back(p.impl());
    }
    auto captured = inputs;
    return detail::make_result(std::move(out_shape), std::move(out), std::move(inputs),
                               [captured, offsets, outer, total, inner, axis](const Impl& o) {
                                   for (std::size_t k = 0; k < captured.size(); ++k) {
                                       auto& in = *captured[k];
                                       if (!in.requires_grad) continue;
                                       const auto len = in.shape[axis] * inner;
                                       auto& g = in.grad_buffer();
                                       for (std::size_t r = 0; r < outer; ++r) {
                                           const double* src = o.grad.data() + r * total * inner + offsets[k];
                                           for (std::size_t i = 0; i < len; ++i) g[r * len + i] += src[i];
                                       }
                                   }
                               });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
    const auto& s = x.shape();
    if (axis >= s.size() || length == 0 || start + length > s[axis]) {
        throw ShapeError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") on axis " + std::to_string(axis) + " out of bounds for " + shape_str(s));
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    const auto full = s[axis] * inner, len = length * inner, off = start * inner;
    Shape out_shape = s;
    out_shape[axis] = length;
    Buffer out(outer * len);
    for (std::size_t o = 0; o < outer; ++o) std::copy_n(x.data().data() + o * full + off, len, out.data() + o * len);
    auto xi = x.impl();
    return detail::make_result(std::move(out_shape), std::move(out), {xi}, [xi, outer, full, len, off](const Impl& o) {
        auto& g = xi->grad_buffer();
        for (std::size_t r = 0; r < outer; ++r) {
            for (std::size_t i = 0; i < len; ++i) g[r * full + off + i] += o.grad[r * len + i];
        }
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) shape_fail("reshape", "element count differs", x.shape(), shape);
    Buffer out(x.data().begin(), x.data().end());
    auto xi = x.impl();
    return detail::make_result(std::move(shape), std::move(out), {xi}, [xi](const Impl& o) {
        auto& g = xi->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    });
}

Tensor flatten(const Tensor& x) { return reshape(x, {x.dim(0), x.numel() / x.dim(0)}); }

Tensor add(const Tensor& a, const Tensor& b) {
    require_same("add", a, b);
    Buffer out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    auto ai = a.impl(), bi = b.impl();
    return detail::make_result(a.shape(), std::move(out), {ai, bi}, [ai, bi](const Impl& o) {
        for (auto* t : {ai.get(), bi.get()}) {
            if (!t->requires_grad) continue;
            auto& g = t->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same("sub", a, b);
    Buffer out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    auto ai = a.impl(), bi = b.impl();
    return detail::make_result(a.shape(), std::move(out), {ai, bi}, [ai, bi](const Impl& o) {
        if (ai->requires_grad) {
            auto& g = ai->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
        }
        if (bi->requires_grad) {
            auto& g = bi->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same("mul", a, b);
    Buffer out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    auto ai = a.impl(), bi = b.impl();
    return detail::make_result(a.shape(), std::move(out), {ai, bi}, [ai, bi](const Impl& o) {
        if (ai->requires_grad) {
            auto& g = ai->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * bi->data[i];
        }
        if (bi->requires_grad) {
            auto& g = bi->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * ai->data[i];
        }
    });
}

Tensor scale(const Tensor& x, double factor) {
    Buffer out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
    auto xi = x.impl();
    return detail::make_result(x.shape(), std::move(out), {xi}, [xi, factor](const Impl& o) {
        auto& g = xi->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * factor;
    });
}

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    auto xi = x.impl();
    return detail::make_result({1}, {acc}, {xi}, [xi](const Impl& o) {
        auto& g = xi->grad_buffer();
        for (auto& v : g) v += o.grad[0];
    });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

namespace {

Tensor squared_error(const Tensor& a, const Tensor& b, double weight) {
    Buffer diff(a.numel());
    double acc = 0.0;
    for (std::size_t i = 0; i < diff.size(); ++i) {
        diff[i] = a[i] - b[i];
        acc += diff[i] * diff[i];
    }
    auto ai = a.impl(), bi = b.impl();
    return detail::make_result({1}, {acc * weight}, {ai, bi},
                               [ai, bi, diff = std::move(diff), weight](const Impl& o) {
                                   const double c = 2.0 * weight * o.grad[0];
                                   if (ai->requires_grad) {
                                       auto& g = ai->grad_buffer();
                                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * diff[i];
                                   }
                                   if (bi->requires_grad) {
                                       auto& g = bi->grad_buffer();
                                       for (std::size_t i = 0; i < g.size(); ++i) g[i] -= c * diff[i];
                                   }
                               });
}

}  // namespace

Tensor mse(const Tensor& pred, const Tensor& target) {
    require_same("mse", pred, target);
    return squared_error(pred, target, 1.0 / static_cast<double>(pred.numel()));
}

Tensor sse(const Tensor& a, const Tensor& b) {
    require_same("sse", a, b);
    return squared_error(a, b, 1.0);
}

Tensor bce(const Tensor& prob, const Tensor& labels) {
    require_same("bce", prob, labels);
    const auto n = prob.numel();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = std::clamp(prob[i], kBceClamp, 1.0 - kBceClamp);
        const double y = labels[i];
        acc -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    auto pi = prob.impl(), li = labels.impl();
    return detail::make_result({1}, {acc / static_cast<double>(n)}, {pi, li}, [pi, li, n](const Impl& o) {
        const double c = o.grad[0] / static_cast<double>(n);
        if (pi->requires_grad) {
            auto& g = pi->grad_buffer();
            for (std::size_t i = 0; i < n; ++i) {
                const double p = pi->data[i];
                if (p < kBceClamp || p > 1.0 - kBceClamp) continue;
                const double y = li->data[i];
                g[i] += c * (-y / p + (1.0 - y) / (1.0 - p));
            }
        }
        if (li->requires_grad) {
            auto& g = li->grad_buffer();
            for (std::size_t i = 0; i < n; ++i) {
                const double p = std::clamp(pi->data[i], kBceClamp, 1.0 - kBceClamp);
                g[i] += c * (std::log(1.0 - p) - std::log(p));
            }
        }
    });
}

Tensor bce(const Tensor& prob, double label) { return bce(prob, Tensor::full(prob.shape(), label)); }

}  // namespace macc::ops
