#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <functional>
#include <vector>

#include "macc/rng.hpp"
#include "macc/tensor.hpp"

namespace macc::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool requires_grad = false) {
    std::vector<double> v(shape_numel(shape));
    for (auto& e : v) e = rng.uniform(lo, hi);
    return Tensor(std::move(shape), std::move(v), requires_grad);
}

/// Values bounded away from zero so that ReLU kinks sit outside the
/// finite-difference stencil.
inline Tensor random_tensor_off_zero(Shape shape, Rng& rng, double margin = 0.05) {
    std::vector<double> v(shape_numel(shape));
    for (auto& e : v) {
        const double m = rng.uniform(margin, 1.0);
        e = rng.uniform() < 0.5 ? -m : m;
    }
    return Tensor(std::move(shape), std::move(v), true);
}

/// Norm-wise relative error |a - n| / max(|a|, |n|) between the tape gradient
/// of `loss` and central differences, taken over all listed tensors.
inline double gradient_error(const std::function<Tensor()>& loss, std::vector<Tensor> wrt, double h = 1e-5) {
    for (auto& t : wrt) t.zero_grad();
    loss().backward();
    double diff = 0, na = 0, nn = 0;
    for (auto& t : wrt) {
        std::vector<double> analytic(t.grad().begin(), t.grad().end());
        auto data = t.data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double orig = data[i];
            double fp, fm;
            {
                NoGradGuard guard;
                data[i] = orig + h;
                fp = loss().item();
                data[i] = orig - h;
                fm = loss().item();
            }
            data[i] = orig;
            const double numeric = (fp - fm) / (2 * h);
            diff += (analytic[i] - numeric) * (analytic[i] - numeric);
            na += analytic[i] * analytic[i];
            nn += numeric * numeric;
        }
    }
    const double scale = std::max(std::sqrt(na), std::sqrt(nn));
    return scale == 0 ? 0.0 : std::sqrt(diff) / scale;
}

/// Scalar-loop reference for sum((a - b)^2).
inline double loop_sse(std::span<const double> a, std::span<const double> b) {
    double acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc;
}

inline double loop_mse(std::span<const double> a, std::span<const double> b) {
    return loop_sse(a, b) / static_cast<double>(a.size());
}

inline double loop_bce(double p, double y) {
    p = std::clamp(p, 1e-7, 1.0 - 1e-7);
    return -(y * std::log(p) + (1 - y) * std::log(1 - p));
}

}  // namespace macc::testing
