#include "macc/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "macc/error.hpp"

namespace macc {

void SimShape::validate() const {
    if (d_in != 5) throw ShapeError("simulator: d_in must be 5, got " + std::to_string(d_in));
    if (n_band == 0 || height == 0 || width == 0) throw ShapeError("simulator: image extents must be positive");
    if (n_sca != n_band + 4) {
        throw ShapeError("simulator: n_sca must be n_band + 4 = " + std::to_string(n_band + 4) + ", got " +
                         std::to_string(n_sca));
    }
}

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

LatentPhysics latent_physics(std::span<const double> x) {
    if (x.size() != 5) throw ShapeError("simulator: expected 5 inputs, got " + std::to_string(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] >= 0.0 && x[i] <= 1.0)) {
            throw Error("simulator: input x" + std::to_string(i + 1) + " = " + std::to_string(x[i]) +
                        " outside [0, 1]");
        }
    }
    LatentPhysics p{};
    p.amplitude = 0.5 + 1.5 * x[0] * x[0];
    p.radius = 0.1 + 0.3 * x[1];
    p.center_u = 0.3 + 0.4 * x[2];
    p.center_v = 0.3 + 0.4 * x[3];
    p.aspect = 0.5 + x[4];
    // Sharp sigmoid in x1*x2: an ignition-like cliff in the yield.
    p.yield = p.amplitude * (1.0 + 9.0 * logistic(20.0 * (x[0] * x[1] - 0.5)));
    return p;
}

double band_attenuation(std::size_t band, double x1) { return std::exp(-0.8 * static_cast<double>(band) * (1.2 - x1)); }

Sample simulate(std::span<const double> x, const SimShape& shape) {
    shape.validate();
    const auto phys = latent_physics(x);
    const auto H = shape.height, W = shape.width;

    Sample s;
    s.x.assign(x.begin(), x.end());
    s.images.resize(shape.image_size());

    // Band shapes differ only by a scale factor, so evaluate the profile once.
    std::vector<double> profile(H * W);
    const double inv_two_r2 = 1.0 / (2.0 * phys.radius * phys.radius);
    for (std::size_t j = 0; j < H; ++j) {
        const double v = (static_cast<double>(j) + 0.5) / static_cast<double>(H);
        for (std::size_t i = 0; i < W; ++i) {
            const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(W);
            const double du = u - phys.center_u, dv = v - phys.center_v;
            profile[j * W + i] = std::exp(-(du * du * phys.aspect + dv * dv / phys.aspect) * inv_two_r2);
        }
    }
    s.scalars.assign(shape.n_sca, 0.0);
    const double cell = 1.0 / static_cast<double>(H * W);
    for (std::size_t k = 0; k < shape.n_band; ++k) {
        const double scale = band_attenuation(k, x[0]) * phys.yield;
        double* band = s.images.data() + k * H * W;
        double total = 0.0;
        for (std::size_t q = 0; q < H * W; ++q) {
            band[q] = scale * profile[q];
            total += band[q];
        }
        s.scalars[k] = total * cell;
    }

    const double* band0 = s.images.data();
    double peak = 0.0, mass = 0.0, mu = 0.0, mv = 0.0;
    for (std::size_t j = 0; j < H; ++j) {
        const double v = (static_cast<double>(j) + 0.5) / static_cast<double>(H);
        for (std::size_t i = 0; i < W; ++i) {
            const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(W);
            const double w = band0[j * W + i];
            peak = std::max(peak, w);
            mass += w;
            mu += w * u;
            mv += w * v;
        }
    }
    mu /= mass;
    mv /= mass;
    double spread = 0.0;
    for (std::size_t j = 0; j < H; ++j) {
        const double v = (static_cast<double>(j) + 0.5) / static_cast<double>(H);
        for (std::size_t i = 0; i < W; ++i) {
            const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(W);
            spread += band0[j * W + i] * ((u - mu) * (u - mu) + (v - mv) * (v - mv));
        }
    }
    s.scalars[scalar_index::peak(shape)] = peak;
    s.scalars[scalar_index::centroid_u(shape)] = mu;
    s.scalars[scalar_index::centroid_v(shape)] = mv;
    s.scalars[scalar_index::radius(shape)] = std::sqrt(spread / mass);
    return s;
}

}  // namespace macc
