#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace macc {

/// Extents of one simulator run. The analytic model has five inputs and
/// emits n_band + 4 scalars.
struct SimShape {
    std::size_t d_in = 5;
    std::size_t n_band = 4;
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t n_sca = 8;

    std::size_t image_size() const { return n_band * height * width; }
    void validate() const;
    friend bool operator==(const SimShape&, const SimShape&) = default;
};

/// Shared latent quantities from which every output modality is derived.
struct LatentPhysics {
    double amplitude;
    double radius;
    double center_u;
    double center_v;
    double aspect;
    double yield;
};

/// One run: inputs in [0,1]^d_in, images (n_band, H, W) row-major, scalars.
struct Sample {
    std::vector<double> x;
    std::vector<double> images;
    std::vector<double> scalars;
};

/// Scalar layout: band integrals (one per band), then band-0 peak, band-0
/// centroid (u, v) and band-0 intensity-weighted RMS radius.
namespace scalar_index {
inline std::size_t peak(const SimShape& s) { return s.n_band; }
inline std::size_t centroid_u(const SimShape& s) { return s.n_band + 1; }
inline std::size_t centroid_v(const SimShape& s) { return s.n_band + 2; }
inline std::size_t radius(const SimShape& s) { return s.n_band + 3; }
}  // namespace scalar_index

double logistic(double v);

LatentPhysics latent_physics(std::span<const double> x);

/// Band attenuation exp(-0.8 k (1.2 - x1)).
double band_attenuation(std::size_t band, double x1);

/// Pure, deterministic synthetic simulator. Throws on inputs outside [0,1].
Sample simulate(std::span<const double> x, const SimShape& shape = {});

}  // namespace macc
