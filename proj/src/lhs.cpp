#include "macc/lhs.hpp"

#include <cmath>

#include "macc/error.hpp"

namespace macc {

std::vector<double> lhs_sample(std::size_t n, std::size_t d, Rng& rng) {
    if (n == 0) throw Error("lhs_sample: n must be at least 1");
    if (d == 0) throw Error("lhs_sample: d must be at least 1");
    std::vector<double> design(n * d);
    const auto fn = static_cast<double>(n);
    for (std::size_t j = 0; j < d; ++j) {
        const auto bins = rng.permutation(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto bin = static_cast<double>(bins[i]);
            double v = (bin + rng.uniform()) / fn;
            // Rounding can push a point onto the next bin edge; pull it back
            // so the stratification holds exactly in floating point.
            while (std::floor(v * fn) > bin) v = std::nextafter(v, 0.0);
            while (std::floor(v * fn) < bin) v = std::nextafter(v, 1.0);
            design[i * d + j] = v;
        }
    }
    return design;
}

std::vector<double> lhs_sample(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    return lhs_sample(n, d, rng);
}

}  // namespace macc
