#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "macc/rng.hpp"

namespace macc {

/// Latin hypercube design: n points in [0,1)^d, row-major (n x d). In every
/// column, floor(value * n) is a permutation of 0..n-1.
std::vector<double> lhs_sample(std::size_t n, std::size_t d, Rng& rng);
std::vector<double> lhs_sample(std::size_t n, std::size_t d, std::uint64_t seed);

}  // namespace macc
