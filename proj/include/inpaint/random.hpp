#pragma once

#include <cstdint>
#include <random>

#include "inpaint/tensor.hpp"

namespace inpaint {

/// Every random draw in the library goes through one of these so that a seed
/// fully determines weights, masks and synthetic data.
using Rng = std::mt19937_64;

Tensor gaussian(Shape shape, double stddev, Rng& rng, bool requires_grad = false);
Tensor uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad = false);
/// Xavier/Glorot uniform for a fan_in × fan_out matrix.
Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng, bool requires_grad = true);

/// Derives an independent stream for a named component from a root seed.
Rng derive_rng(std::uint64_t seed, std::uint64_t stream);

}  // namespace inpaint
