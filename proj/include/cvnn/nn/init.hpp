#pragma once

#include <cstddef>

#include "cvnn/ctensor.hpp"
#include "cvnn/random.hpp"

namespace cvnn::nn {

/// He initialization adapted to complex weights: Rayleigh magnitudes with
/// scale sqrt(1 / fan_in) and uniform phases, so E|w|^2 = 2 / fan_in.
CTensor he_complex_init(std::size_t fan_in, std::size_t fan_out, const Shape& shape, Rng& rng);

/// He normal initialization for real weights, variance 2 / fan_in.
RTensor he_real_init(std::size_t fan_in, const Shape& shape, Rng& rng);

}  // namespace cvnn::nn
