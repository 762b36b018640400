#include "cvnn/nn/init.hpp"

#include <cmath>
#include <numbers>

#include "cvnn/errors.hpp"

namespace cvnn::nn {

CTensor he_complex_init(std::size_t fan_in, std::size_t /*fan_out*/, const Shape& shape, Rng& rng) {
  if (fan_in < 1) throw ContractError("he_complex_init: fan_in must be at least 1");
  const double sigma = std::sqrt(1.0 / static_cast<double>(fan_in));
  CTensor w(shape);
  for (auto& v : w.values()) {
    const double u = uniform01(rng);
    const double r = sigma * std::sqrt(-2.0 * std::log1p(-u));
    // Uniform on (-pi, pi].
    const double theta = std::numbers::pi - 2.0 * std::numbers::pi * uniform01(rng);
    v = std::polar(r, theta);
  }
  return w;
}

RTensor he_real_init(std::size_t fan_in, const Shape& shape, Rng& rng) {
  if (fan_in < 1) throw ContractError("he_real_init: fan_in must be at least 1");
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  RTensor w(shape);
  for (auto& v : w.values()) v = dist(rng);
  return w;
}

}  // namespace cvnn::nn
