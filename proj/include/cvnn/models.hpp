#pragma once

// Builders for the MLP, CNN and FCNN architectures in both domains, their
// closed-form parameter counts and the real-equivalent sizing rule.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "cvnn/nn/layers.hpp"
#include "cvnn/polsar.hpp"
#include "cvnn/random.hpp"
#include "json.hpp"

namespace cvnn::models {

enum class Family : unsigned char { mlp, cnn, fcnn };
std::string to_string(Family f);
Family family_from_string(const std::string& s);

struct ModelSpec {
  Family family = Family::cnn;
  Domain domain = Domain::complex;
  /// MLP hidden widths, CNN filter counts, or the 11 FCNN block filter
  /// counts (the last equal to `classes`).
  std::vector<std::size_t> widths;
  std::size_t input_channels = 6;  // per pixel, in the model's domain
  std::size_t patch_size = 12;
  std::size_t classes = 4;
  /// Input encoding, used to pick the twin's channel count.
  std::optional<polsar::Representation> representation;

  std::string activation = "crelu";
  double dropout = 0.5;  // MLP only
  nn::SoftmaxMode softmax = nn::SoftmaxMode::plane_wise;

  double learning_rate = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;

  bool operator==(const ModelSpec&) const = default;
};

/// Default widths: MLP (96, 180), CNN (6, 12), FCNN ladder
/// (6, 12, 24, 48, 96, 96, 48, 24, 12, 6, classes).
std::vector<std::size_t> default_widths(Family family, std::size_t classes);

/// Default architecture for the given input encoding.
ModelSpec default_spec(Family family, Domain domain, polsar::Representation rep, std::size_t classes,
                       std::size_t patch_size);

/// Throws ContractError on an unbuildable spec.
void validate(const ModelSpec& spec);

nn::Network build(const ModelSpec& spec, Rng& rng);

/// Real trainable scalars (2 per complex entry) from closed-form formulas.
std::size_t real_parameter_count(const ModelSpec& spec);
/// Complex trainable entries (0 for real specs).
std::size_t complex_parameter_count(const ModelSpec& spec);

struct RealEquivalent {
  ModelSpec spec;
  std::size_t target = 0;    // real scalars of the complex model
  std::size_t achieved = 0;  // real scalars of the returned spec
  double relative_error() const {
    return target ? std::abs(static_cast<double>(achieved) - static_cast<double>(target)) / static_cast<double>(target)
                  : 0.0;
  }
};

/// Real twin whose widths keep the complex spec's ratios and whose real
/// parameter count is nearest to the complex spec's real-scalar count. The
/// first width is searched over [1, 8192]; the others are scaled and rounded.
RealEquivalent real_equivalent(const ModelSpec& complex_spec);

nlohmann::json to_json(const ModelSpec& spec);
/// Fields missing from `j` keep the values of `base`.
ModelSpec spec_from_json(const nlohmann::json& j, ModelSpec base);

}  // namespace cvnn::models
