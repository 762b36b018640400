#pragma once

#include <string>

#include "cvnn/ctensor.hpp"

namespace cvnn::nn {

/// A real scalar function with its derivative. Kinks use subgradient 0.
struct ScalarFunction {
  std::string name;
  double (*f)(double);
  double (*df)(double);
};

ScalarFunction relu();
ScalarFunction identity();
ScalarFunction tanh_function();
ScalarFunction sigmoid();

/// Complex activation built from two real functions.
///  Type-A: sigma_re(Re z) + i sigma_im(Im z)
///  Type-B: sigma_r(|z|) exp(i sigma_phi(arg z))
struct Activation {
  enum class Kind : unsigned char { type_a, type_b };
  Kind kind = Kind::type_a;
  ScalarFunction first;   // sigma_re or sigma_r
  ScalarFunction second;  // sigma_im or sigma_phi

  /// Type-A ReLU, the activation used by every hidden layer of the models.
  static Activation crelu();
  static Activation ctanh();
  static Activation csigmoid();
  /// Type-B with ReLU on the modulus and the identity on the phase.
  static Activation modulus_relu();
  static Activation from_name(const std::string& name);

  std::string name() const;
};

CTensor type_a(const ScalarFunction& sigma_re, const ScalarFunction& sigma_im, const CTensor& z);
CTensor type_b(const ScalarFunction& sigma_r, const ScalarFunction& sigma_phi, const CTensor& z);
RTensor apply(const ScalarFunction& sigma, const RTensor& x);

}  // namespace cvnn::nn
