#include "cvnn/nn/activations.hpp"

#include <cmath>

namespace cvnn::nn {

namespace {
double relu_f(double x) { return x > 0.0 ? x : 0.0; }
double relu_df(double x) { return x > 0.0 ? 1.0 : 0.0; }
double id_f(double x) { return x; }
double id_df(double) { return 1.0; }
double tanh_f(double x) { return std::tanh(x); }
double tanh_df(double x) {
  const double t = std::tanh(x);
  return 1.0 - t * t;
}
double sigmoid_f(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double sigmoid_df(double x) {
  const double s = sigmoid_f(x);
  return s * (1.0 - s);
}
}  // namespace

ScalarFunction relu() { return {"relu", relu_f, relu_df}; }
ScalarFunction identity() { return {"identity", id_f, id_df}; }
ScalarFunction tanh_function() { return {"tanh", tanh_f, tanh_df}; }
ScalarFunction sigmoid() { return {"sigmoid", sigmoid_f, sigmoid_df}; }

Activation Activation::crelu() { return {Kind::type_a, relu(), relu()}; }
Activation Activation::ctanh() { return {Kind::type_a, tanh_function(), tanh_function()}; }
Activation Activation::csigmoid() { return {Kind::type_a, sigmoid(), sigmoid()}; }
Activation Activation::modulus_relu() { return {Kind::type_b, relu(), identity()}; }

Activation Activation::from_name(const std::string& name) {
  if (name == "crelu" || name == "relu") return crelu();
  if (name == "ctanh" || name == "tanh") return ctanh();
  if (name == "csigmoid" || name == "sigmoid") return csigmoid();
  if (name == "modrelu") return modulus_relu();
  throw ConfigError("unknown activation '" + name + "'");
}

std::string Activation::name() const {
  if (kind == Kind::type_b) return first.name == "relu" ? "modrelu" : "type_b_" + first.name;
  return "c" + first.name;
}

CTensor type_a(const ScalarFunction& sigma_re, const ScalarFunction& sigma_im, const CTensor& z) {
  CTensor out(z.shape());
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = cplx(sigma_re.f(z[i].real()), sigma_im.f(z[i].imag()));
  }
  return out;
}

CTensor type_b(const ScalarFunction& sigma_r, const ScalarFunction& sigma_phi, const CTensor& z) {
  CTensor out(z.shape());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double a = z[i].real(), b = z[i].imag();
    const double r = std::sqrt(a * a + b * b);
    const double rr = sigma_r.f(r);
    const double pp = sigma_phi.f(phase_of(z[i]));
    out[i] = cplx(rr * std::cos(pp), rr * std::sin(pp));
  }
  return out;
}

RTensor apply(const ScalarFunction& sigma, const RTensor& x) {
  RTensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = sigma.f(x[i]);
  return out;
}

}  // namespace cvnn::nn
