#include "cvnn/nn/optim.hpp"

#include <cmath>

namespace cvnn::nn {

Adam::Adam(std::vector<Parameter*> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (Parameter* p : params_) {
    m_.push_back(Value::zeros(p->domain(), p->shape()));
    v_.push_back(Value::zeros(p->domain(), p->shape()));
  }
}

void Adam::step() {
  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2, eps = options_.epsilon, lr = options_.learning_rate;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  auto update = [&](double& p, double& m, double& v, double g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    p -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
  };
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    if (p.domain() == Domain::real) {
      auto& pv = p.value().real();
      const auto& g = p.grad().real();
      auto& m = m_[k].real();
      auto& v = v_[k].real();
      for (std::size_t i = 0; i < pv.size(); ++i) update(pv[i], m[i], v[i], g[i]);
    } else {
      // std::complex<double> is layout-compatible with double[2].
      auto* pv = reinterpret_cast<double*>(p.value().complex().data());
      const auto* g = reinterpret_cast<const double*>(p.grad().complex().data());
      auto* m = reinterpret_cast<double*>(m_[k].complex().data());
      auto* v = reinterpret_cast<double*>(v_[k].complex().data());
      const std::size_t n = 2 * p.value().size();
      for (std::size_t i = 0; i < n; ++i) update(pv[i], m[i], v[i], g[i]);
    }
  }
}

}  // namespace cvnn::nn
