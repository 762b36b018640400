#include <cmath>

#include "cvnn/nn/ops.hpp"

namespace cvnn::nn {

BNState::BNState(Domain d, std::size_t c)
    : domain(d), channels(c), running_mean({c}), running_cov({c, 3}) {
  for (std::size_t i = 0; i < c; ++i) {
    running_cov(i, 0) = 1.0;
    running_cov(i, 2) = 1.0;
  }
}

std::array<double, 3> inverse_sqrt_2x2(double a, double b, double c) {
  const double s = std::sqrt(a * c - b * b);
  const double t = std::sqrt(a + c + 2.0 * s);
  const double p = s * t;
  return {(c + s) / p, -b / p, (a + s) / p};
}

namespace {

struct ChannelStats {
  std::vector<cplx> mean;
  std::vector<std::array<double, 3>> cov;  // biased, without epsilon
};

std::size_t channel_count(const Shape& s) {
  if (s.empty()) throw DimensionError("batch norm needs a channel axis");
  return s.back();
}

ChannelStats batch_stats(const CTensor& x, std::size_t channels) {
  const std::size_t m = x.size() / channels;
  ChannelStats st{std::vector<cplx>(channels), std::vector<std::array<double, 3>>(channels, {0, 0, 0})};
  for (std::size_t i = 0; i < x.size(); ++i) st.mean[i % channels] += x[i];
  for (auto& mu : st.mean) mu /= static_cast<double>(m);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const cplx d = x[i] - st.mean[i % channels];
    auto& v = st.cov[i % channels];
    v[0] += d.real() * d.real();
    v[1] += d.real() * d.imag();
    v[2] += d.imag() * d.imag();
  }
  for (auto& v : st.cov)
    for (double& e : v) e /= static_cast<double>(m);
  return st;
}

void check_training_batch(std::size_t m) {
  if (m < 2) throw ContractError("batch norm in training mode needs at least 2 samples per channel");
}

void update_running(BNState& state, const ChannelStats& st) {
  const double mom = state.momentum;
  for (std::size_t c = 0; c < state.channels; ++c) {
    state.running_mean[c] = mom * state.running_mean[c] + (1.0 - mom) * st.mean[c];
    for (std::size_t k = 0; k < 3; ++k) {
      state.running_cov(c, k) = mom * state.running_cov(c, k) + (1.0 - mom) * st.cov[c][k];
    }
  }
}

void check_state(const BNState& state, std::size_t channels, Domain d) {
  if (state.channels != channels || state.domain != d) {
    throw ContractError("batch norm state has " + std::to_string(state.channels) + " " + to_string(state.domain) +
                        " channels, input has " + std::to_string(channels) + " " + to_string(d));
  }
}

// Partial derivatives of (w11, w12, w22) = inverse_sqrt_2x2(a, b, c) with
// respect to a, b and c. Row k holds d w_k / d(a, b, c).
std::array<std::array<double, 3>, 3> inverse_sqrt_2x2_jacobian(double a, double b, double c) {
  const double s = std::sqrt(a * c - b * b);
  const double t = std::sqrt(a + c + 2.0 * s);
  const double p = s * t;
  const std::array<double, 3> ds{c / (2.0 * s), -b / s, a / (2.0 * s)};
  const std::array<double, 3> dsum{1.0, 0.0, 1.0};  // d(a + c)
  std::array<double, 3> dp{};
  for (int k = 0; k < 3; ++k) {
    const double dt = (dsum[k] + 2.0 * ds[k]) / (2.0 * t);
    dp[k] = ds[k] * t + s * dt;
  }
  const double w11 = (c + s) / p, w12 = -b / p, w22 = (a + s) / p;
  const std::array<double, 3> da{1.0, 0.0, 0.0}, db{0.0, 1.0, 0.0}, dc{0.0, 0.0, 1.0};
  std::array<std::array<double, 3>, 3> j{};
  for (int k = 0; k < 3; ++k) {
    j[0][k] = (dc[k] + ds[k]) / p - w11 * dp[k] / p;
    j[1][k] = -db[k] / p - w12 * dp[k] / p;
    j[2][k] = (da[k] + ds[k]) / p - w22 * dp[k] / p;
  }
  return j;
}

}  // namespace

CTensor complex_whiten(const CTensor& x, BNState& state, bool training) {
  const std::size_t channels = channel_count(x.shape());
  check_state(state, channels, Domain::complex);
  const std::size_t m = x.size() / channels;
  std::vector<cplx> mean(channels);
  std::vector<std::array<double, 3>> w(channels);
  if (training) {
    check_training_batch(m);
    const ChannelStats st = batch_stats(x, channels);
    for (std::size_t c = 0; c < channels; ++c) {
      mean[c] = st.mean[c];
      w[c] = inverse_sqrt_2x2(st.cov[c][0] + state.epsilon, st.cov[c][1], st.cov[c][2] + state.epsilon);
    }
    update_running(state, st);
  } else {
    for (std::size_t c = 0; c < channels; ++c) {
      mean[c] = state.running_mean[c];
      w[c] = inverse_sqrt_2x2(state.running_cov(c, 0) + state.epsilon, state.running_cov(c, 1),
                              state.running_cov(c, 2) + state.epsilon);
    }
  }
  CTensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t c = i % channels;
    const cplx d = x[i] - mean[c];
    out[i] = cplx(w[c][0] * d.real() + w[c][1] * d.imag(), w[c][1] * d.real() + w[c][2] * d.imag());
  }
  return out;
}

namespace {

Var whiten_complex(Var x, BNState& state, bool training) {
  const CTensor& xv = x.value().complex();
  const std::size_t channels = channel_count(xv.shape());
  check_state(state, channels, Domain::complex);
  const std::size_t m = xv.size() / channels;

  if (!training) {
    CTensor y = complex_whiten(xv, state, false);
    std::vector<std::array<double, 3>> w(channels);
    for (std::size_t c = 0; c < channels; ++c) {
      w[c] = inverse_sqrt_2x2(state.running_cov(c, 0) + state.epsilon, state.running_cov(c, 1),
                              state.running_cov(c, 2) + state.epsilon);
    }
    return x.tape().record(Value(std::move(y)), {x}, [x, w, channels](Tape& t, const Value& g) {
      const auto& gy = g.complex();
      auto& gx = t.grad_buffer<cplx>(x);
      for (std::size_t i = 0; i < gy.size(); ++i) {
        const auto& wc = w[i % channels];
        gx[i] += cplx(wc[0] * gy[i].real() + wc[1] * gy[i].imag(), wc[1] * gy[i].real() + wc[2] * gy[i].imag());
      }
    });
  }

  check_training_batch(m);
  const ChannelStats st = batch_stats(xv, channels);
  const double eps = state.epsilon;
  std::vector<std::array<double, 3>> w(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    w[c] = inverse_sqrt_2x2(st.cov[c][0] + eps, st.cov[c][1], st.cov[c][2] + eps);
  }
  update_running(state, st);
  CTensor y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const std::size_t c = i % channels;
    const cplx d = xv[i] - st.mean[c];
    y[i] = cplx(w[c][0] * d.real() + w[c][1] * d.imag(), w[c][1] * d.real() + w[c][2] * d.imag());
  }
  return x.tape().record(Value(std::move(y)), {x}, [x, st, w, eps, channels, m](Tape& t, const Value& g) {
    const auto& xv = x.value().complex();
    const auto& gy = g.complex();
    const double inv_m = 1.0 / static_cast<double>(m);
    // d loss / d (w11, w12, w22) per channel.
    std::vector<std::array<double, 3>> gw(channels, {0, 0, 0});
    CTensor gd(xv.shape());  // gradient with respect to the centered input
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const std::size_t c = i % channels;
      const cplx d = xv[i] - st.mean[c];
      const double hr = gy[i].real(), hi = gy[i].imag();
      gw[c][0] += hr * d.real();
      gw[c][1] += hr * d.imag() + hi * d.real();
      gw[c][2] += hi * d.imag();
      gd[i] = cplx(w[c][0] * hr + w[c][1] * hi, w[c][1] * hr + w[c][2] * hi);
    }
    std::vector<std::array<double, 3>> gcov(channels);  // d loss / d (a, b, c)
    for (std::size_t c = 0; c < channels; ++c) {
      const auto j = inverse_sqrt_2x2_jacobian(st.cov[c][0] + eps, st.cov[c][1], st.cov[c][2] + eps);
      for (int k = 0; k < 3; ++k) gcov[c][k] = gw[c][0] * j[0][k] + gw[c][1] * j[1][k] + gw[c][2] * j[2][k];
    }
    std::vector<cplx> gmean(channels);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const std::size_t c = i % channels;
      const cplx d = xv[i] - st.mean[c];
      const double gr = gd[i].real() + (2.0 * gcov[c][0] * d.real() + gcov[c][1] * d.imag()) * inv_m;
      const double gi = gd[i].imag() + (2.0 * gcov[c][2] * d.imag() + gcov[c][1] * d.real()) * inv_m;
      gd[i] = cplx(gr, gi);
      gmean[c] += gd[i];
    }
    auto& gx = t.grad_buffer<cplx>(x);
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += gd[i] - gmean[i % channels] * inv_m;
  });
}

Var whiten_real(Var x, BNState& state, bool training) {
  const RTensor& xv = x.value().real();
  const std::size_t channels = channel_count(xv.shape());
  check_state(state, channels, Domain::real);
  const std::size_t m = xv.size() / channels;
  std::vector<double> mean(channels), inv_sd(channels);
  if (training) {
    check_training_batch(m);
    std::vector<double> var(channels);
    for (std::size_t i = 0; i < xv.size(); ++i) mean[i % channels] += xv[i];
    for (double& v : mean) v /= static_cast<double>(m);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double d = xv[i] - mean[i % channels];
      var[i % channels] += d * d;
    }
    for (std::size_t c = 0; c < channels; ++c) {
      var[c] /= static_cast<double>(m);
      inv_sd[c] = 1.0 / std::sqrt(var[c] + state.epsilon);
      state.running_mean[c] = state.momentum * state.running_mean[c] + (1.0 - state.momentum) * mean[c];
      state.running_cov(c, 0) = state.momentum * state.running_cov(c, 0) + (1.0 - state.momentum) * var[c];
    }
  } else {
    for (std::size_t c = 0; c < channels; ++c) {
      mean[c] = state.running_mean[c].real();
      inv_sd[c] = 1.0 / std::sqrt(state.running_cov(c, 0) + state.epsilon);
    }
  }
  RTensor y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = (xv[i] - mean[i % channels]) * inv_sd[i % channels];
  auto yhat = std::make_shared<const RTensor>(y);
  return x.tape().record(Value(std::move(y)), {x}, [x, yhat, inv_sd, channels, m, training](Tape& t, const Value& g) {
    const auto& gy = g.real();
    auto& gx = t.grad_buffer<double>(x);
    if (!training) {
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * inv_sd[i % channels];
      return;
    }
    std::vector<double> mg(channels), mgy(channels);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      mg[i % channels] += gy[i];
      mgy[i % channels] += gy[i] * (*yhat)[i];
    }
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      const std::size_t c = i % channels;
      gx[i] += inv_sd[c] * (gy[i] - mg[c] * inv_m - (*yhat)[i] * mgy[c] * inv_m);
    }
  });
}

}  // namespace

Var whiten(Var x, BNState& state, bool training) {
  return x.domain() == Domain::complex ? whiten_complex(x, state, training) : whiten_real(x, state, training);
}

Var batch_norm(Var x, Var shift, Var scale, BNState& state, bool training) {
  Var xhat = whiten(x, state, training);
  const std::size_t channels = state.channels;
  Tape& tape = x.tape();
  if (x.domain() == Domain::real) {
    const RTensor& h = xhat.value().real();
    const RTensor& gamma = scale.value().real();
    const RTensor& beta = shift.value().real();
    if (gamma.shape() != Shape{channels} || beta.shape() != Shape{channels}) {
      throw DimensionError("real batch norm affine parameters must have shape [" + std::to_string(channels) + "]");
    }
    RTensor y(h.shape());
    for (std::size_t i = 0; i < h.size(); ++i) y[i] = gamma[i % channels] * h[i] + beta[i % channels];
    return tape.record(Value(std::move(y)), {xhat, shift, scale}, [xhat, shift, scale, channels](Tape& t, const Value& g) {
      const auto& gy = g.real();
      const auto& hv = xhat.value().real();
      const auto& gamma = scale.value().real();
      if (xhat.requires_grad()) {
        auto& gh = t.grad_buffer<double>(xhat);
        for (std::size_t i = 0; i < gy.size(); ++i) gh[i] += gamma[i % channels] * gy[i];
      }
      if (scale.requires_grad()) {
        auto& gg = t.grad_buffer<double>(scale);
        for (std::size_t i = 0; i < gy.size(); ++i) gg[i % channels] += gy[i] * hv[i];
      }
      if (shift.requires_grad()) {
        auto& gb = t.grad_buffer<double>(shift);
        for (std::size_t i = 0; i < gy.size(); ++i) gb[i % channels] += gy[i];
      }
    });
  }
  const CTensor& h = xhat.value().complex();
  const RTensor& gamma = scale.value().real();
  const CTensor& beta = shift.value().complex();
  if (gamma.shape() != Shape{channels, 3} || beta.shape() != Shape{channels}) {
    throw DimensionError("complex batch norm expects shift [C] complex and scale [C, 3] real");
  }
  CTensor y(h.shape());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const std::size_t c = i % channels;
    const double grr = gamma(c, 0), gri = gamma(c, 1), gii = gamma(c, 2);
    y[i] = cplx(grr * h[i].real() + gri * h[i].imag(), gri * h[i].real() + gii * h[i].imag()) + beta[c];
  }
  return tape.record(Value(std::move(y)), {xhat, shift, scale}, [xhat, shift, scale, channels](Tape& t, const Value& g) {
    const auto& gy = g.complex();
    const auto& hv = xhat.value().complex();
    const auto& gamma = scale.value().real();
    if (xhat.requires_grad()) {
      auto& gh = t.grad_buffer<cplx>(xhat);
      for (std::size_t i = 0; i < gy.size(); ++i) {
        const std::size_t c = i % channels;
        const double grr = gamma(c, 0), gri = gamma(c, 1), gii = gamma(c, 2);
        gh[i] += cplx(grr * gy[i].real() + gri * gy[i].imag(), gri * gy[i].real() + gii * gy[i].imag());
      }
    }
    if (scale.requires_grad()) {
      auto& gg = t.grad_buffer<double>(scale);
      for (std::size_t i = 0; i < gy.size(); ++i) {
        const std::size_t c = i % channels;
        gg(c, 0) += gy[i].real() * hv[i].real();
        gg(c, 1) += gy[i].real() * hv[i].imag() + gy[i].imag() * hv[i].real();
        gg(c, 2) += gy[i].imag() * hv[i].imag();
      }
    }
    if (shift.requires_grad()) {
      auto& gb = t.grad_buffer<cplx>(shift);
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i % channels] += gy[i];
    }
  });
}

}  // namespace cvnn::nn
