#include "cvnn/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cvnn::nn {

namespace {

template <class F>
decltype(auto) with_domain(Domain d, F&& f) {
  if (d == Domain::real) return f(double{});
  return f(cplx{});
}

void require_same_domain(const Var& a, const Var& b, const char* op) {
  if (a.domain() != b.domain()) {
    throw ContractError(std::string(op) + ": mixed value domains (" + to_string(a.domain()) + " and " +
                        to_string(b.domain()) + ")");
  }
}

double magnitude_key(double v) { return v; }
double magnitude_key(cplx z) { return z.real() * z.real() + z.imag() * z.imag(); }

Shape as_batched(const Shape& s) {
  if (s.size() == 3) return {1, s[0], s[1], s[2]};
  if (s.size() != 4) throw DimensionError("expected HxWxC or NxHxWxC tensor, got " + shape_string(s));
  return s;
}

std::size_t last_extent(const Shape& s) {
  if (s.empty()) throw DimensionError("tensor has no class axis");
  return s.back();
}

}  // namespace

// ---------------------------------------------------------------- pooling

template <class T>
std::pair<Tensor<T>, PoolIndices> max_pool2(const Tensor<T>& x) {
  const Shape b = as_batched(x.shape());
  const std::size_t n = b[0], h = b[1], w = b[2], c = b[3];
  const std::size_t oh = (h + 1) / 2, ow = (w + 1) / 2;
  Shape out_shape = x.rank() == 3 ? Shape{oh, ow, c} : Shape{n, oh, ow, c};
  Tensor<T> out(out_shape);
  PoolIndices where{x.shape(), std::vector<std::size_t>(out.size())};
  std::size_t o = 0;
  for (std::size_t in = 0; in < n; ++in) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        for (std::size_t ch = 0; ch < c; ++ch, ++o) {
          std::size_t best = 0;
          double best_key = -std::numeric_limits<double>::infinity();
          bool found = false;
          for (std::size_t di = 0; di < 2; ++di) {
            const std::size_t ii = 2 * i + di;
            if (ii >= h) continue;
            for (std::size_t dj = 0; dj < 2; ++dj) {
              const std::size_t jj = 2 * j + dj;
              if (jj >= w) continue;
              const std::size_t flat = ((in * h + ii) * w + jj) * c + ch;
              const double key = magnitude_key(x[flat]);
              if (!found || key > best_key) {
                best = flat;
                best_key = key;
                found = true;
              }
            }
          }
          out[o] = x[best];
          where.argmax[o] = best;
        }
      }
    }
  }
  return {std::move(out), std::move(where)};
}

template <class T>
Tensor<T> max_unpool2(const Tensor<T>& x, const PoolIndices& where) {
  if (x.size() != where.argmax.size()) {
    throw ContractError("max_unpool: " + std::to_string(x.size()) + " values but " +
                        std::to_string(where.argmax.size()) + " stored locations");
  }
  Tensor<T> out(where.input_shape);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t loc = where.argmax[i];
    if (loc >= out.size()) {
      throw ContractError("max_unpool: location " + std::to_string(loc) + " outside output " +
                          shape_string(where.input_shape));
    }
    out[loc] = x[i];
  }
  return out;
}

template <class T>
Tensor<T> avg_pool2(const Tensor<T>& x) {
  const Shape b = as_batched(x.shape());
  const std::size_t n = b[0], h = b[1], w = b[2], c = b[3];
  if (h < 2 || w < 2) throw DimensionError("avg_pool2 needs extents >= 2, got " + shape_string(x.shape()));
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor<T> out(x.rank() == 3 ? Shape{oh, ow, c} : Shape{n, oh, ow, c});
  for (std::size_t in = 0; in < n; ++in)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j)
        for (std::size_t ch = 0; ch < c; ++ch) {
          T acc{};
          for (std::size_t di = 0; di < 2; ++di)
            for (std::size_t dj = 0; dj < 2; ++dj) acc += x[((in * h + 2 * i + di) * w + 2 * j + dj) * c + ch];
          out[((in * oh + i) * ow + j) * c + ch] = acc * 0.25;
        }
  return out;
}

template std::pair<RTensor, PoolIndices> max_pool2(const RTensor&);
template std::pair<CTensor, PoolIndices> max_pool2(const CTensor&);
template RTensor max_unpool2(const RTensor&, const PoolIndices&);
template CTensor max_unpool2(const CTensor&, const PoolIndices&);
template RTensor avg_pool2(const RTensor&);
template CTensor avg_pool2(const CTensor&);

// ---------------------------------------------------------------- softmax

namespace {

void softmax_rows(const double* in, double* out, std::size_t rows, std::size_t classes, std::size_t in_stride,
                  std::size_t out_stride) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in + r * classes * in_stride;
    double* y = out + r * classes * out_stride;
    double mx = x[0];
    for (std::size_t k = 1; k < classes; ++k) mx = std::max(mx, x[k * in_stride]);
    double s = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
      const double e = std::exp(x[k * in_stride] - mx);
      y[k * out_stride] = e;
      s += e;
    }
    for (std::size_t k = 0; k < classes; ++k) y[k * out_stride] /= s;
  }
}

}  // namespace

RTensor softmax_output(const RTensor& z) {
  const std::size_t classes = last_extent(z.shape());
  RTensor out(z.shape());
  softmax_rows(z.data(), out.data(), z.size() / classes, classes, 1, 1);
  return out;
}

CTensor softmax_output(const CTensor& z) {
  const std::size_t classes = last_extent(z.shape());
  CTensor out(z.shape());
  const auto* zin = reinterpret_cast<const double*>(z.data());
  auto* zout = reinterpret_cast<double*>(out.data());
  const std::size_t rows = z.size() / classes;
  softmax_rows(zin, zout, rows, classes, 2, 2);
  softmax_rows(zin + 1, zout + 1, rows, classes, 2, 2);
  return out;
}

std::vector<std::size_t> prediction(const Value& y) {
  const std::size_t classes = last_extent(y.shape());
  const std::size_t rows = y.size() / classes;
  std::vector<std::size_t> out(rows);
  y.visit([&](const auto& t) {
    for (std::size_t r = 0; r < rows; ++r) {
      std::size_t best = 0;
      double best_score = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < classes; ++k) {
        const auto v = t[r * classes + k];
        double score;
        if constexpr (is_complex_v<std::decay_t<decltype(v)>>) {
          score = (v.real() + v.imag()) / 2.0;
        } else {
          score = v;
        }
        if (score > best_score) {
          best_score = score;
          best = k;
        }
      }
      out[r] = best;
    }
  });
  return out;
}

// ---------------------------------------------------------------- loss

double cce_loss(const RTensor& y, const RTensor& d) {
  if (y.shape() != d.shape()) {
    throw ContractError("cce_loss: prediction " + shape_string(y.shape()) + " vs target " +
                        shape_string(d.shape()));
  }
  const std::size_t classes = last_extent(y.shape());
  const std::size_t rows = y.size() / classes;
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double row = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
      const double t = d[r * classes + k];
      if (t != 0.0) row -= t * std::log(std::max(y[r * classes + k], kLogFloor));
    }
    total += row;
  }
  return total / static_cast<double>(rows);
}

double ace_loss(const RTensor& y, const RTensor& d) { return cce_loss(y, d); }

double ace_loss(const CTensor& y, const RTensor& d) {
  if (y.shape() != d.shape()) {
    throw ContractError("ace_loss: prediction " + shape_string(y.shape()) + " vs target " +
                        shape_string(d.shape()));
  }
  return 0.5 * (cce_loss(real_part(y), d) + cce_loss(imag_part(y), d));
}

// ---------------------------------------------------------------- dropout

std::vector<unsigned char> dropout_mask(std::size_t n, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout rate must lie in [0, 1)");
  std::vector<unsigned char> keep(n, 1);
  if (rate == 0.0) return keep;
  for (std::size_t i = 0; i < n; ++i) keep[i] = uniform01(rng) >= rate ? 1 : 0;
  return keep;
}

CTensor dropout_complex(const CTensor& x, double rate, Rng& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  const auto keep = dropout_mask(x.size(), rate, rng);
  const double s = 1.0 / (1.0 - rate);
  CTensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = keep[i] ? x[i] * s : cplx{};
  return out;
}

// ---------------------------------------------------------------- taped ops

Var dense(Var x, Var weights, Var bias) {
  require_same_domain(x, weights, "dense");
  require_same_domain(x, bias, "dense");
  const Shape& xs = x.shape();
  const Shape& ws = weights.shape();
  if (xs.size() != 2 || ws.size() != 2 || bias.shape() != Shape{ws[1]}) {
    throw DimensionError("dense: input " + shape_string(xs) + ", weights " + shape_string(ws) + ", bias " +
                         shape_string(bias.shape()));
  }
  Tape& tape = x.tape();
  return with_domain(x.domain(), [&](auto tag) {
    using T = decltype(tag);
    Tensor<T> y = matmul(x.value().template as<T>(), weights.value().template as<T>());
    const auto& b = bias.value().template as<T>();
    const std::size_t out = ws[1];
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i % out];
    return tape.record(Value(std::move(y)), {x, weights, bias}, [x, weights, bias, out](Tape& t, const Value& g) {
      const auto& gy = g.as<T>();
      if (x.requires_grad()) t.accumulate(x, Value(matmul_adjoint_b(gy, weights.value().template as<T>())));
      if (weights.requires_grad()) t.accumulate(weights, Value(matmul_adjoint_a(x.value().template as<T>(), gy)));
      if (bias.requires_grad()) {
        auto& gb = t.grad_buffer<T>(bias);
        for (std::size_t i = 0; i < gy.size(); ++i) gb[i % out] += gy[i];
      }
    });
  });
}

Var conv2d(Var x, Var kernels, Var bias, Padding mode) {
  require_same_domain(x, kernels, "conv2d");
  require_same_domain(x, bias, "conv2d");
  if (x.shape().size() != 4) throw DimensionError("conv2d expects NxHxWxC input, got " + shape_string(x.shape()));
  const std::size_t cout = kernels.shape().at(3);
  if (bias.shape() != Shape{cout}) throw DimensionError("conv2d bias " + shape_string(bias.shape()));
  Tape& tape = x.tape();
  return with_domain(x.domain(), [&](auto tag) {
    using T = decltype(tag);
    Tensor<T> y = cvnn::conv2d(x.value().template as<T>(), kernels.value().template as<T>(), mode);
    const auto& b = bias.value().template as<T>();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i % cout];
    return tape.record(Value(std::move(y)), {x, kernels, bias}, [x, kernels, bias, mode, cout](Tape& t, const Value& g) {
      const auto& gy = g.as<T>();
      if (x.requires_grad()) {
        t.accumulate(x, Value(conv2d_input_grad(gy, kernels.value().template as<T>(), x.shape(), mode)));
      }
      if (kernels.requires_grad()) {
        t.accumulate(kernels, Value(conv2d_kernel_grad(gy, x.value().template as<T>(), kernels.shape(), mode)));
      }
      if (bias.requires_grad()) {
        auto& gb = t.grad_buffer<T>(bias);
        for (std::size_t i = 0; i < gy.size(); ++i) gb[i % cout] += gy[i];
      }
    });
  });
}

Var activate(Var x, const Activation& act) {
  Tape& tape = x.tape();
  if (x.domain() == Domain::real) {
    const ScalarFunction s = act.first;
    return tape.record(Value(apply(s, x.value().real())), {x}, [x, s](Tape& t, const Value& g) {
      const auto& in = x.value().real();
      const auto& gy = g.real();
      RTensor gx(in.shape());
      for (std::size_t i = 0; i < in.size(); ++i) gx[i] = gy[i] * s.df(in[i]);
      t.accumulate(x, Value(std::move(gx)));
    });
  }
  const CTensor& z = x.value().complex();
  if (act.kind == Activation::Kind::type_a) {
    return tape.record(Value(type_a(act.first, act.second, z)), {x}, [x, act](Tape& t, const Value& g) {
      const auto& in = x.value().complex();
      const auto& gy = g.complex();
      CTensor gx(in.shape());
      for (std::size_t i = 0; i < in.size(); ++i) {
        gx[i] = cplx(gy[i].real() * act.first.df(in[i].real()), gy[i].imag() * act.second.df(in[i].imag()));
      }
      t.accumulate(x, Value(std::move(gx)));
    });
  }
  return tape.record(Value(type_b(act.first, act.second, z)), {x}, [x, act](Tape& t, const Value& g) {
    const auto& in = x.value().complex();
    const auto& gy = g.complex();
    CTensor gx(in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double a = in[i].real(), b = in[i].imag();
      const double r2 = a * a + b * b;
      if (r2 == 0.0) continue;
      const double r = std::sqrt(r2);
      const double phi = phase_of(in[i]);
      const double R = act.first.f(r);
      const double P = act.second.f(phi);
      const double gR = gy[i].real() * std::cos(P) + gy[i].imag() * std::sin(P);
      const double gP = R * (-gy[i].real() * std::sin(P) + gy[i].imag() * std::cos(P));
      const double gr = act.first.df(r) * gR;
      const double gphi = act.second.df(phi) * gP;
      gx[i] = cplx(gr * a / r - gphi * b / r2, gr * b / r + gphi * a / r2);
    }
    t.accumulate(x, Value(std::move(gx)));
  });
}

Var avg_pool2(Var x) {
  Tape& tape = x.tape();
  return with_domain(x.domain(), [&](auto tag) {
    using T = decltype(tag);
    return tape.record(Value(avg_pool2(x.value().template as<T>())), {x}, [x](Tape& t, const Value& g) {
      const Shape s = as_batched(x.shape());
      const std::size_t n = s[0], h = s[1], w = s[2], c = s[3], oh = h / 2, ow = w / 2;
      const auto& gy = g.as<T>();
      auto& gx = t.grad_buffer<T>(x);
      for (std::size_t in = 0; in < n; ++in)
        for (std::size_t i = 0; i < oh; ++i)
          for (std::size_t j = 0; j < ow; ++j)
            for (std::size_t ch = 0; ch < c; ++ch) {
              const T v = gy[((in * oh + i) * ow + j) * c + ch] * 0.25;
              for (std::size_t di = 0; di < 2; ++di)
                for (std::size_t dj = 0; dj < 2; ++dj) gx[((in * h + 2 * i + di) * w + 2 * j + dj) * c + ch] += v;
            }
    });
  });
}

Var max_pool2(Var x, std::shared_ptr<PoolIndices>& where) {
  Tape& tape = x.tape();
  return with_domain(x.domain(), [&](auto tag) {
    using T = decltype(tag);
    auto [pooled, idx] = max_pool2(x.value().template as<T>());
    where = std::make_shared<PoolIndices>(std::move(idx));
    std::shared_ptr<const PoolIndices> keep = where;
    return tape.record(Value(std::move(pooled)), {x}, [x, keep](Tape& t, const Value& g) {
      const auto& gy = g.as<T>();
      auto& gx = t.grad_buffer<T>(x);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[keep->argmax[i]] += gy[i];
    });
  });
}

Var max_unpool2(Var x, const PoolIndices& where) {
  Tape& tape = x.tape();
  return with_domain(x.domain(), [&](auto tag) {
    using T = decltype(tag);
    auto keep = std::make_shared<const PoolIndices>(where);
    return tape.record(Value(max_unpool2(x.value().template as<T>(), where)), {x}, [x, keep](Tape& t, const Value& g) {
      const auto& gy = g.as<T>();
      auto& gx = t.grad_buffer<T>(x);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[keep->argmax[i]];
    });
  });
}

Var dropout(Var x, double rate, Rng& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  Tape& tape = x.tape();
  auto keep = std::make_shared<std::vector<unsigned char>>(dropout_mask(x.value().size(), rate, rng));
  const double s = 1.0 / (1.0 - rate);
  return with_domain(x.domain(), [&](auto tag) {
    using T = decltype(tag);
    const auto& in = x.value().template as<T>();
    Tensor<T> y(in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) y[i] = (*keep)[i] ? in[i] * s : T{};
    return tape.record(Value(std::move(y)), {x}, [x, keep, s](Tape& t, const Value& g) {
      const auto& gy = g.as<T>();
      auto& gx = t.grad_buffer<T>(x);
      for (std::size_t i = 0; i < gy.size(); ++i)
        if ((*keep)[i]) gx[i] += gy[i] * s;
    });
  });
}

Var reshape(Var x, Shape shape) {
  Tape& tape = x.tape();
  return with_domain(x.domain(), [&](auto tag) {
    using T = decltype(tag);
    return tape.record(Value(x.value().template as<T>().reshaped(shape)), {x}, [x](Tape& t, const Value& g) {
      t.accumulate(x, Value(g.as<T>().reshaped(x.shape())));
    });
  });
}

Var flatten(Var x) {
  const Shape& s = x.shape();
  if (s.empty()) throw DimensionError("flatten of a rank-0 tensor");
  return reshape(x, {s[0], shape_size(s) / std::max<std::size_t>(s[0], 1)});
}

Var softmax_output(Var x, SoftmaxMode mode) {
  Tape& tape = x.tape();
  const std::size_t classes = last_extent(x.shape());
  // Softmax Jacobian-vector product on one plane with strides.
  auto softmax_back = [classes](const double* y, const double* gy, double* gx, std::size_t rows,
                                std::size_t stride) {
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t base = r * classes * stride;
      double dot = 0.0;
      for (std::size_t k = 0; k < classes; ++k) dot += gy[base + k * stride] * y[base + k * stride];
      for (std::size_t k = 0; k < classes; ++k) {
        gx[base + k * stride] += y[base + k * stride] * (gy[base + k * stride] - dot);
      }
    }
  };
  if (x.domain() == Domain::real) {
    auto y = std::make_shared<const RTensor>(softmax_output(x.value().real()));
    return tape.record(Value(*y), {x}, [x, y, classes, softmax_back](Tape& t, const Value& g) {
      auto& gx = t.grad_buffer<double>(x);
      softmax_back(y->data(), g.real().data(), gx.data(), y->size() / classes, 1);
    });
  }
  if (mode == SoftmaxMode::magnitude) {
    auto y = std::make_shared<const RTensor>(softmax_output(modulus(x.value().complex())));
    return tape.record(Value(*y), {x}, [x, y, classes, softmax_back](Tape& t, const Value& g) {
      RTensor gm(y->shape());
      softmax_back(y->data(), g.real().data(), gm.data(), y->size() / classes, 1);
      const auto& z = x.value().complex();
      auto& gx = t.grad_buffer<cplx>(x);
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double r = std::abs(z[i]);
        if (r > 0.0) gx[i] += gm[i] * z[i] / r;
      }
    });
  }
  auto y = std::make_shared<const CTensor>(softmax_output(x.value().complex()));
  return tape.record(Value(*y), {x}, [x, y, classes, softmax_back](Tape& t, const Value& g) {
    const auto* yd = reinterpret_cast<const double*>(y->data());
    const auto* gd = reinterpret_cast<const double*>(g.complex().data());
    auto* gx = reinterpret_cast<double*>(t.grad_buffer<cplx>(x).data());
    const std::size_t rows = y->size() / classes;
    softmax_back(yd, gd, gx, rows, 2);
    softmax_back(yd + 1, gd + 1, gx + 1, rows, 2);
  });
}

Var ace_loss(Var y, std::span<const std::uint8_t> labels, std::span<const double> class_weights) {
  const std::size_t classes = last_extent(y.shape());
  const std::size_t rows = y.value().size() / classes;
  if (labels.size() != rows) {
    throw ContractError("ace_loss: " + std::to_string(labels.size()) + " labels for " + std::to_string(rows) +
                        " prediction rows");
  }
  if (!class_weights.empty() && class_weights.size() < classes) {
    throw ContractError("ace_loss: " + std::to_string(class_weights.size()) + " class weights for " +
                        std::to_string(classes) + " classes");
  }
  std::size_t labeled = 0;
  for (std::uint8_t l : labels) {
    if (l == kUnlabeled) continue;
    if (l >= classes) throw ContractError("ace_loss: label " + std::to_string(l) + " out of range");
    ++labeled;
  }
  const bool complex = y.domain() == Domain::complex;
  const double planes = complex ? 2.0 : 1.0;
  const double denom = labeled == 0 ? 1.0 : static_cast<double>(labeled);
  auto weight = [class_weights](std::uint8_t l) { return class_weights.empty() ? 1.0 : class_weights[l]; };

  double total = 0.0;
  y.value().visit([&](const auto& t) {
    for (std::size_t r = 0; r < rows; ++r) {
      const std::uint8_t l = labels[r];
      if (l == kUnlabeled) continue;
      const auto v = t[r * classes + l];
      double row;
      if constexpr (is_complex_v<std::decay_t<decltype(v)>>) {
        row = 0.5 * (-std::log(std::max(v.real(), kLogFloor)) - std::log(std::max(v.imag(), kLogFloor)));
      } else {
        row = -std::log(std::max(v, kLogFloor));
      }
      total += weight(l) * row;
    }
  });
  const double loss = total / denom;

  std::vector<std::uint8_t> lab(labels.begin(), labels.end());
  std::vector<double> w(class_weights.begin(), class_weights.end());
  return y.tape().record(Value(RTensor({1}, {loss})), {y},
                         [y, lab = std::move(lab), w = std::move(w), classes, planes, denom](Tape& t, const Value& g) {
    const double seed = g.real()[0];
    auto wt = [&](std::uint8_t l) { return w.empty() ? 1.0 : w[l]; };
    auto dlog = [](double p) { return p > kLogFloor ? -1.0 / p : 0.0; };
    if (y.domain() == Domain::complex) {
      const auto& yv = y.value().complex();
      auto& gy = t.grad_buffer<cplx>(y);
      for (std::size_t r = 0; r < lab.size(); ++r) {
        if (lab[r] == kUnlabeled) continue;
        const std::size_t k = r * classes + lab[r];
        const double s = seed * wt(lab[r]) / (planes * denom);
        gy[k] += cplx(s * dlog(yv[k].real()), s * dlog(yv[k].imag()));
      }
    } else {
      const auto& yv = y.value().real();
      auto& gy = t.grad_buffer<double>(y);
      for (std::size_t r = 0; r < lab.size(); ++r) {
        if (lab[r] == kUnlabeled) continue;
        const std::size_t k = r * classes + lab[r];
        gy[k] += seed * wt(lab[r]) / (planes * denom) * dlog(yv[k]);
      }
    }
  });
}

Var add(Var a, Var b) {
  require_same_domain(a, b, "add");
  if (a.shape() != b.shape()) {
    throw DimensionError("add: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  return with_domain(a.domain(), [&](auto tag) {
    using T = decltype(tag);
    Tensor<T> y = a.value().template as<T>();
    const auto& bv = b.value().template as<T>();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
    return a.tape().record(Value(std::move(y)), {a, b}, [a, b](Tape& t, const Value& g) {
      t.accumulate(a, g);
      t.accumulate(b, g);
    });
  });
}

Var scale(Var a, double s) {
  return with_domain(a.domain(), [&](auto tag) {
    using T = decltype(tag);
    Tensor<T> y = a.value().template as<T>();
    for (auto& v : y.values()) v *= s;
    return a.tape().record(Value(std::move(y)), {a}, [a, s](Tape& t, const Value& g) {
      Tensor<T> gx = g.as<T>();
      for (auto& v : gx.values()) v *= s;
      t.accumulate(a, Value(std::move(gx)));
    });
  });
}

Var sum_real(Var a) {
  double total = 0.0;
  a.value().visit([&](const auto& t) {
    for (const auto& v : t.values()) total += std::real(v);
  });
  return a.tape().record(Value(RTensor({1}, {total})), {a}, [a](Tape& t, const Value& g) {
    const double seed = g.real()[0];
    a.value().visit([&](const auto& v) {
      using T = typename std::decay_t<decltype(v)>::value_type;
      auto& gx = t.grad_buffer<T>(a);
      for (auto& e : gx.values()) e += T(seed);
    });
  });
}

Var squared_norm(Var a) {
  double total = 0.0;
  a.value().visit([&](const auto& t) {
    for (const auto& v : t.values()) total += std::norm(v);
  });
  return a.tape().record(Value(RTensor({1}, {total})), {a}, [a](Tape& t, const Value& g) {
    const double seed = g.real()[0];
    a.value().visit([&](const auto& v) {
      using T = typename std::decay_t<decltype(v)>::value_type;
      auto& gx = t.grad_buffer<T>(a);
      for (std::size_t i = 0; i < v.size(); ++i) gx[i] += 2.0 * seed * v[i];
    });
  });
}

}  // namespace cvnn::nn
