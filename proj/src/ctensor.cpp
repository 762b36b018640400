#include "cvnn/ctensor.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace cvnn {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

std::string to_string(Domain d) { return d == Domain::real ? "real" : "complex"; }

Domain domain_from_string(const std::string& s) {
  if (s == "real") return Domain::real;
  if (s == "complex") return Domain::complex;
  throw ConfigError("unknown value domain '" + s + "'");
}

Value Value::zeros(Domain d, const Shape& shape) {
  if (d == Domain::real) return Value(RTensor(shape));
  return Value(CTensor(shape));
}

const Shape& Value::shape() const {
  return std::visit([](const auto& t) -> const Shape& { return t.shape(); }, v_);
}

std::size_t Value::size() const {
  return std::visit([](const auto& t) { return t.size(); }, v_);
}

RTensor real_part(const CTensor& z) {
  RTensor out(z.shape());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i].real();
  return out;
}

RTensor imag_part(const CTensor& z) {
  RTensor out(z.shape());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i].imag();
  return out;
}

CTensor make_complex(const RTensor& re, const RTensor& im) {
  if (re.shape() != im.shape()) {
    throw DimensionError("real plane " + shape_string(re.shape()) + " and imaginary plane " +
                         shape_string(im.shape()) + " differ");
  }
  CTensor out(re.shape());
  for (std::size_t i = 0; i < re.size(); ++i) out[i] = cplx(re[i], im[i]);
  return out;
}

CTensor to_complex(const RTensor& re) {
  CTensor out(re.shape());
  for (std::size_t i = 0; i < re.size(); ++i) out[i] = cplx(re[i], 0.0);
  return out;
}

RTensor modulus(const CTensor& z) {
  RTensor out(z.shape());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double a = z[i].real();
    const double b = z[i].imag();
    out[i] = std::sqrt(a * a + b * b);
  }
  return out;
}

double phase_of(cplx z) {
  if (z.real() == 0.0 && z.imag() == 0.0) return 0.0;
  const double p = std::atan2(z.imag(), z.real());
  // atan2(-0, x<0) lands on -pi, which sits outside (-pi, pi].
  return p == -std::numbers::pi ? std::numbers::pi : p;
}

RTensor phase(const CTensor& z) {
  RTensor out(z.shape());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = phase_of(z[i]);
  return out;
}

namespace {

void require_rank(const Shape& s, std::size_t rank, const char* what) {
  if (s.size() != rank) {
    throw DimensionError(std::string(what) + " must have rank " + std::to_string(rank) + ", got " +
                         shape_string(s));
  }
}

struct ConvGeometry {
  std::size_t n, h, w, cin, k, cout, oh, ow, pad_h, pad_w;
};

ConvGeometry conv_geometry(const Shape& in, const Shape& ks, Padding mode) {
  require_rank(ks, 4, "conv2d kernels");
  if (in.size() != 4) {
    throw DimensionError("conv2d input must be HxWxC or NxHxWxC, got " + shape_string(in));
  }
  ConvGeometry g{};
  g.n = in[0];
  g.h = in[1];
  g.w = in[2];
  g.cin = in[3];
  g.k = ks[0];
  g.cout = ks[3];
  if (ks[1] != g.k || ks[2] != g.cin) {
    throw DimensionError("conv2d kernels " + shape_string(ks) + " incompatible with input " +
                         shape_string(in));
  }
  if (mode == Padding::same) {
    g.pad_h = (g.k - 1) / 2;
    g.pad_w = (g.k - 1) / 2;
    if (g.k > g.h + g.k - 1 || g.k > g.w + g.k - 1 || g.h == 0 || g.w == 0) {
      throw DimensionError("conv2d kernel " + shape_string(ks) + " larger than padded input " +
                           shape_string(in));
    }
    g.oh = g.h;
    g.ow = g.w;
  } else {
    if (g.k > g.h || g.k > g.w) {
      throw DimensionError("conv2d kernel " + shape_string(ks) + " larger than input " +
                           shape_string(in));
    }
    g.pad_h = 0;
    g.pad_w = 0;
    g.oh = g.h - g.k + 1;
    g.ow = g.w - g.k + 1;
  }
  return g;
}

Shape batched(const Shape& s) {
  if (s.size() == 3) return {1, s[0], s[1], s[2]};
  return s;
}

}  // namespace

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a.shape(), 2, "matmul lhs");
  require_rank(b.shape(), 2, "matmul rhs");
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  if (b.extent(0) != k) {
    throw DimensionError("matmul inner extents differ: " + shape_string(a.shape()) + " * " +
                         shape_string(b.shape()));
  }
  Tensor<T> c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      const T* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

template <class T>
Tensor<T> matmul_adjoint_a(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a.shape(), 2, "matmul lhs");
  require_rank(b.shape(), 2, "matmul rhs");
  const std::size_t k = a.extent(0), m = a.extent(1), n = b.extent(1);
  if (b.extent(0) != k) {
    throw DimensionError("adjoint matmul extents differ: " + shape_string(a.shape()) + "^H * " +
                         shape_string(b.shape()));
  }
  Tensor<T> c({m, n});
  for (std::size_t p = 0; p < k; ++p) {
    const T* arow = a.data() + p * m;
    const T* brow = b.data() + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = conj_of(arow[i]);
      T* crow = c.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

template <class T>
Tensor<T> matmul_adjoint_b(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a.shape(), 2, "matmul lhs");
  require_rank(b.shape(), 2, "matmul rhs");
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(0);
  if (b.extent(1) != k) {
    throw DimensionError("adjoint matmul extents differ: " + shape_string(a.shape()) + " * " +
                         shape_string(b.shape()) + "^H");
  }
  Tensor<T> c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T* brow = b.data() + j * k;
      T acc{};
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * conj_of(brow[p]);
      c[i * n + j] = acc;
    }
  }
  return c;
}

template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, Padding mode) {
  const bool single = input.rank() == 3;
  const ConvGeometry g = conv_geometry(batched(input.shape()), kernels.shape(), mode);
  Tensor<T> out({g.n, g.oh, g.ow, g.cout});
  const T* x = input.data();
  const T* kd = kernels.data();
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t oi = 0; oi < g.oh; ++oi) {
      for (std::size_t oj = 0; oj < g.ow; ++oj) {
        T* y = out.data() + ((n * g.oh + oi) * g.ow + oj) * g.cout;
        for (std::size_t di = 0; di < g.k; ++di) {
          const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(oi + di) - static_cast<std::ptrdiff_t>(g.pad_h);
          if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t dj = 0; dj < g.k; ++dj) {
            const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(oj + dj) - static_cast<std::ptrdiff_t>(g.pad_w);
            if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(g.w)) continue;
            const T* xp = x + ((n * g.h + ii) * g.w + jj) * g.cin;
            const T* kp = kd + (di * g.k + dj) * g.cin * g.cout;
            for (std::size_t ci = 0; ci < g.cin; ++ci) {
              const T xv = xp[ci];
              const T* kc = kp + ci * g.cout;
              for (std::size_t co = 0; co < g.cout; ++co) y[co] += xv * kc[co];
            }
          }
        }
      }
    }
  }
  if (single) out.reshape({g.oh, g.ow, g.cout});
  return out;
}

template <class T>
Tensor<T> conv2d_input_grad(const Tensor<T>& out_grad, const Tensor<T>& kernels,
                            const Shape& input_shape, Padding mode) {
  const ConvGeometry g = conv_geometry(batched(input_shape), kernels.shape(), mode);
  Tensor<T> dx(batched(input_shape));
  const T* gd = out_grad.data();
  const T* kd = kernels.data();
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t oi = 0; oi < g.oh; ++oi) {
      for (std::size_t oj = 0; oj < g.ow; ++oj) {
        const T* gy = gd + ((n * g.oh + oi) * g.ow + oj) * g.cout;
        for (std::size_t di = 0; di < g.k; ++di) {
          const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(oi + di) - static_cast<std::ptrdiff_t>(g.pad_h);
          if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t dj = 0; dj < g.k; ++dj) {
            const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(oj + dj) - static_cast<std::ptrdiff_t>(g.pad_w);
            if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(g.w)) continue;
            T* xp = dx.data() + ((n * g.h + ii) * g.w + jj) * g.cin;
            const T* kp = kd + (di * g.k + dj) * g.cin * g.cout;
            for (std::size_t ci = 0; ci < g.cin; ++ci) {
              const T* kc = kp + ci * g.cout;
              T acc{};
              for (std::size_t co = 0; co < g.cout; ++co) acc += gy[co] * conj_of(kc[co]);
              xp[ci] += acc;
            }
          }
        }
      }
    }
  }
  dx.reshape(input_shape);
  return dx;
}

template <class T>
Tensor<T> conv2d_kernel_grad(const Tensor<T>& out_grad, const Tensor<T>& input,
                             const Shape& kernel_shape, Padding mode) {
  const ConvGeometry g = conv_geometry(batched(input.shape()), kernel_shape, mode);
  Tensor<T> dk(kernel_shape);
  const T* gd = out_grad.data();
  const T* x = input.data();
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t oi = 0; oi < g.oh; ++oi) {
      for (std::size_t oj = 0; oj < g.ow; ++oj) {
        const T* gy = gd + ((n * g.oh + oi) * g.ow + oj) * g.cout;
        for (std::size_t di = 0; di < g.k; ++di) {
          const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(oi + di) - static_cast<std::ptrdiff_t>(g.pad_h);
          if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t dj = 0; dj < g.k; ++dj) {
            const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(oj + dj) - static_cast<std::ptrdiff_t>(g.pad_w);
            if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(g.w)) continue;
            const T* xp = x + ((n * g.h + ii) * g.w + jj) * g.cin;
            T* kp = dk.data() + (di * g.k + dj) * g.cin * g.cout;
            for (std::size_t ci = 0; ci < g.cin; ++ci) {
              const T xv = conj_of(xp[ci]);
              T* kc = kp + ci * g.cout;
              for (std::size_t co = 0; co < g.cout; ++co) kc[co] += xv * gy[co];
            }
          }
        }
      }
    }
  }
  return dk;
}

#define CVNN_INSTANTIATE(T)                                                                    \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> matmul_adjoint_a(const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> matmul_adjoint_b(const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, Padding);                     \
  template Tensor<T> conv2d_input_grad(const Tensor<T>&, const Tensor<T>&, const Shape&,      \
                                       Padding);                                              \
  template Tensor<T> conv2d_kernel_grad(const Tensor<T>&, const Tensor<T>&, const Shape&, Padding);

CVNN_INSTANTIATE(double)
CVNN_INSTANTIATE(cplx)
#undef CVNN_INSTANTIATE

}  // namespace cvnn
