#pragma once

// Dense row-major tensors over double and std::complex<double>, plus the
// arithmetic kernels (matmul, 2-D cross-correlation, polar views) that the
// layers and the PolSAR pipeline are built from.

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "cvnn/errors.hpp"

namespace cvnn {

using cplx = std::complex<double>;
using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

template <class T>
inline constexpr bool is_complex_v = std::is_same_v<T, cplx>;

inline double conj_of(double x) { return x; }
inline cplx conj_of(cplx z) { return std::conj(z); }

template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{})
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size()) {
      throw DimensionError("tensor shape " + shape_string(shape_) + " does not match " +
                           std::to_string(data_.size()) + " stored scalars");
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  template <class... I>
  T& operator()(I... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <class... I>
  const T& operator()(I... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    std::size_t off = 0;
    std::size_t axis = 0;
    for (std::size_t i : idx) off = off * shape_[axis++] + i;
    return off;
  }

  Tensor reshaped(Shape shape) const& {
    Tensor out = *this;
    out.reshape(std::move(shape));
    return out;
  }
  Tensor reshaped(Shape shape) && {
    reshape(std::move(shape));
    return std::move(*this);
  }
  void reshape(Shape shape) {
    if (shape_size(shape) != data_.size()) {
      throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    shape_ = std::move(shape);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

using RTensor = Tensor<double>;
using CTensor = Tensor<cplx>;

enum class Domain : unsigned char { real, complex };

std::string to_string(Domain d);
Domain domain_from_string(const std::string& s);

/// A tensor in either value domain. Real models carry RTensor values end to
/// end; complex models carry CTensor values.
class Value {
 public:
  Value() = default;
  Value(RTensor t) : v_(std::move(t)) {}
  Value(CTensor t) : v_(std::move(t)) {}

  static Value zeros(Domain d, const Shape& shape);

  Domain domain() const noexcept { return v_.index() == 0 ? Domain::real : Domain::complex; }
  bool is_complex() const noexcept { return v_.index() == 1; }
  const Shape& shape() const;
  std::size_t size() const;
  /// Number of real scalars (two per complex entry).
  std::size_t real_scalar_count() const { return is_complex() ? 2 * size() : size(); }

  template <class T>
  Tensor<T>& as() {
    if (auto* p = std::get_if<Tensor<T>>(&v_)) return *p;
    throw ContractError("value holds a " + to_string(domain()) + " tensor");
  }
  template <class T>
  const Tensor<T>& as() const {
    if (auto* p = std::get_if<Tensor<T>>(&v_)) return *p;
    throw ContractError("value holds a " + to_string(domain()) + " tensor");
  }
  RTensor& real() { return as<double>(); }
  const RTensor& real() const { return as<double>(); }
  CTensor& complex() { return as<cplx>(); }
  const CTensor& complex() const { return as<cplx>(); }

  template <class F>
  decltype(auto) visit(F&& f) {
    return std::visit(std::forward<F>(f), v_);
  }
  template <class F>
  decltype(auto) visit(F&& f) const {
    return std::visit(std::forward<F>(f), v_);
  }

  bool operator==(const Value&) const = default;

 private:
  std::variant<RTensor, CTensor> v_;
};

// Plane views.
RTensor real_part(const CTensor& z);
RTensor imag_part(const CTensor& z);
CTensor make_complex(const RTensor& re, const RTensor& im);
CTensor to_complex(const RTensor& re);

/// Elementwise |z| = sqrt(Re^2 + Im^2).
RTensor modulus(const CTensor& z);
/// Elementwise arg(z) in (-pi, pi]; phase(0) is 0.
RTensor phase(const CTensor& z);
double phase_of(cplx z);

/// c[i,j] = sum_p a[i,p] b[p,j].
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// a^H b (conjugate transpose of a).
template <class T>
Tensor<T> matmul_adjoint_a(const Tensor<T>& a, const Tensor<T>& b);
/// a b^H.
template <class T>
Tensor<T> matmul_adjoint_b(const Tensor<T>& a, const Tensor<T>& b);

enum class Padding : unsigned char { valid, same };

/// Cross-correlation (no kernel flip). `input` is H x W x Cin or
/// N x H x W x Cin; `kernels` is k x k x Cin x Cout. `same` zero-pads
/// (k-1)/2 on the leading side and the rest on the trailing side.
template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, Padding mode);

/// Gradient of a batched conv2d with respect to its input, given the packed
/// output gradient (d/dRe + i d/dIm for complex tensors).
template <class T>
Tensor<T> conv2d_input_grad(const Tensor<T>& out_grad, const Tensor<T>& kernels,
                            const Shape& input_shape, Padding mode);
/// Gradient of a batched conv2d with respect to its kernels.
template <class T>
Tensor<T> conv2d_kernel_grad(const Tensor<T>& out_grad, const Tensor<T>& input,
                             const Shape& kernel_shape, Padding mode);

}  // namespace cvnn
