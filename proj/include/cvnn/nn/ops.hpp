#pragma once

// Layer kernels in two flavors: plain tensor functions, and differentiable
// operations that record themselves on a Tape. The channel axis is always the
// last axis; spatial tensors are N x H x W x C.

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "cvnn/ctensor.hpp"
#include "cvnn/grad.hpp"
#include "cvnn/nn/activations.hpp"
#include "cvnn/random.hpp"

namespace cvnn::nn {

inline constexpr std::uint8_t kUnlabeled = 255;
inline constexpr double kLogFloor = 1e-12;

// ---------------------------------------------------------------- pooling

/// For each pooled element, the flat offset of the selected input element.
struct PoolIndices {
  Shape input_shape;
  std::vector<std::size_t> argmax;
};

/// 2x2 max pooling. Complex tensors compare by modulus, real tensors by
/// value. Ties keep the first element in row-major window order. Odd extents
/// are padded on the right/bottom, so the output extent is ceil(extent / 2).
template <class T>
std::pair<Tensor<T>, PoolIndices> max_pool2(const Tensor<T>& x);

/// Places x's entries at the stored locations of a tensor of the pooled
/// input's shape, zeros elsewhere.
template <class T>
Tensor<T> max_unpool2(const Tensor<T>& x, const PoolIndices& where);

/// 2x2 arithmetic mean pooling; a trailing odd row/column is dropped.
template <class T>
Tensor<T> avg_pool2(const Tensor<T>& x);

// ---------------------------------------------------------------- softmax

enum class SoftmaxMode : unsigned char {
  plane_wise,  // independent softmax over Re and Im planes
  magnitude,   // softmax over |z|, producing a real distribution
};

/// Plane-wise softmax over the last axis.
CTensor softmax_output(const CTensor& z);
RTensor softmax_output(const RTensor& z);

/// argmax over the last axis of (Re(y) + Im(y)) / 2 (or y for real
/// outputs); ties resolve to the lowest index. One entry per row.
std::vector<std::size_t> prediction(const Value& y);

// ---------------------------------------------------------------- loss

/// Categorical cross-entropy averaged over rows, log clamped at 1e-12.
double cce_loss(const RTensor& y, const RTensor& d);
/// Complex average cross-entropy: mean of the CCE of every prediction plane
/// (Re and Im for complex outputs, the single plane for real outputs).
double ace_loss(const CTensor& y, const RTensor& d);
double ace_loss(const RTensor& y, const RTensor& d);

// ---------------------------------------------------------------- batch norm

/// Running statistics of a (complex) batch-normalization layer. Complex
/// covariances are stored as (rr, ri, ii) triples per channel; real layers use
/// the rr slot for the variance.
struct BNState {
  Domain domain = Domain::complex;
  std::size_t channels = 0;
  CTensor running_mean;  // [C]; imaginary part unused for real layers
  RTensor running_cov;   // [C, 3]
  double momentum = 0.9;
  double epsilon = 1e-5;

  BNState() = default;
  BNState(Domain d, std::size_t c);
};

/// Inverse square root of the symmetric 2x2 matrix [[a, b], [b, c]] as
/// (w11, w12, w22).
std::array<double, 3> inverse_sqrt_2x2(double a, double b, double c);

/// Whitening only (no affine): per channel, subtract the mean and multiply by
/// (V + eps I)^(-1/2). Uses batch statistics when `training`, otherwise the
/// running statistics.
CTensor complex_whiten(const CTensor& x, BNState& state, bool training);

// ---------------------------------------------------------------- dropout

/// Bernoulli mask drawn once per complex unit (Re and Im drop together).
std::vector<unsigned char> dropout_mask(std::size_t n, double rate, Rng& rng);
CTensor dropout_complex(const CTensor& x, double rate, Rng& rng, bool training);

// ---------------------------------------------------------------- taped ops

Var dense(Var x, Var weights, Var bias);
Var conv2d(Var x, Var kernels, Var bias, Padding mode);
Var activate(Var x, const Activation& act);
Var avg_pool2(Var x);
Var max_pool2(Var x, std::shared_ptr<PoolIndices>& where);
Var max_unpool2(Var x, const PoolIndices& where);
Var dropout(Var x, double rate, Rng& rng, bool training);
Var flatten(Var x);
Var reshape(Var x, Shape shape);
Var softmax_output(Var x, SoftmaxMode mode = SoftmaxMode::plane_wise);

/// Batch normalization with trainable shift (complex [C] or real [C]) and
/// scale (real [C, 3] symmetric 2x2 for complex layers, real [C] otherwise).
Var batch_norm(Var x, Var shift, Var scale, BNState& state, bool training);
/// Whitening stage alone, differentiable; used by tests and by batch_norm.
Var whiten(Var x, BNState& state, bool training);

/// ACE over rows of y (last axis = classes). Rows whose label is kUnlabeled
/// are masked; each row is weighted by class_weights[label] (empty = 1) and
/// the sum is divided by the number of labeled rows.
Var ace_loss(Var y, std::span<const std::uint8_t> labels, std::span<const double> class_weights = {});

// Small algebraic helpers.
Var add(Var a, Var b);
Var scale(Var a, double s);
/// Sum of real parts, as a real scalar.
Var sum_real(Var a);
/// Sum of |a_i|^2, as a real scalar.
Var squared_norm(Var a);

}  // namespace cvnn::nn
