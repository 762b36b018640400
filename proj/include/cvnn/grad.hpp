#pragma once

// Reverse-mode gradient engine. Every complex quantity is treated as a pair of
// real coordinates (Re, Im); gradients are stored packed as
// dL/dRe + i dL/dIm, so a real-valued loss yields real partials for both
// planes without requiring holomorphic operations.

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cvnn/ctensor.hpp"

namespace cvnn {

/// A trainable tensor that outlives individual tapes.
class Parameter {
 public:
  Parameter(std::string name, Value init);

  const std::string& name() const noexcept { return name_; }
  Domain domain() const noexcept { return value_.domain(); }
  const Shape& shape() const { return value_.shape(); }
  std::size_t real_scalar_count() const { return value_.real_scalar_count(); }

  Value& value() noexcept { return value_; }
  const Value& value() const noexcept { return value_; }
  Value& grad() noexcept { return grad_; }
  const Value& grad() const noexcept { return grad_; }
  void zero_grad();

  /// Read or write one real coordinate. For complex parameters coordinate
  /// 2i is Re(p[i]) and 2i+1 is Im(p[i]).
  double coordinate(std::size_t c) const;
  void set_coordinate(std::size_t c, double v);

 private:
  std::string name_;
  Value value_;
  Value grad_;
};

/// Partials of a loss with respect to one parameter.
struct PlaneGrad {
  RTensor re;
  std::optional<RTensor> im;  // empty for real parameters

  double coordinate(std::size_t c, bool complex) const;
};

using GradientMap = std::unordered_map<const Parameter*, PlaneGrad>;

class Tape;

/// Handle to a node on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  const Value& value() const;
  Domain domain() const { return value().domain(); }
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Receives the packed gradient of the node's output.
using BackwardFn = std::function<void(Tape&, const Value& out_grad)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives gradients (inputs, labels).
  Var constant(Value v);
  /// Leaf bound to a parameter; registering the same parameter twice returns
  /// the existing node.
  Var parameter(Parameter& p);
  /// Records an operation output. `fn` is dropped when no input requires a
  /// gradient.
  Var record(Value v, std::initializer_list<Var> inputs, BackwardFn fn);

  const Value& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  /// Adds `g` into the gradient accumulator of `v` (no-op when `v` does not
  /// require a gradient).
  void accumulate(const Var& v, const Value& g);
  /// Zero-initialized accumulator of `v`, allocated on first use.
  template <class T>
  Tensor<T>& grad_buffer(const Var& v) {
    return ensure_grad(v.id()).template as<T>();
  }

  /// Runs the reverse sweep from a real scalar loss. Parameters are written
  /// with their gradient (zero when not on a path to the loss) and the
  /// per-plane partials are returned.
  GradientMap backward(const Var& loss);

  const std::vector<Parameter*>& parameters() const noexcept { return params_; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Value value;
    Value grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  Value& ensure_grad(std::size_t id);

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> registry_;
  std::vector<Parameter*> params_;
  bool swept_ = false;
};

/// Split a packed gradient into its real and imaginary planes.
PlaneGrad split_planes(const Value& packed);

struct FiniteDifferenceReport {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::string worst_parameter;
  std::size_t worst_coordinate = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  bool passed(double tolerance) const { return max_relative_error < tolerance; }
};

struct FiniteDifferenceOptions {
  double step = 1e-6;
  /// Upper bound on coordinates probed per parameter (0 = all). Coordinates
  /// are picked with a fixed stride so the choice is deterministic.
  std::size_t max_coordinates_per_parameter = 0;
};

/// Builds the loss on a fresh tape from the current parameter values.
using LossBuilder = std::function<Var(Tape&)>;

/// Evaluates the loss value without a reverse sweep.
double evaluate_loss(const LossBuilder& f);

/// Analytic gradients of `f` via one reverse sweep.
GradientMap analytic_gradients(const LossBuilder& f, const std::vector<Parameter*>& params);

/// max over coordinates of |analytic - (f(p+h) - f(p-h)) / 2h| / max(1, |analytic|),
/// perturbing Re and Im separately. Throws NumericError if f is non-finite.
FiniteDifferenceReport finite_difference_check(const LossBuilder& f,
                                               const std::vector<Parameter*>& params,
                                               const GradientMap& analytic,
                                               const FiniteDifferenceOptions& options = {});

/// Convenience overload that computes the analytic side itself.
FiniteDifferenceReport finite_difference_check(const LossBuilder& f,
                                               const std::vector<Parameter*>& params,
                                               const FiniteDifferenceOptions& options = {});

}  // namespace cvnn
