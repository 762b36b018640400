#include "cvnn/grad.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cvnn {

Parameter::Parameter(std::string name, Value init)
    : name_(std::move(name)), value_(std::move(init)), grad_(Value::zeros(value_.domain(), value_.shape())) {}

void Parameter::zero_grad() { grad_ = Value::zeros(value_.domain(), value_.shape()); }

double Parameter::coordinate(std::size_t c) const {
  if (value_.is_complex()) {
    const cplx z = value_.complex()[c / 2];
    return c % 2 == 0 ? z.real() : z.imag();
  }
  return value_.real()[c];
}

void Parameter::set_coordinate(std::size_t c, double v) {
  if (value_.is_complex()) {
    cplx& z = value_.complex()[c / 2];
    z = c % 2 == 0 ? cplx(v, z.imag()) : cplx(z.real(), v);
  } else {
    value_.real()[c] = v;
  }
}

double PlaneGrad::coordinate(std::size_t c, bool complex) const {
  if (!complex) return re[c];
  return c % 2 == 0 ? re[c / 2] : im->operator[](c / 2);
}

const Value& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Value v) {
  nodes_.push_back(Node{std::move(v), {}, false, false, {}, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
  if (auto it = registry_.find(&p); it != registry_.end()) return Var(this, it->second);
  nodes_.push_back(Node{p.value(), {}, false, true, {}, &p});
  const std::size_t id = nodes_.size() - 1;
  registry_.emplace(&p, id);
  params_.push_back(&p);
  return Var(this, id);
}

Var Tape::record(Value v, std::initializer_list<Var> inputs, BackwardFn fn) {
  const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Var& in) { return in.requires_grad(); });
  nodes_.push_back(Node{std::move(v), {}, false, needs, needs ? std::move(fn) : BackwardFn{}, nullptr});
  return Var(this, nodes_.size() - 1);
}

Value& Tape::ensure_grad(std::size_t id) {
  Node& n = nodes_.at(id);
  if (!n.has_grad) {
    n.grad = Value::zeros(n.value.domain(), n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::accumulate(const Var& v, const Value& g) {
  if (!requires_grad(v.id())) return;
  Value& acc = ensure_grad(v.id());
  if (acc.domain() != g.domain() || acc.shape() != g.shape()) {
    throw DimensionError("gradient " + shape_string(g.shape()) + " (" + to_string(g.domain()) +
                         ") does not match node " + shape_string(acc.shape()) + " (" +
                         to_string(acc.domain()) + ")");
  }
  acc.visit([&](auto& a) {
    using T = typename std::decay_t<decltype(a)>::value_type;
    const auto& b = g.as<T>();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  });
}

PlaneGrad split_planes(const Value& packed) {
  if (packed.is_complex()) return {real_part(packed.complex()), imag_part(packed.complex())};
  return {packed.real(), std::nullopt};
}

GradientMap Tape::backward(const Var& loss) {
  if (&loss.tape() != this) throw ContractError("loss belongs to a different tape");
  const Value& lv = value(loss.id());
  if (lv.is_complex() || lv.size() != 1) {
    throw ContractError("backward requires a real scalar loss, got " + to_string(lv.domain()) + " " +
                        shape_string(lv.shape()));
  }
  if (swept_) throw ContractError("tape has already been swept");
  swept_ = true;

  if (requires_grad(loss.id())) {
    ensure_grad(loss.id()).real()[0] = 1.0;
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (!n.has_grad || !n.backward) continue;
      n.backward(*this, n.grad);
    }
  }

  GradientMap out;
  for (Parameter* p : params_) {
    const std::size_t id = registry_.at(p);
    Node& n = nodes_[id];
    p->grad() = n.has_grad ? n.grad : Value::zeros(p->domain(), p->shape());
    out.emplace(p, split_planes(p->grad()));
  }
  return out;
}

double evaluate_loss(const LossBuilder& f) {
  Tape tape;
  const Var loss = f(tape);
  const Value& v = loss.value();
  if (v.is_complex() || v.size() != 1) throw ContractError("loss must be a real scalar");
  return v.real()[0];
}

GradientMap analytic_gradients(const LossBuilder& f, const std::vector<Parameter*>& params) {
  Tape tape;
  for (Parameter* p : params) tape.parameter(*p);
  const Var loss = f(tape);
  return tape.backward(loss);
}

FiniteDifferenceReport finite_difference_check(const LossBuilder& f,
                                               const std::vector<Parameter*>& params,
                                               const GradientMap& analytic,
                                               const FiniteDifferenceOptions& options) {
  if (options.step <= 0.0) throw ContractError("finite difference step must be positive");
  const double h = options.step;
  FiniteDifferenceReport report;
  auto eval = [&] {
    const double v = evaluate_loss(f);
    if (!std::isfinite(v)) throw NumericError("non-finite objective during finite differencing");
    return v;
  };
  for (Parameter* p : params) {
    const auto it = analytic.find(p);
    if (it == analytic.end()) {
      throw ContractError("no analytic gradient supplied for parameter '" + p->name() + "'");
    }
    const std::size_t coords = p->real_scalar_count();
    std::size_t stride = 1;
    if (options.max_coordinates_per_parameter > 0 && coords > options.max_coordinates_per_parameter) {
      stride = (coords + options.max_coordinates_per_parameter - 1) / options.max_coordinates_per_parameter;
      // An even stride over interleaved (Re, Im) coordinates would never probe Im.
      if (p->domain() == Domain::complex && stride % 2 == 0) ++stride;
    }
    for (std::size_t c = 0; c < coords; c += stride) {
      const double orig = p->coordinate(c);
      p->set_coordinate(c, orig + h);
      const double fp = eval();
      p->set_coordinate(c, orig - h);
      const double fm = eval();
      p->set_coordinate(c, orig);
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = it->second.coordinate(c, p->domain() == Domain::complex);
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      ++report.coordinates_checked;
      if (err > report.max_relative_error || report.coordinates_checked == 1) {
        report.max_relative_error = err;
        report.worst_parameter = p->name();
        report.worst_coordinate = c;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

FiniteDifferenceReport finite_difference_check(const LossBuilder& f,
                                               const std::vector<Parameter*>& params,
                                               const FiniteDifferenceOptions& options) {
  return finite_difference_check(f, params, analytic_gradients(f, params), options);
}

}  // namespace cvnn
