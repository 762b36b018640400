#include "cvnn/nn/layers.hpp"

#include "cvnn/nn/init.hpp"

namespace cvnn::nn {

namespace {

Value init_weights(Domain domain, std::size_t fan_in, std::size_t fan_out, const Shape& shape, Rng& rng) {
  if (domain == Domain::complex) return Value(he_complex_init(fan_in, fan_out, shape, rng));
  return Value(he_real_init(fan_in, shape, rng));
}

}  // namespace

DenseLayer::DenseLayer(std::string name, Domain domain, std::size_t in, std::size_t out, Rng& rng)
    : Layer(std::move(name)),
      weights_(this->name() + ".weights", init_weights(domain, in, out, {in, out}, rng)),
      bias_(this->name() + ".bias", Value::zeros(domain, {out})) {}

Var DenseLayer::forward(Var x, ForwardContext&) {
  Tape& tape = x.tape();
  return dense(x, tape.parameter(weights_), tape.parameter(bias_));
}

Conv2DLayer::Conv2DLayer(std::string name, Domain domain, std::size_t in_channels, std::size_t filters,
                         std::size_t kernel, Padding padding, Rng& rng)
    : Layer(std::move(name)),
      kernels_(this->name() + ".kernels", init_weights(domain, kernel * kernel * in_channels,
                                                      kernel * kernel * filters,
                                                      {kernel, kernel, in_channels, filters}, rng)),
      bias_(this->name() + ".bias", Value::zeros(domain, {filters})),
      padding_(padding) {}

Var Conv2DLayer::forward(Var x, ForwardContext&) {
  Tape& tape = x.tape();
  return conv2d(x, tape.parameter(kernels_), tape.parameter(bias_), padding_);
}

Var MaxPoolLayer::forward(Var x, ForwardContext& ctx) {
  std::shared_ptr<PoolIndices> where;
  Var y = max_pool2(x, where);
  ctx.pools[slot_] = std::move(where);
  return y;
}

Var MaxUnpoolLayer::forward(Var x, ForwardContext& ctx) {
  const auto it = ctx.pools.find(slot_);
  if (it == ctx.pools.end() || !it->second) {
    throw ContractError("max_unpool '" + name() + "' has no pooling locations for slot " + std::to_string(slot_));
  }
  return max_unpool2(x, *it->second);
}

namespace {

Value bn_scale_init(Domain domain, std::size_t channels) {
  if (domain == Domain::real) return Value(RTensor({channels}, 1.0));
  RTensor s({channels, 3});
  for (std::size_t c = 0; c < channels; ++c) {
    s(c, 0) = 0.5;
    s(c, 2) = 0.5;
  }
  return Value(std::move(s));
}

}  // namespace

BatchNormLayer::BatchNormLayer(std::string name, Domain domain, std::size_t channels)
    : Layer(std::move(name)),
      state_(domain, channels),
      shift_(this->name() + ".shift", Value::zeros(domain, {channels})),
      scale_(this->name() + ".scale", bn_scale_init(domain, channels)) {}

Var BatchNormLayer::forward(Var x, ForwardContext& ctx) {
  Tape& tape = x.tape();
  return batch_norm(x, tape.parameter(shift_), tape.parameter(scale_), state_, ctx.training);
}

Var DropoutLayer::forward(Var x, ForwardContext& ctx) {
  if (!ctx.training || rate_ == 0.0) return x;
  if (ctx.rng == nullptr) throw ContractError("dropout in training mode needs a random generator");
  return dropout(x, rate_, *ctx.rng, true);
}

Network::Network(Domain domain, std::vector<std::unique_ptr<Layer>> layers)
    : domain_(domain), layers_(std::move(layers)) {}

Var Network::forward(Tape& tape, Value batch, ForwardContext& ctx) {
  if (batch.domain() != domain_) {
    throw ContractError("network expects " + to_string(domain_) + " input, got " + to_string(batch.domain()));
  }
  ctx.pools.clear();
  Var x = tape.constant(std::move(batch));
  for (auto& layer : layers_) x = layer->forward(x, ctx);
  return x;
}

Value Network::predict(const Value& batch) {
  Tape tape;
  ForwardContext ctx;
  return forward(tape, batch, ctx).value();
}

std::vector<Parameter*> Network::parameters() {
  std::vector<Parameter*> out;
  for (auto& layer : layers_) {
    for (Parameter* p : layer->parameters()) out.push_back(p);
  }
  return out;
}

std::vector<Layer*> Network::layers() {
  std::vector<Layer*> out;
  for (auto& l : layers_) out.push_back(l.get());
  return out;
}

std::size_t Network::trainable_real_count() {
  std::size_t n = 0;
  for (Parameter* p : parameters()) n += p->real_scalar_count();
  return n;
}

std::size_t Network::complex_parameter_count() {
  std::size_t n = 0;
  for (Parameter* p : parameters())
    if (p->domain() == Domain::complex) n += p->value().size();
  return n;
}

}  // namespace cvnn::nn
