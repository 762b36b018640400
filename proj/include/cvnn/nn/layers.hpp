#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cvnn/grad.hpp"
#include "cvnn/nn/ops.hpp"

namespace cvnn::nn {

/// Per-forward-pass state shared by the layers of one network.
struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;  // required by dropout in training mode
  std::map<int, std::shared_ptr<PoolIndices>> pools;
};

class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  const std::string& name() const noexcept { return name_; }
  virtual std::string kind() const = 0;
  virtual Var forward(Var x, ForwardContext& ctx) = 0;
  virtual std::vector<Parameter*> parameters() { return {}; }
  virtual BNState* bn_state() { return nullptr; }

 private:
  std::string name_;
};

class DenseLayer final : public Layer {
 public:
  DenseLayer(std::string name, Domain domain, std::size_t in, std::size_t out, Rng& rng);
  std::string kind() const override { return "dense"; }
  Var forward(Var x, ForwardContext& ctx) override;
  std::vector<Parameter*> parameters() override { return {&weights_, &bias_}; }
  Parameter& weights() { return weights_; }
  Parameter& bias() { return bias_; }

 private:
  Parameter weights_;  // [in, out]
  Parameter bias_;     // [out]
};

class Conv2DLayer final : public Layer {
 public:
  Conv2DLayer(std::string name, Domain domain, std::size_t in_channels, std::size_t filters, std::size_t kernel,
              Padding padding, Rng& rng);
  std::string kind() const override { return "conv2d"; }
  Var forward(Var x, ForwardContext& ctx) override;
  std::vector<Parameter*> parameters() override { return {&kernels_, &bias_}; }
  Parameter& kernels() { return kernels_; }
  Parameter& bias() { return bias_; }
  Padding padding() const noexcept { return padding_; }

 private:
  Parameter kernels_;  // [k, k, Cin, Cout]
  Parameter bias_;     // [Cout]
  Padding padding_;
};

class ActivationLayer final : public Layer {
 public:
  ActivationLayer(std::string name, Activation act) : Layer(std::move(name)), act_(std::move(act)) {}
  std::string kind() const override { return "activation"; }
  Var forward(Var x, ForwardContext&) override { return activate(x, act_); }
  const Activation& activation() const noexcept { return act_; }

 private:
  Activation act_;
};

class AvgPoolLayer final : public Layer {
 public:
  using Layer::Layer;
  std::string kind() const override { return "avgpool"; }
  Var forward(Var x, ForwardContext&) override { return avg_pool2(x); }
};

/// Max pooling that publishes its argmax locations under `slot` for a later
/// MaxUnpoolLayer.
class MaxPoolLayer final : public Layer {
 public:
  MaxPoolLayer(std::string name, int slot) : Layer(std::move(name)), slot_(slot) {}
  std::string kind() const override { return "maxpool"; }
  Var forward(Var x, ForwardContext& ctx) override;
  int slot() const noexcept { return slot_; }

 private:
  int slot_;
};

class MaxUnpoolLayer final : public Layer {
 public:
  MaxUnpoolLayer(std::string name, int slot) : Layer(std::move(name)), slot_(slot) {}
  std::string kind() const override { return "maxunpool"; }
  Var forward(Var x, ForwardContext& ctx) override;
  int slot() const noexcept { return slot_; }

 private:
  int slot_;
};

class BatchNormLayer final : public Layer {
 public:
  BatchNormLayer(std::string name, Domain domain, std::size_t channels);
  std::string kind() const override { return "batchnorm"; }
  Var forward(Var x, ForwardContext& ctx) override;
  std::vector<Parameter*> parameters() override { return {&shift_, &scale_}; }
  BNState* bn_state() override { return &state_; }

 private:
  BNState state_;
  Parameter shift_;
  Parameter scale_;
};

class DropoutLayer final : public Layer {
 public:
  DropoutLayer(std::string name, double rate) : Layer(std::move(name)), rate_(rate) {}
  std::string kind() const override { return "dropout"; }
  Var forward(Var x, ForwardContext& ctx) override;
  double rate() const noexcept { return rate_; }

 private:
  double rate_;
};

class FlattenLayer final : public Layer {
 public:
  using Layer::Layer;
  std::string kind() const override { return "flatten"; }
  Var forward(Var x, ForwardContext&) override { return flatten(x); }
};

class SoftmaxLayer final : public Layer {
 public:
  SoftmaxLayer(std::string name, SoftmaxMode mode) : Layer(std::move(name)), mode_(mode) {}
  std::string kind() const override { return "softmax"; }
  Var forward(Var x, ForwardContext&) override { return softmax_output(x, mode_); }

 private:
  SoftmaxMode mode_;
};

/// A feed-forward stack of layers.
class Network {
 public:
  Network() = default;
  Network(Domain domain, std::vector<std::unique_ptr<Layer>> layers);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  Domain domain() const noexcept { return domain_; }
  Var forward(Tape& tape, Value batch, ForwardContext& ctx);
  /// Inference-mode class probabilities for a batch.
  Value predict(const Value& batch);

  std::vector<Parameter*> parameters();
  std::vector<Layer*> layers();
  /// Real trainable scalars, counted by walking the allocated parameters.
  std::size_t trainable_real_count();
  /// Complex-valued trainable entries (0 for real networks).
  std::size_t complex_parameter_count();

 private:
  Domain domain_ = Domain::complex;
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace cvnn::nn
