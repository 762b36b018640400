#pragma once

#include <vector>

#include "cvnn/grad.hpp"

namespace cvnn::nn {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with moments kept per real coordinate; a complex parameter is two
/// independent coordinates (Re, Im).
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamOptions options);

  /// Applies one update from the gradients currently stored on the parameters.
  void step();
  std::size_t steps() const noexcept { return t_; }
  const AdamOptions& options() const noexcept { return options_; }

 private:
  std::vector<Parameter*> params_;
  AdamOptions options_;
  std::vector<Value> m_;
  std::vector<Value> v_;  // complex entries hold (v_re, v_im)
  std::size_t t_ = 0;
};

}  // namespace cvnn::nn
