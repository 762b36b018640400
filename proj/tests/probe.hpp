#pragma once

// A real scalar test objective that weights every Re and Im coordinate of a
// node differently, so finite-difference checks see both planes.

#include "cvnn/grad.hpp"
#include "cvnn/nn/ops.hpp"
#include "test_util.hpp"

namespace testutil {

inline cvnn::Var probe(cvnn::Var y, std::uint64_t seed = 99) {
  using namespace cvnn;
  Tape& tape = y.tape();
  const Var flat = y.shape().size() == 2 ? y : nn::flatten(y);
  const std::size_t d = flat.shape()[1];
  Rng rng = make_rng(seed);
  Var w, b;
  if (y.domain() == Domain::complex) {
    w = tape.constant(Value(random_complex({d, 1}, rng)));
    b = tape.constant(Value(CTensor({1})));
  } else {
    w = tape.constant(Value(random_real({d, 1}, rng)));
    b = tape.constant(Value(RTensor({1})));
  }
  return nn::add(nn::sum_real(nn::dense(flat, w, b)), nn::scale(nn::squared_norm(y), 0.25));
}

}  // namespace testutil
