#include "cvnn/models.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cvnn;
using namespace cvnn::models;
using polsar::Representation;

namespace {

// Independent closed-form count of real scalars.
std::size_t oracle_count(const ModelSpec& s) {
  const std::size_t k = s.domain == Domain::complex ? 2 : 1;
  std::size_t n = 0;
  if (s.family == Family::mlp) {
    std::size_t in = s.patch_size * s.patch_size * s.input_channels;
    for (std::size_t w : s.widths) {
      n += k * (in * w + w);
      in = w;
    }
    return n + k * (in * s.classes + s.classes);
  }
  if (s.family == Family::cnn) {
    std::size_t in = s.input_channels, e = s.patch_size;
    for (std::size_t i = 0; i < s.widths.size(); ++i) {
      n += k * (9 * in * s.widths[i] + s.widths[i]);
      e -= 2;
      if (i + 1 < s.widths.size()) e /= 2;
      in = s.widths[i];
    }
    return n + k * (e * e * in * s.classes + s.classes);
  }
  std::size_t in = s.input_channels;
  for (std::size_t w : s.widths) {
    n += k * (9 * in * w + w);
    n += s.domain == Domain::complex ? 2 * w + 3 * w : 2 * w;
    in = w;
  }
  return n;
}

// Exhaustive search over first widths in [1, 8192] at 1/64 resolution,
// without early exit; returns the smallest gap.
std::size_t brute_best_gap(const ModelSpec& cs) {
  const std::size_t target = oracle_count(cs);
  ModelSpec rs = cs;
  rs.domain = Domain::real;
  rs.input_channels = polsar::channel_count(*cs.representation, Domain::real);
  const std::size_t scaled = cs.family == Family::fcnn ? cs.widths.size() - 1 : cs.widths.size();
  std::size_t best = SIZE_MAX;
  for (std::size_t step = 64; step <= 8192 * 64; ++step) {
    const double x = static_cast<double>(step) / 64.0;
    for (std::size_t i = 0; i < scaled; ++i) {
      const double r = static_cast<double>(cs.widths[i]) / static_cast<double>(cs.widths[0]);
      rs.widths[i] = static_cast<std::size_t>(std::max<long long>(1, std::llround(r * x)));
    }
    const std::size_t n = oracle_count(rs);
    best = std::min(best, n > target ? n - target : target - n);
  }
  return best;
}

std::size_t count_kind(nn::Network& net, const std::string& kind) {
  std::size_t n = 0;
  for (auto* l : net.layers()) n += l->kind() == kind;
  return n;
}

ModelSpec small_fcnn(Domain d, std::size_t patch = 32) {
  ModelSpec s = default_spec(Family::fcnn, d, Representation::coherency, 4, patch);
  s.widths = {2, 3, 3, 4, 4, 4, 4, 3, 3, 2, 4};
  return s;
}

}  // namespace

TEST_SUITE("models") {
  TEST_CASE("MLP shape, count and zero biases") {
    const ModelSpec s = default_spec(Family::mlp, Domain::complex, Representation::coherency, 4, 12);
    // 864*96+96 + 96*180+180 + 180*4+4
    CHECK(complex_parameter_count(s) == 101224);
    CHECK(real_parameter_count(s) == 202448);
    Rng rng = make_rng(61);
    nn::Network net = build(s, rng);
    CHECK(net.complex_parameter_count() == 101224);
    CHECK(count_kind(net, "dropout") == 2);
    for (auto* p : net.parameters())
      if (p->name().find("bias") != std::string::npos) CHECK(p->value().complex() == CTensor(p->shape()));
    const Value out = net.predict(Value(testutil::random_complex({32, 12, 12, 6}, rng)));
    CHECK(out.domain() == Domain::complex);
    CHECK(out.shape() == Shape{32, 4});
  }

  TEST_CASE("CNN kernel shapes and flatten size") {
    const ModelSpec s = default_spec(Family::cnn, Domain::complex, Representation::coherency, 4, 12);
    Rng rng = make_rng(62);
    nn::Network net = build(s, rng);
    std::vector<Shape> kernels;
    Shape dense;
    for (auto* l : net.layers()) {
      if (l->kind() == "conv2d") kernels.push_back(l->parameters()[0]->shape());
      if (l->kind() == "dense") dense = l->parameters()[0]->shape();
    }
    REQUIRE(kernels.size() == 2);
    CHECK(kernels[0] == Shape{3, 3, 6, 6});
    CHECK(kernels[1] == Shape{3, 3, 6, 12});
    CHECK(dense == Shape{108, 4});
    CHECK(count_kind(net, "avgpool") == 1);

    const Value x(testutil::random_complex({5, 12, 12, 6}, rng));
    CHECK(net.predict(x) == net.predict(x));
    ModelSpec tiny = s;
    tiny.patch_size = 5;
    CHECK_THROWS_AS(validate(tiny), ContractError);
  }

  TEST_CASE("FCNN structure and output") {
    const ModelSpec s = small_fcnn(Domain::complex);
    Rng rng = make_rng(63);
    nn::Network net = build(s, rng);
    CHECK(count_kind(net, "maxpool") == 5);
    CHECK(count_kind(net, "maxunpool") == 5);
    CHECK(count_kind(net, "batchnorm") == 11);
    CHECK(count_kind(net, "dropout") == 0);
    const Value out = net.predict(Value(testutil::random_complex({2, 32, 32, 6}, rng)));
    REQUIRE(out.shape() == Shape{2, 32, 32, 4});
    const CTensor& y = out.complex();
    double worst = 0.0;
    for (std::size_t p = 0; p < 2 * 32 * 32; ++p) {
      cplx sum = 0;
      for (std::size_t k = 0; k < 4; ++k) sum += y[p * 4 + k];
      worst = std::max({worst, std::abs(sum.real() - 1.0), std::abs(sum.imag() - 1.0)});
    }
    CHECK(worst < 1e-12);

    // Fully convolutional: a 64x64 input gives a 64x64 map with the same weights.
    const Value big = net.predict(Value(testutil::random_complex({1, 64, 64, 6}, rng)));
    CHECK(big.shape() == Shape{1, 64, 64, 4});
  }

  TEST_CASE("FCNN validation") {
    ModelSpec s = small_fcnn(Domain::complex, 48);
    CHECK_THROWS_AS(validate(s), ContractError);
    s = default_spec(Family::fcnn, Domain::complex, Representation::coherency, 4, 128);
    CHECK_NOTHROW(validate(s));
    s.widths = {6, 12, 24, 48, 96, 192, 96, 48, 24, 12, 4};
    CHECK_THROWS_AS(validate(s), ContractError);
    s.widths = {6, 12, 24, 48, 96, 96, 48, 24, 12, 6};
    CHECK_THROWS_AS(validate(s), ContractError);
    s = small_fcnn(Domain::complex);
    s.widths.back() = 3;
    CHECK_THROWS_AS(validate(s), ContractError);
  }

  TEST_CASE("closed-form counts match allocated parameters") {
    Rng rng = make_rng(64);
    std::vector<ModelSpec> specs;
    for (Domain d : {Domain::complex, Domain::real}) {
      for (Representation r : {Representation::coherency, Representation::pauli}) {
        specs.push_back(default_spec(Family::mlp, d, r, 4, 12));
        specs.push_back(default_spec(Family::cnn, d, r, 4, 12));
        specs.push_back(default_spec(Family::fcnn, d, r, 4, 32));
      }
      specs.push_back(small_fcnn(d));
    }
    for (const auto& s : specs) {
      nn::Network net = build(s, rng);
      INFO(to_json(s).dump());
      CHECK(net.trainable_real_count() == real_parameter_count(s));
      CHECK(real_parameter_count(s) == oracle_count(s));
      CHECK(net.complex_parameter_count() == complex_parameter_count(s));
    }
  }

  TEST_CASE("real equivalent of a single dense layer") {
    ModelSpec s;
    s.family = Family::mlp;
    s.domain = Domain::complex;
    s.widths = {};
    s.input_channels = 10;
    s.patch_size = 1;
    s.classes = 10;
    CHECK(complex_parameter_count(s) == 110);
    const RealEquivalent r = real_equivalent(s);
    CHECK(r.target == 220);
    // No free width: the real twin is fixed at 20 inputs x 10 outputs.
    CHECK(r.achieved == 210);
    CHECK(r.spec.domain == Domain::real);
  }

  TEST_CASE("real equivalents of the default models") {
    for (Representation rep : {Representation::coherency, Representation::pauli}) {
      for (auto [family, patch] : {std::pair{Family::mlp, 12}, {Family::cnn, 12}, {Family::fcnn, 128}}) {
        const ModelSpec cs = default_spec(family, Domain::complex, rep, 4, static_cast<std::size_t>(patch));
        const RealEquivalent r = real_equivalent(cs);
        INFO(to_string(family) << " " << polsar::to_string(rep));
        CHECK(r.target == oracle_count(cs));
        CHECK(r.achieved == oracle_count(r.spec));
        CHECK(r.relative_error() <= 0.01);
        CHECK(r.spec.input_channels == polsar::channel_count(rep, Domain::real));
        const std::size_t gap = r.achieved > r.target ? r.achieved - r.target : r.target - r.achieved;
        CHECK(gap == brute_best_gap(cs));
        if (family == Family::fcnn) CHECK(r.spec.widths.back() == 4);
        CHECK_NOTHROW(validate(r.spec));
      }
    }
    const ModelSpec mlp = default_spec(Family::mlp, Domain::complex, Representation::coherency, 4, 12);
    CHECK(real_equivalent(mlp).target == 202448);
    CHECK_THROWS_AS(real_equivalent(real_equivalent(mlp).spec), ContractError);
  }

  TEST_CASE("spec json round trip") {
    ModelSpec s = default_spec(Family::cnn, Domain::real, Representation::pauli, 4, 12);
    s.learning_rate = 0.01;
    s.softmax = nn::SoftmaxMode::magnitude;
    CHECK(spec_from_json(to_json(s), ModelSpec{}) == s);
    CHECK_THROWS_AS(spec_from_json(nlohmann::json{{"family", "rnn"}}, s), ConfigError);
    CHECK_THROWS_AS(spec_from_json(nlohmann::json{{"epochs", "many"}}, s), ConfigError);
    CHECK(family_from_string("fcnn") == Family::fcnn);
  }
}
