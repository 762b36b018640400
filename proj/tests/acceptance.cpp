// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails.

#include <Eigen/Dense>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "cvnn/grad.hpp"
#include "cvnn/harness.hpp"
#include "cvnn/models.hpp"
#include "cvnn/nn/layers.hpp"
#include "cvnn/nn/ops.hpp"
#include "cvnn/polsar.hpp"
#include "cvnn/sampling.hpp"
#include "airport_fixture.hpp"
#include "probe.hpp"
#include "test_util.hpp"

#ifndef CVNN_CLI_PATH
#error "CVNN_CLI_PATH must name the cvnn executable"
#endif

using namespace cvnn;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 120.0;
constexpr double kAceTol = 1e-12;
constexpr double kNormTol = 1e-12;
constexpr double kPsdTol = -1e-10;
constexpr double kParamTol = 0.01;
constexpr double kMeanTol = 1e-9;
constexpr double kCovTol = 1e-6;
constexpr double kMinOA = 0.90;
constexpr double kTrainSeconds = 300.0;
constexpr double kMinSeparation = 1.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Value rand_value(Domain d, const Shape& s, Rng& rng) {
  return d == Domain::complex ? Value(testutil::random_complex_away_from_zero(s, rng))
                              : Value(testutil::random_real_away_from_zero(s, rng));
}

// ---------------------------------------------------------------- 1

struct GradCase {
  std::string name;
  FiniteDifferenceReport report;
};

std::vector<GradCase> layer_gradients() {
  std::vector<GradCase> out;
  Rng rng = make_rng(1001);
  auto run = [&](std::string name, const LossBuilder& f, std::vector<Parameter*> ps) {
    out.push_back({std::move(name), finite_difference_check(f, ps)});
  };
  for (Domain d : {Domain::complex, Domain::real}) {
    const std::string tag = to_string(d);
    {
      Parameter x("x", rand_value(d, {3, 5}, rng)), w("w", rand_value(d, {5, 4}, rng)), b("b", rand_value(d, {4}, rng));
      run("dense/" + tag, [&](Tape& t) { return testutil::probe(nn::dense(t.parameter(x), t.parameter(w), t.parameter(b))); },
          {&x, &w, &b});
    }
    for (Padding mode : {Padding::valid, Padding::same}) {
      Parameter x("x", rand_value(d, {2, 5, 4, 2}, rng)), k("k", rand_value(d, {3, 3, 2, 3}, rng)),
          b("b", rand_value(d, {3}, rng));
      run(std::string("conv2d/") + (mode == Padding::valid ? "valid/" : "same/") + tag,
          [&](Tape& t) { return testutil::probe(nn::conv2d(t.parameter(x), t.parameter(k), t.parameter(b), mode)); },
          {&x, &k, &b});
    }
    {
      Parameter x("x", rand_value(d, {2, 5, 4, 2}, rng));
      run("avgpool/" + tag, [&](Tape& t) { return testutil::probe(nn::avg_pool2(t.parameter(x))); }, {&x});
      run("maxpool+unpool/" + tag,
          [&](Tape& t) {
            std::shared_ptr<nn::PoolIndices> where;
            const Var p = nn::max_pool2(t.parameter(x), where);
            return testutil::probe(nn::max_unpool2(nn::scale(p, 1.5), *where));
          },
          {&x});
    }
    for (bool training : {true, false}) {
      Parameter x("x", rand_value(d, {3, 3, 2, 2}, rng)), shift("shift", rand_value(d, {2}, rng));
      Parameter scale("scale", d == Domain::complex
                                   ? Value(RTensor({2, 3}, std::vector<double>{0.7, 0.1, 0.5, 0.9, -0.2, 0.6}))
                                   : Value(RTensor({2}, std::vector<double>{0.8, 1.3})));
      nn::BNState state(d, 2);
      if (!training) {
        state.running_mean[0] = cplx(0.1, -0.2);
        state.running_cov(1, 0) = 2.0;
        state.running_cov(1, 1) = 0.3;
      }
      run(std::string("batchnorm/") + (training ? "train/" : "infer/") + tag,
          [&](Tape& t) {
            return testutil::probe(
                nn::batch_norm(t.parameter(x), t.parameter(shift), t.parameter(scale), state, training));
          },
          {&x, &shift, &scale});
    }
    {
      Parameter x("x", rand_value(d, {6, 5}, rng));
      run("dropout/" + tag,
          [&](Tape& t) {
            Rng r = make_rng(5);
            return testutil::probe(nn::dropout(t.parameter(x), 0.5, r, true));
          },
          {&x});
    }
    const std::vector<std::uint8_t> labels{0, 2, nn::kUnlabeled, 1, 2};
    const std::vector<double> weights{1.0, 0.3, 0.6};
    for (nn::SoftmaxMode mode : {nn::SoftmaxMode::plane_wise, nn::SoftmaxMode::magnitude}) {
      Parameter x("x", rand_value(d, {5, 3}, rng));
      run(std::string("softmax+ace/") + (mode == nn::SoftmaxMode::plane_wise ? "plane/" : "magnitude/") + tag,
          [&](Tape& t) { return nn::ace_loss(nn::softmax_output(t.parameter(x), mode), labels, weights); }, {&x});
    }
  }
  for (const auto& act : {nn::Activation::crelu(), nn::Activation::ctanh(), nn::Activation::csigmoid(),
                          nn::Activation::modulus_relu()}) {
    Parameter x("x", Value(testutil::random_complex_away_from_zero({4, 3}, rng)));
    run("activation/" + act.name(), [&](Tape& t) { return testutil::probe(nn::activate(t.parameter(x), act)); },
        {&x});
  }
  Parameter xr("x", Value(testutil::random_real_away_from_zero({4, 3}, rng)));
  run("activation/relu/real",
      [&](Tape& t) { return testutil::probe(nn::activate(t.parameter(xr), nn::Activation::crelu())); }, {&xr});
  return out;
}

FiniteDifferenceReport model_gradient(models::ModelSpec spec, std::size_t batch, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  nn::Network net = models::build(spec, rng);
  const Shape in{batch, spec.patch_size, spec.patch_size, spec.input_channels};
  const Value x = rand_value(spec.domain, in, rng);
  const std::size_t rows = spec.family == models::Family::fcnn ? batch * spec.patch_size * spec.patch_size : batch;
  std::vector<std::uint8_t> labels(rows);
  for (auto& l : labels) l = static_cast<std::uint8_t>(uniform_index(rng, spec.classes));
  auto f = [&](Tape& t) {
    Rng r = make_rng(seed, {1});
    nn::ForwardContext ctx;
    ctx.training = true;
    ctx.rng = &r;
    return nn::ace_loss(net.forward(t, x, ctx), labels);
  };
  FiniteDifferenceOptions opt;
  opt.max_coordinates_per_parameter = 96;
  return finite_difference_check(f, net.parameters(), opt);
}

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<GradCase> cases = layer_gradients();
  const std::size_t layer_cases = cases.size();
  for (Domain d : {Domain::complex, Domain::real}) {
    const auto rep = polsar::Representation::coherency;
    cases.push_back({"mlp/" + to_string(d),
                     model_gradient(models::default_spec(models::Family::mlp, d, rep, 4, 3), 4, 1101)});
    cases.push_back({"cnn/" + to_string(d),
                     model_gradient(models::default_spec(models::Family::cnn, d, rep, 4, 12), 4, 1102)});
    models::ModelSpec fcnn = models::default_spec(models::Family::fcnn, d, rep, 4, 32);
    fcnn.widths = {2, 3, 3, 4, 4, 4, 4, 3, 3, 2, 4};
    cases.push_back({"fcnn/" + to_string(d), model_gradient(fcnn, 2, 1103)});
  }
  const double elapsed = seconds_since(t0);
  const GradCase* worst = &cases.front();
  std::size_t failed = 0;
  for (const auto& c : cases) {
    if (!c.report.passed(kGradTol)) {
      ++failed;
      std::cout << "    gradient " << c.name << " max relative error " << c.report.max_relative_error << " at "
                << c.report.worst_parameter << "\n";
    }
    if (c.report.max_relative_error > worst->report.max_relative_error) worst = &c;
  }
  return {failed == 0 && elapsed < kGradSeconds,
          fmt("%zu layer cases + %zu model cases, worst %.2e (%s), %.1f s", layer_cases, cases.size() - layer_cases,
              worst->report.max_relative_error, worst->name.c_str(), elapsed)};
}

// ---------------------------------------------------------------- 2

Outcome ace_identity() {
  Rng rng = make_rng(2001);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 16), k = 2 + uniform_index(rng, 8);
    RTensor y = testutil::random_real({n, k}, rng, -4.0, 4.0);
    y = nn::softmax_output(y);
    // Occasionally force a probability under the log floor.
    if (trial % 10 == 0) y(0, 0) = 1e-15;
    RTensor d({n, k});
    std::vector<std::size_t> truth(n);
    for (std::size_t i = 0; i < n; ++i) d(i, truth[i] = uniform_index(rng, k)) = 1.0;
    double oracle = 0.0;
    for (std::size_t i = 0; i < n; ++i) oracle -= std::log(std::max(y(i, truth[i]), 1e-12));
    oracle /= static_cast<double>(n);
    const double ace = nn::ace_loss(y, d);
    worst = std::max({worst, std::abs(ace - oracle), std::abs(ace - nn::cce_loss(y, d))});
  }
  return {worst <= kAceTol, fmt("1000 pairs, max |ACE - CCE| = %.2e", worst)};
}

// ---------------------------------------------------------------- 3

Outcome pauli_energy() {
  Rng rng = make_rng(3001);
  double worst_norm = 0.0;
  for (int i = 0; i < 100000; ++i) {
    auto c = [&] { return cplx(testutil::uniform(rng, -10, 10), testutil::uniform(rng, -10, 10)); };
    const polsar::ScatteringVector s{c(), c(), c()};
    const double ns = std::sqrt(std::norm(s.hh) + std::norm(s.hv_scaled) + std::norm(s.vv));
    const polsar::PauliVector k = polsar::scattering_to_pauli(s);
    const double nk = std::sqrt(std::norm(k[0]) + std::norm(k[1]) + std::norm(k[2]));
    worst_norm = std::max(worst_norm, std::abs(nk - ns) / std::max(1.0, ns));
  }

  const polsar::PolsarField field = polsar::generate_scene(polsar::imbalanced_recipe(64, 64, 3));
  std::size_t non_hermitian = 0, cells = 0;
  double min_eig = INFINITY;
  for (std::size_t boxcar : {1, 3, 5}) {
    const polsar::CoherencyField t = polsar::coherency_field(field, boxcar);
    for (const auto& m : t.cells) {
      ++cells;
      Eigen::Matrix3cd e;
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
          e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(i, j);
          if (m(i, j) != std::conj(m(j, i))) ++non_hermitian;
        }
      const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> es(e, Eigen::EigenvaluesOnly);
      min_eig = std::min(min_eig, es.eigenvalues().minCoeff() / std::max(1.0, e.trace().real()));
    }
  }
  return {worst_norm <= kNormTol && non_hermitian == 0 && min_eig >= kPsdTol,
          fmt("1e5 vectors, max norm gap %.2e; %zu matrices, %zu non-Hermitian, min scaled eigenvalue %.2e",
              worst_norm, cells, non_hermitian, min_eig)};
}

// ---------------------------------------------------------------- 4

std::vector<std::size_t> totals(const sampling::OccurrenceTable& t) {
  std::vector<std::size_t> out;
  for (const auto& o : t) out.push_back(o.total_pixels);
  return out;
}

Outcome balancing_oracle() {
  using namespace sampling;
  const auto fixture = testutil::airport_fixture();
  const auto copy = fixture;
  const PhaseOneResult one = remove_exceeding_one_class_images(fixture, 4);
  // Forest, Runway, Built-up, Open.
  const bool phase_one = totals(one.report.after) == std::vector<std::size_t>{2721238, 2900017, 2620141, 10797471};
  std::vector<LabelPatch> kept;
  for (auto i : one.kept) kept.push_back(fixture[i]);
  Rng rng = make_rng(4001);
  const BalanceReport two = balance_total_pixels_of_patch(kept, 4, rng);
  const bool phase_two = totals(two.after) == std::vector<std::size_t>(4, 2620141) &&
                         totals(occurrence_table(kept, 4)) == std::vector<std::size_t>(4, 2620141);

  std::size_t unequal = 0, modified = fixture == copy ? 0 : 1;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng r = make_rng(4002, {seed});
    const std::size_t classes = 2 + uniform_index(r, 4), side = 8;
    const auto labels = testutil::random_label_patches(10 + uniform_index(r, 40), side, classes, r);
    auto features = std::make_shared<const Value>(testutil::random_real({side, side * labels.size(), 2}, r));
    const Value feature_copy = *features;
    PatchSet set(features, side, LabelKind::patch);
    for (std::size_t i = 0; i < labels.size(); ++i) set.add_patch({0, i * side}, labels[i]);
    const auto res = balance_patch_set(set, classes, r);
    if (*features != feature_copy || set.label_patches() != labels) ++modified;
    std::size_t least = SIZE_MAX;
    for (const auto& o : res.phase_two.before)
      if (o.total_pixels > 0) least = std::min(least, o.total_pixels);
    const auto after = res.patches.class_counts(classes);
    for (std::size_t c = 0; c < classes; ++c)
      if (res.phase_two.before[c].total_pixels > 0 && after[c] != least) {
        ++unequal;
        break;
      }
  }
  return {phase_one && phase_two && unequal == 0 && modified == 0,
          fmt("fixture phase 1 %s, phase 2 %s; 100 random sets: %zu unequal, %zu modified inputs",
              phase_one ? "matches" : "differs", phase_two ? "matches" : "differs", unequal, modified)};
}

// ---------------------------------------------------------------- 5

Outcome real_equivalents() {
  double worst = 0.0;
  std::size_t mismatched = 0;
  std::string worst_name;
  for (auto rep : {polsar::Representation::coherency, polsar::Representation::pauli}) {
    for (auto [family, patch] : {std::pair{models::Family::mlp, 12}, {models::Family::cnn, 12},
                                 {models::Family::fcnn, 128}}) {
      const models::ModelSpec cs = models::default_spec(family, Domain::complex, rep, 4, static_cast<std::size_t>(patch));
      const models::RealEquivalent r = models::real_equivalent(cs);
      Rng rng = make_rng(5001);
      nn::Network cnet = models::build(cs, rng);
      nn::Network rnet = models::build(r.spec, rng);
      const std::size_t target = cnet.trainable_real_count(), achieved = rnet.trainable_real_count();
      if (target != r.target || achieved != r.achieved) ++mismatched;
      const double err = std::abs(static_cast<double>(achieved) - static_cast<double>(target)) /
                         static_cast<double>(target);
      std::cout << "    " << models::to_string(family) << "/" << polsar::to_string(rep) << ": complex "
                << target << " real scalars, twin " << achieved << fmt(" (%.3f%%)", 100.0 * err) << "\n";
      if (err >= worst) {
        worst = err;
        worst_name = models::to_string(family) + "/" + polsar::to_string(rep);
      }
    }
  }
  return {worst <= kParamTol && mismatched == 0,
          fmt("worst relative gap %.3f%% (%s), %zu closed-form mismatches", 100.0 * worst, worst_name.c_str(),
              mismatched)};
}

// ---------------------------------------------------------------- 6

Outcome pool_unpool() {
  Rng rng = make_rng(6001);
  std::size_t bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const CTensor x = testutil::random_complex({1, 16, 16, 1}, rng);
    const auto [pooled, where] = nn::max_pool2(x);
    const CTensor back = nn::max_unpool2(pooled, where);
    std::vector<char> chosen(x.size(), 0);
    for (std::size_t r = 0; r < 8; ++r)
      for (std::size_t c = 0; c < 8; ++c) {
        const std::size_t a = where.argmax[r * 8 + c];
        const std::size_t ar = a / 16, ac = a % 16;
        if (ar / 2 != r || ac / 2 != c) ++bad;
        for (std::size_t i = 0; i < 2; ++i)
          for (std::size_t j = 0; j < 2; ++j)
            if (std::abs(x[(2 * r + i) * 16 + 2 * c + j]) > std::abs(x[a]) * (1 + 1e-15)) ++bad;
        chosen[a] = 1;
      }
    for (std::size_t i = 0; i < x.size(); ++i) {
      const cplx v = back[i];
      if (chosen[i] ? (v.real() != x[i].real() || v.imag() != x[i].imag()) : v != cplx(0.0, 0.0)) ++bad;
    }
  }
  return {bad == 0, fmt("1000 maps, %zu violating cells", bad)};
}

// ---------------------------------------------------------------- 7

Outcome bn_statistics() {
  Rng rng = make_rng(7001);
  double worst_mean = 0.0, worst_cov = 0.0;
  for (std::size_t n : {32, 64, 256, 1024}) {
    const std::size_t channels = 3;
    CTensor x({n, 1, 1, channels});
    for (std::size_t i = 0; i < x.size(); ++i) {
      // Variance around 900 in each plane with a correlated imaginary part.
      const double u = testutil::uniform(rng, -52, 52), v = testutil::uniform(rng, -52, 52);
      x[i] = cplx(u + 7.0, 0.6 * u + 0.3 * v - 3.0);
    }
    nn::BNState state(Domain::complex, channels);
    const CTensor y = nn::complex_whiten(x, state, true);
    for (std::size_t c = 0; c < channels; ++c) {
      double mr = 0, mi = 0;
      for (std::size_t i = c; i < y.size(); i += channels) {
        mr += y[i].real();
        mi += y[i].imag();
      }
      mr /= static_cast<double>(n);
      mi /= static_cast<double>(n);
      double rr = 0, ri = 0, ii = 0;
      for (std::size_t i = c; i < y.size(); i += channels) {
        rr += (y[i].real() - mr) * (y[i].real() - mr);
        ri += (y[i].real() - mr) * (y[i].imag() - mi);
        ii += (y[i].imag() - mi) * (y[i].imag() - mi);
      }
      const double inv = 1.0 / static_cast<double>(n);
      worst_mean = std::max({worst_mean, std::abs(mr), std::abs(mi)});
      worst_cov = std::max({worst_cov, std::abs(rr * inv - 1.0), std::abs(ri * inv), std::abs(ii * inv - 1.0)});
    }
  }
  return {worst_mean < kMeanTol && worst_cov <= kCovTol,
          fmt("batches 32..1024: max |mean| %.2e, max covariance deviation %.2e", worst_mean, worst_cov)};
}

// ---------------------------------------------------------------- 8

harness::ExperimentConfig end_to_end_config(const std::string& preset, harness::Balancing balancing) {
  const nlohmann::json j = {{"name", "acceptance-" + preset},
                            {"model", {{"family", "cnn"}, {"domain", "complex"}, {"epochs", 20}}},
                            {"representation", "coherency"},
                            {"split", "random"},
                            {"trials", 1},
                            {"seed", 3},
                            {"scene", {{"preset", preset}, {"height", 256}, {"width", 256}, {"seed", 1}}}};
  harness::ExperimentConfig c = harness::config_from_json(j);
  c.balancing = balancing;
  return c;
}

Outcome end_to_end() {
  const harness::ExperimentConfig bal = end_to_end_config("balanced", harness::Balancing::none);
  double separation = INFINITY;
  for (std::size_t a = 0; a < bal.recipe.classes.size(); ++a)
    for (std::size_t b = a + 1; b < bal.recipe.classes.size(); ++b)
      separation = std::min(separation, polsar::frobenius_distance(bal.recipe.classes[a].covariance,
                                                                   bal.recipe.classes[b].covariance));
  auto t0 = std::chrono::steady_clock::now();
  const auto balanced = harness::run_experiment(bal, {});
  const double balanced_seconds = seconds_since(t0);
  const double oa = balanced.aggregate.oa.mean;

  const auto none = harness::run_experiment(end_to_end_config("imbalanced", harness::Balancing::none), {});
  const auto dataset = harness::run_experiment(end_to_end_config("imbalanced", harness::Balancing::dataset), {});
  const double aa_none = none.aggregate.aa.mean, aa_dataset = dataset.aggregate.aa.mean;
  std::cout << "    imbalanced OA none " << none.aggregate.oa.mean << ", dataset " << dataset.aggregate.oa.mean
            << "\n";
  return {separation >= kMinSeparation && oa >= kMinOA && balanced_seconds <= kTrainSeconds && aa_dataset > aa_none,
          fmt("separation %.3f, balanced OA %.4f in %.0f s; imbalanced AA none %.4f vs dataset %.4f", separation, oa,
              balanced_seconds, aa_none, aa_dataset)};
}

// ---------------------------------------------------------------- 9

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().filename() == "timing.txt") continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), root).string()] =
        std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return files;
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / ("cvnn-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  const nlohmann::json cfg = {{"name", "determinism"},
                              {"model", {{"family", "cnn"}, {"domain", "complex"}, {"epochs", 2}}},
                              {"trials", 2},
                              {"seed", 11},
                              {"scene", {{"preset", "imbalanced"}, {"height", 64}, {"width", 64}, {"seed", 4}}},
                              {"max_train_samples", 200},
                              {"max_validation_samples", 60},
                              {"max_test_samples", 500}};
  std::ofstream(dir / "config.json") << cfg.dump(2);
  int codes[2];
  for (int i = 0; i < 2; ++i) {
    const std::string cmd = std::string("\"") + CVNN_CLI_PATH + "\" run --config \"" + (dir / "config.json").string() +
                            "\" --out \"" + (dir / ("run" + std::to_string(i))).string() + "\" > /dev/null 2>&1";
    codes[i] = std::system(cmd.c_str());
  }
  const auto a = read_tree(dir / "run0"), b = read_tree(dir / "run1");
  std::size_t differing = 0;
  for (const auto& [name, body] : a) {
    auto it = b.find(name);
    if (it == b.end() || it->second != body) ++differing;
  }
  if (a.size() != b.size()) ++differing;
  fs::remove_all(dir);
  return {codes[0] == 0 && codes[1] == 0 && !a.empty() && differing == 0,
          fmt("exit codes %d/%d, %zu files compared, %zu differ", codes[0], codes[1], a.size(), differing)};
}

// ---------------------------------------------------------------- 10

Outcome split_contract() {
  std::size_t bad = 0;
  for (std::size_t w = 3; w <= 600; ++w) {
    const auto s = sampling::split_columns(w, {0.70, 0.15, 0.15});
    // Independent rule in integers: boundaries at floor(0.70 W) and floor(0.85 W).
    const std::size_t a = w * 70 / 100, b = w * 85 / 100;
    if (s[0] != std::pair<std::size_t, std::size_t>{0, a} || s[1] != std::pair<std::size_t, std::size_t>{a, b} ||
        s[2] != std::pair<std::size_t, std::size_t>{b, w})
      ++bad;
  }
  const polsar::PolsarField scene = polsar::generate_scene(polsar::imbalanced_recipe(256, 256, 1));
  const auto strips = sampling::spatial_split(scene);
  std::size_t columns = 0;
  for (const auto& s : strips) columns += s.width();
  if (columns != scene.width() || strips[0].columns(0, 1) != scene.columns(0, 1)) ++bad;

  // Classes confined to the left and right halves: validation lacks "left".
  polsar::PolsarField adversarial(8, 100, {"left", "right"});
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 100; ++c) adversarial.label(r, c) = c < 50 ? 0 : 1;
  std::string message;
  try {
    sampling::spatial_split(adversarial);
  } catch (const SplitInfeasibleError& e) {
    message = e.what();
  }
  const bool raised = message.find("left") != std::string::npos;
  return {bad == 0 && raised, fmt("%zu rule violations over widths 3..600; adversarial scene %s", bad,
                                  raised ? "raised SplitInfeasibleError" : "did not raise")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 gradient suite", gradient_suite},       {"2 ACE equals CCE on real outputs", ace_identity},
      {"3 Pauli energy and coherency", pauli_energy}, {"4 balancing oracle", balancing_oracle},
      {"5 real-equivalent sizing", real_equivalents}, {"6 pool/unpool composition", pool_unpool},
      {"7 complex BN statistics", bn_statistics},   {"8 synthetic end-to-end", end_to_end},
      {"9 determinism", determinism},               {"10 split contract", split_contract},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed") << std::endl;
  return failures ? 1 : 0;
}
