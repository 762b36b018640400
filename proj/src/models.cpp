#include "cvnn/models.hpp"

#include <cmath>

#include "cvnn/errors.hpp"

namespace cvnn::models {

using nlohmann::json;
using namespace cvnn::nn;

std::string to_string(Family f) {
  switch (f) {
    case Family::mlp: return "mlp";
    case Family::cnn: return "cnn";
    case Family::fcnn: return "fcnn";
  }
  return "?";
}

Family family_from_string(const std::string& s) {
  if (s == "mlp") return Family::mlp;
  if (s == "cnn") return Family::cnn;
  if (s == "fcnn") return Family::fcnn;
  throw ConfigError("unknown model family '" + s + "'");
}

std::vector<std::size_t> default_widths(Family family, std::size_t classes) {
  switch (family) {
    case Family::mlp: return {96, 180};
    case Family::cnn: return {6, 12};
    case Family::fcnn: return {6, 12, 24, 48, 96, 96, 48, 24, 12, 6, classes};
  }
  return {};
}

ModelSpec default_spec(Family family, Domain domain, polsar::Representation rep, std::size_t classes,
                       std::size_t patch_size) {
  ModelSpec s;
  s.family = family;
  s.domain = domain;
  s.widths = default_widths(family, classes);
  s.input_channels = polsar::channel_count(rep, domain);
  s.patch_size = patch_size;
  s.classes = classes;
  s.representation = rep;
  return s;
}

namespace {

constexpr std::size_t kKernel = 3;
constexpr std::size_t kFcnnBlocks = 11;
constexpr std::size_t kFcnnPools = 5;

// Spatial size entering the CNN's dense layer.
std::size_t cnn_final_extent(const ModelSpec& s) {
  std::size_t e = s.patch_size;
  for (std::size_t i = 0; i < s.widths.size(); ++i) {
    if (e < kKernel) return 0;
    e = e - kKernel + 1;
    if (i + 1 < s.widths.size()) e /= 2;
  }
  return e;
}

}  // namespace

void validate(const ModelSpec& s) {
  if (s.classes < 1) throw ContractError("model needs at least one class");
  if (s.input_channels < 1) throw ContractError("model needs at least one input channel");
  if (s.patch_size < 1) throw ContractError("patch size must be positive");
  for (std::size_t w : s.widths)
    if (w == 0) throw ContractError("layer widths must be positive");
  if (s.dropout < 0.0 || s.dropout >= 1.0) throw ContractError("dropout rate must lie in [0, 1)");
  Activation::from_name(s.activation);
  switch (s.family) {
    case Family::mlp:
      break;
    case Family::cnn:
      if (s.widths.empty()) throw ContractError("cnn needs at least one convolution");
      if (cnn_final_extent(s) == 0) {
        throw ContractError("patch " + std::to_string(s.patch_size) + " too small for the cnn");
      }
      break;
    case Family::fcnn:
      if (s.widths.size() != kFcnnBlocks) throw ContractError("fcnn needs 11 block widths");
      if (s.patch_size % (1u << kFcnnPools) != 0) {
        throw ContractError("fcnn patch size " + std::to_string(s.patch_size) + " is not divisible by 32");
      }
      if (s.widths.back() != s.classes) throw ContractError("last fcnn block must output one channel per class");
      // Unpooling in block i reuses the argmax of pool 10 - i, so the incoming
      // channel count must match that pool's.
      for (std::size_t i = 6; i < kFcnnBlocks; ++i) {
        if (s.widths[i - 1] != s.widths[10 - i]) {
          throw ContractError("fcnn block " + std::to_string(i + 1) + " unpools " + std::to_string(s.widths[i - 1]) +
                              " channels into a pool of " + std::to_string(s.widths[10 - i]));
        }
      }
      break;
  }
}

Network build(const ModelSpec& s, Rng& rng) {
  validate(s);
  const Domain d = s.domain;
  const Activation act = Activation::from_name(s.activation);
  std::vector<std::unique_ptr<Layer>> L;
  auto name = [](const char* base, std::size_t i) { return std::string(base) + std::to_string(i); };

  switch (s.family) {
    case Family::mlp: {
      L.push_back(std::make_unique<FlattenLayer>("flatten"));
      std::size_t in = s.patch_size * s.patch_size * s.input_channels;
      for (std::size_t i = 0; i < s.widths.size(); ++i) {
        L.push_back(std::make_unique<DenseLayer>(name("dense", i + 1), d, in, s.widths[i], rng));
        L.push_back(std::make_unique<ActivationLayer>(name("act", i + 1), act));
        if (s.dropout > 0.0) L.push_back(std::make_unique<DropoutLayer>(name("dropout", i + 1), s.dropout));
        in = s.widths[i];
      }
      L.push_back(std::make_unique<DenseLayer>(name("dense", s.widths.size() + 1), d, in, s.classes, rng));
      break;
    }
    case Family::cnn: {
      std::size_t in = s.input_channels;
      for (std::size_t i = 0; i < s.widths.size(); ++i) {
        L.push_back(std::make_unique<Conv2DLayer>(name("conv", i + 1), d, in, s.widths[i], kKernel, Padding::valid, rng));
        L.push_back(std::make_unique<ActivationLayer>(name("act", i + 1), act));
        if (i + 1 < s.widths.size()) L.push_back(std::make_unique<AvgPoolLayer>(name("avgpool", i + 1)));
        in = s.widths[i];
      }
      const std::size_t e = cnn_final_extent(s);
      L.push_back(std::make_unique<FlattenLayer>("flatten"));
      L.push_back(std::make_unique<DenseLayer>("dense", d, e * e * in, s.classes, rng));
      break;
    }
    case Family::fcnn: {
      std::size_t in = s.input_channels;
      for (std::size_t i = 0; i < kFcnnBlocks; ++i) {
        const std::size_t b = i + 1;
        if (i > kFcnnPools) {
          L.push_back(std::make_unique<MaxUnpoolLayer>(name("unpool", b), static_cast<int>(10 - i)));
        }
        L.push_back(std::make_unique<Conv2DLayer>(name("conv", b), d, in, s.widths[i], kKernel, Padding::same, rng));
        L.push_back(std::make_unique<BatchNormLayer>(name("bn", b), d, s.widths[i]));
        if (i + 1 < kFcnnBlocks) L.push_back(std::make_unique<ActivationLayer>(name("act", b), act));
        if (i < kFcnnPools) L.push_back(std::make_unique<MaxPoolLayer>(name("maxpool", b), static_cast<int>(i)));
        in = s.widths[i];
      }
      break;
    }
  }
  L.push_back(std::make_unique<SoftmaxLayer>("softmax", s.softmax));
  return Network(d, std::move(L));
}

namespace {

// (complex-or-real entries, extra real scalars) of the weights and biases.
struct Count {
  std::size_t entries = 0;  // complex entries in complex specs, reals otherwise
  std::size_t real_only = 0;  // complex BN scale, always real
};

Count count(const ModelSpec& s) {
  Count c;
  auto dense = [&](std::size_t in, std::size_t out) { c.entries += in * out + out; };
  auto conv = [&](std::size_t in, std::size_t out) { c.entries += kKernel * kKernel * in * out + out; };
  switch (s.family) {
    case Family::mlp: {
      std::size_t in = s.patch_size * s.patch_size * s.input_channels;
      for (std::size_t w : s.widths) {
        dense(in, w);
        in = w;
      }
      dense(in, s.classes);
      break;
    }
    case Family::cnn: {
      std::size_t in = s.input_channels;
      for (std::size_t w : s.widths) {
        conv(in, w);
        in = w;
      }
      const std::size_t e = cnn_final_extent(s);
      dense(e * e * in, s.classes);
      break;
    }
    case Family::fcnn: {
      std::size_t in = s.input_channels;
      for (std::size_t w : s.widths) {
        conv(in, w);
        if (s.domain == Domain::complex) {
          c.entries += w;        // shift
          c.real_only += 3 * w;  // 2x2 symmetric scale
        } else {
          c.entries += 2 * w;  // shift and scale
        }
        in = w;
      }
      break;
    }
  }
  return c;
}

}  // namespace

std::size_t real_parameter_count(const ModelSpec& s) {
  const Count c = count(s);
  return (s.domain == Domain::complex ? 2 * c.entries : c.entries) + c.real_only;
}

std::size_t complex_parameter_count(const ModelSpec& s) {
  return s.domain == Domain::complex ? count(s).entries : 0;
}

RealEquivalent real_equivalent(const ModelSpec& cs) {
  if (cs.domain != Domain::complex) throw ContractError("real_equivalent expects a complex spec");
  validate(cs);
  RealEquivalent out;
  out.target = real_parameter_count(cs);

  ModelSpec rs = cs;
  rs.domain = Domain::real;
  rs.input_channels = cs.representation ? polsar::channel_count(*cs.representation, Domain::real)
                                        : 2 * cs.input_channels;
  const std::size_t scaled = cs.family == Family::fcnn ? cs.widths.size() - 1 : cs.widths.size();
  if (scaled == 0) {
    out.spec = rs;
    out.achieved = real_parameter_count(rs);
    return out;
  }

  // The first width runs over [1, 8192] in steps of 1/64 and every scaled
  // width is rounded from its ratio, so deeper layers can move by one unit
  // between integer first widths.
  constexpr std::size_t kSubsteps = 64;
  std::size_t best_gap = SIZE_MAX;
  for (std::size_t step = kSubsteps; step <= 8192 * kSubsteps; ++step) {
    const double x = static_cast<double>(step) / static_cast<double>(kSubsteps);
    ModelSpec trial = rs;
    for (std::size_t i = 0; i < scaled; ++i) {
      const double r = static_cast<double>(cs.widths[i]) / static_cast<double>(cs.widths[0]);
      trial.widths[i] = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(r * x)));
    }
    const std::size_t n = real_parameter_count(trial);
    const std::size_t gap = n > out.target ? n - out.target : out.target - n;
    if (gap < best_gap) {
      best_gap = gap;
      out.spec = trial;
      out.achieved = n;
    }
    if (n > out.target && gap > best_gap) break;  // counts grow with x
  }
  return out;
}

json to_json(const ModelSpec& s) {
  json j = {{"family", to_string(s.family)},
            {"domain", cvnn::to_string(s.domain)},
            {"widths", s.widths},
            {"input_channels", s.input_channels},
            {"patch_size", s.patch_size},
            {"classes", s.classes},
            {"activation", s.activation},
            {"dropout", s.dropout},
            {"softmax", s.softmax == SoftmaxMode::plane_wise ? "plane_wise" : "magnitude"},
            {"learning_rate", s.learning_rate},
            {"beta1", s.beta1},
            {"beta2", s.beta2},
            {"epsilon", s.epsilon},
            {"epochs", s.epochs},
            {"batch_size", s.batch_size}};
  if (s.representation) j["representation"] = polsar::to_string(*s.representation);
  return j;
}

ModelSpec spec_from_json(const json& j, ModelSpec s) {
  try {
    if (j.contains("family")) s.family = family_from_string(j.at("family").get<std::string>());
    if (j.contains("domain")) s.domain = domain_from_string(j.at("domain").get<std::string>());
    if (j.contains("representation")) {
      s.representation = polsar::representation_from_string(j.at("representation").get<std::string>());
    }
    s.widths = j.value("widths", s.widths);
    s.input_channels = j.value("input_channels", s.input_channels);
    s.patch_size = j.value("patch_size", s.patch_size);
    s.classes = j.value("classes", s.classes);
    s.activation = j.value("activation", s.activation);
    s.dropout = j.value("dropout", s.dropout);
    if (j.contains("softmax")) {
      const auto m = j.at("softmax").get<std::string>();
      if (m == "plane_wise") {
        s.softmax = SoftmaxMode::plane_wise;
      } else if (m == "magnitude") {
        s.softmax = SoftmaxMode::magnitude;
      } else {
        throw ConfigError("unknown softmax mode '" + m + "'");
      }
    }
    s.learning_rate = j.value("learning_rate", s.learning_rate);
    s.beta1 = j.value("beta1", s.beta1);
    s.beta2 = j.value("beta2", s.beta2);
    s.epsilon = j.value("epsilon", s.epsilon);
    s.epochs = j.value("epochs", s.epochs);
    s.batch_size = j.value("batch_size", s.batch_size);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed model spec: ") + e.what());
  }
  return s;
}

}  // namespace cvnn::models
