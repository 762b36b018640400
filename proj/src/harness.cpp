#include "cvnn/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "cvnn/errors.hpp"
#include "cvnn/nn/checkpoint.hpp"
#include "cvnn/nn/optim.hpp"

namespace cvnn::harness {

using nlohmann::json;
using models::Family;
using sampling::LabelKind;
using sampling::PatchSet;

std::string to_string(SplitMode m) { return m == SplitMode::random_sampling ? "random" : "spatial"; }

std::string to_string(Balancing b) {
  switch (b) {
    case Balancing::none: return "none";
    case Balancing::dataset: return "dataset";
    case Balancing::weighted_loss: return "weighted";
  }
  return "?";
}

namespace {

SplitMode split_from(const std::string& s) {
  if (s == "random" || s == "random-sampling") return SplitMode::random_sampling;
  if (s == "spatial" || s == "spatial-split") return SplitMode::spatial;
  throw ConfigError("unknown split mode '" + s + "'");
}

Balancing balancing_from(const std::string& s) {
  if (s == "none") return Balancing::none;
  if (s == "dataset") return Balancing::dataset;
  if (s == "weighted" || s == "weighted-loss") return Balancing::weighted_loss;
  throw ConfigError("unknown balancing '" + s + "'");
}

std::size_t default_epochs(Family f) { return f == Family::fcnn ? 200 : 100; }
std::size_t default_patch(Family f) { return f == Family::fcnn ? 128 : 12; }
std::size_t default_stride(Family f) { return f == Family::fcnn ? 25 : 1; }

}  // namespace

ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    c.name = j.value("name", c.name);
    const json model = j.value("model", json::object());
    const Family family = models::family_from_string(model.value("family", std::string("cnn")));
    const Domain domain = domain_from_string(model.value("domain", std::string("complex")));
    c.representation = polsar::representation_from_string(j.value("representation", std::string("coherency")));
    models::ModelSpec base = models::default_spec(family, domain, c.representation, 4, default_patch(family));
    base.epochs = default_epochs(family);
    c.model = models::spec_from_json(model, base);
    c.model.family = family;
    c.model.domain = domain;
    c.explicit_widths = model.contains("widths");

    c.split = split_from(j.value("split", std::string("random")));
    c.balancing = balancing_from(j.value("balancing", std::string("none")));
    c.trials = j.value("trials", c.trials);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    c.boxcar = j.value("boxcar", c.boxcar);
    c.stride = j.value("stride", default_stride(family));
    c.train_rate = j.value("train_rate", c.train_rate);
    c.validation_rate = j.value("validation_rate", c.validation_rate);
    if (j.contains("split_fractions")) c.split_fractions = j.at("split_fractions").get<std::array<double, 3>>();
    c.max_train_samples = j.value("max_train_samples", c.max_train_samples);
    c.max_validation_samples = j.value("max_validation_samples", c.max_validation_samples);
    c.max_test_samples = j.value("max_test_samples", c.max_test_samples);
    c.balance_per_class = j.value("balance_per_class", c.balance_per_class);
    c.patience = j.value("patience", c.patience);
    c.save_checkpoints = j.value("save_checkpoints", c.save_checkpoints);
    c.real_equivalent = j.value("real_equivalent", c.real_equivalent);

    const json scene = j.value("scene", json::object());
    if (scene.contains("file")) {
      std::filesystem::path p = scene.at("file").get<std::string>();
      c.scene_file = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    } else {
      c.recipe = polsar::recipe_from_json(scene);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  if (c.trials < 1) throw ConfigError("trials must be at least 1");
  if (c.threads < 1) throw ConfigError("threads must be at least 1");
  if (c.boxcar % 2 == 0) throw ConfigError("boxcar must be odd");
  if (c.stride < 1) throw ConfigError("stride must be at least 1");
  if (c.model.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (c.train_rate <= 0.0 || c.validation_rate < 0.0 || c.train_rate + c.validation_rate >= 1.0) {
    throw ConfigError("train_rate and validation_rate must be positive and sum below 1");
  }
  try {
    models::ModelSpec probe = c.model;
    probe.input_channels = polsar::channel_count(c.representation, c.model.domain);
    probe.classes = c.model.family == Family::fcnn && c.explicit_widths ? c.model.widths.back() : probe.classes;
    if (!c.explicit_widths) probe.widths = models::default_widths(probe.family, probe.classes);
    models::validate(probe);
  } catch (const ContractError& e) {
    throw ConfigError(std::string("invalid model: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

json to_json(const ExperimentConfig& c) {
  json j = {{"name", c.name},
            {"model", models::to_json(c.model)},
            {"representation", polsar::to_string(c.representation)},
            {"split", to_string(c.split)},
            {"balancing", to_string(c.balancing)},
            {"trials", c.trials},
            {"seed", c.seed},
            {"boxcar", c.boxcar},
            {"stride", c.stride},
            {"train_rate", c.train_rate},
            {"validation_rate", c.validation_rate},
            {"split_fractions", c.split_fractions},
            {"max_train_samples", c.max_train_samples},
            {"max_validation_samples", c.max_validation_samples},
            {"max_test_samples", c.max_test_samples},
            {"balance_per_class", c.balance_per_class},
            {"patience", c.patience},
            {"real_equivalent", c.real_equivalent}};
  if (c.scene_file) {
    j["scene"] = {{"file", c.scene_file->string()}};
  } else {
    j["scene"] = polsar::recipe_to_json(c.recipe);
  }
  if (c.model.family == Family::fcnn && c.balancing == Balancing::weighted_loss) {
    j["note"] = "weighted loss with fcnn is supported but was reported to perform poorly";
  }
  return j;
}

models::ModelSpec resolve_model(const ExperimentConfig& c, std::size_t classes) {
  models::ModelSpec s = c.model;
  s.classes = classes;
  s.representation = c.representation;
  s.input_channels = polsar::channel_count(c.representation, s.domain);
  if (!c.explicit_widths) {
    s.widths = models::default_widths(s.family, classes);
    if (s.domain == Domain::real && c.real_equivalent) {
      models::ModelSpec twin = s;
      twin.domain = Domain::complex;
      twin.input_channels = polsar::channel_count(c.representation, Domain::complex);
      s.widths = models::real_equivalent(twin).spec.widths;
    }
  } else if (s.family == Family::fcnn && !s.widths.empty()) {
    s.widths.back() = classes;
  }
  models::validate(s);
  return s;
}

// ---------------------------------------------------------------- datasets

namespace {

enum Stream : std::uint64_t { kSampling = 1, kBalance = 2, kInit = 3, kTrain = 4, kCap = 5 };

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

PatchSet cap(const PatchSet& set, std::size_t max, Rng& rng) {
  if (max == 0 || set.size() <= max) return set;
  auto idx = iota(set.size());
  shuffle(idx.begin(), idx.end(), rng);
  idx.resize(max);
  std::sort(idx.begin(), idx.end());
  return set.subset(idx);
}

std::shared_ptr<const Value> encode(const ExperimentConfig& c, const polsar::PolsarField& f) {
  return std::make_shared<const Value>(polsar::encode_field(f, c.representation, c.model.domain, c.boxcar));
}

std::vector<std::uint8_t> masked(std::span<const std::uint8_t> labels, std::span<const std::size_t> keep) {
  std::vector<std::uint8_t> out(labels.size(), sampling::kUnlabeled);
  for (std::size_t i : keep) out[i] = labels[i];
  return out;
}

bool has_label(const sampling::LabelPatch& p) {
  return std::any_of(p.begin(), p.end(), [](auto l) { return l != sampling::kUnlabeled; });
}

PatchSet labeled_patches(const PatchSet& set) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < set.size(); ++i)
    if (has_label(set.label_patches()[i])) keep.push_back(i);
  return set.subset(keep);
}

}  // namespace

Dataset prepare_dataset(const ExperimentConfig& c, const polsar::PolsarField& field, std::size_t trial) {
  const std::size_t classes = field.classes();
  const std::size_t patch = c.model.patch_size;
  Rng rng = make_rng(c.seed, {trial, kSampling});
  Rng cap_rng = make_rng(c.seed, {trial, kCap});
  Dataset d;
  d.class_names = field.class_names();

  if (c.model.family != Family::fcnn) {
    if (c.split == SplitMode::random_sampling) {
      const auto features = encode(c, field);
      const PatchSet all = sampling::sliding_window(features, field.labels(), patch, 1, LabelKind::center);
      const auto split = sampling::sample_pixels(all.centers(), c.train_rate, c.validation_rate, rng);
      d.train = all.subset(split.train);
      d.validation = all.subset(split.validation);
      d.test = all.subset(split.test);
    } else {
      const auto strips = sampling::spatial_split(field, c.split_fractions);
      PatchSet* sets[3] = {&d.train, &d.validation, &d.test};
      for (std::size_t s = 0; s < 3; ++s) {
        *sets[s] = sampling::sliding_window(encode(c, strips[s]), strips[s].labels(), patch, c.stride,
                                            LabelKind::center);
      }
    }
    d.train_counts_before = d.train.class_counts(classes);
    if (c.balancing == Balancing::dataset) {
      std::size_t m = *std::min_element(d.train_counts_before.begin(), d.train_counts_before.end());
      if (c.balance_per_class > 0) m = std::min(m, c.balance_per_class);
      Rng brng = make_rng(c.seed, {trial, kBalance});
      const auto pool = iota(d.train.size());
      const auto pick = sampling::balanced_pixel_sampling(d.train.centers(), pool, classes, m, brng, d.class_names);
      d.train = d.train.subset(pick);
    }
  } else {
    if (c.split == SplitMode::random_sampling) {
      const auto features = encode(c, field);
      const auto split = sampling::sample_pixels(field.labels(), c.train_rate, c.validation_rate, rng);
      const auto train_grid = masked(field.labels(), split.train);
      d.validation_labels = masked(field.labels(), split.validation);
      d.test_labels = masked(field.labels(), split.test);
      d.train = labeled_patches(sampling::sliding_window(features, train_grid, patch, c.stride, LabelKind::patch));
      d.validation = labeled_patches(
          sampling::sliding_window(features, d.validation_labels, patch, c.stride, LabelKind::patch));
      d.test = sampling::sliding_window(features, d.test_labels, patch, c.stride, LabelKind::patch);
    } else {
      const auto strips = sampling::spatial_split(field, c.split_fractions);
      d.train = labeled_patches(
          sampling::sliding_window(encode(c, strips[0]), strips[0].labels(), patch, c.stride, LabelKind::patch));
      d.validation_labels = strips[1].labels();
      d.test_labels = strips[2].labels();
      d.validation = labeled_patches(
          sampling::sliding_window(encode(c, strips[1]), strips[1].labels(), patch, c.stride, LabelKind::patch));
      d.test = sampling::sliding_window(encode(c, strips[2]), strips[2].labels(), patch, c.stride, LabelKind::patch);
    }
    d.train_counts_before = d.train.class_counts(classes);
    if (c.balancing == Balancing::dataset) {
      Rng brng = make_rng(c.seed, {trial, kBalance});
      d.balance = sampling::balance_patch_set(d.train, classes, brng);
      d.train = d.balance->patches;
    }
  }

  d.train = cap(d.train, c.max_train_samples, cap_rng);
  d.validation = cap(d.validation, c.max_validation_samples, cap_rng);
  if (c.model.family != Family::fcnn) d.test = cap(d.test, c.max_test_samples, cap_rng);
  d.train_counts_after = d.train.class_counts(classes);
  if (d.train.size() == 0) throw ConfigError("training set is empty");

  if (c.balancing == Balancing::weighted_loss) {
    for (std::size_t k = 0; k < classes; ++k) {
      if (d.train_counts_after[k] == 0) {
        throw ConfigError("class '" + d.class_names[k] + "' has no training samples for loss weighting");
      }
    }
    d.class_weights = sampling::weighted_loss_weights(d.train_counts_after);
  }
  return d;
}

// ---------------------------------------------------------------- training

TrainOptions train_options(const models::ModelSpec& s, std::size_t patience, std::uint64_t seed) {
  TrainOptions o;
  o.learning_rate = s.learning_rate;
  o.beta1 = s.beta1;
  o.beta2 = s.beta2;
  o.epsilon = s.epsilon;
  o.epochs = s.epochs;
  o.batch_size = s.batch_size;
  o.patience = patience;
  o.seed = seed;
  return o;
}

std::vector<EpochRecord> train(nn::Network& net, const PatchSet& train_set, const PatchSet* validation,
                               std::span<const double> class_weights, const TrainOptions& o, std::size_t classes) {
  if (train_set.size() == 0) throw ContractError("training set is empty");
  nn::Adam adam(net.parameters(), {o.learning_rate, o.beta1, o.beta2, o.epsilon});
  Rng order_rng = make_rng(o.seed, {0});
  Rng dropout_rng = make_rng(o.seed, {1});

  std::vector<EpochRecord> history;
  double best = -1.0;
  std::size_t stale = 0;
  auto order = iota(train_set.size());
  for (std::size_t epoch = 0; epoch < o.epochs; ++epoch) {
    shuffle(order.begin(), order.end(), order_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += o.batch_size) {
      const std::size_t end = std::min(order.size(), start + o.batch_size);
      // A lone trailing sample gives batch norm no statistics; it is
      // reshuffled into a full batch next epoch.
      if (end - start == 1 && order.size() > 1) continue;
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const auto labels = train_set.batch_labels(idx);
      if (std::all_of(labels.begin(), labels.end(), [](auto l) { return l == sampling::kUnlabeled; })) continue;

      Tape tape;
      nn::ForwardContext ctx;
      ctx.training = true;
      ctx.rng = &dropout_rng;
      const Var y = net.forward(tape, train_set.batch(idx), ctx);
      const Var loss = nn::ace_loss(y, labels, class_weights);
      const double value = loss.value().real()[0];
      if (!std::isfinite(value)) {
        throw NumericError("non-finite loss " + std::to_string(value) + " at epoch " + std::to_string(epoch + 1) +
                           ", batch " + std::to_string(batches + 1));
      }
      tape.backward(loss);
      adam.step();
      loss_sum += value;
      ++batches;
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    if (validation != nullptr && validation->size() > 0) {
      const auto cm = evaluate(net, *validation, classes);
      if (cm.total() > 0) rec.validation_oa = nn::metrics(cm).overall_accuracy;
    }
    history.push_back(rec);

    if (o.patience > 0 && !std::isnan(rec.validation_oa)) {
      if (rec.validation_oa > best) {
        best = rec.validation_oa;
        stale = 0;
      } else if (++stale >= o.patience) {
        break;
      }
    }
  }
  return history;
}

nn::ConfusionMatrix evaluate(nn::Network& net, const PatchSet& set, std::size_t classes, std::size_t batch_size) {
  nn::ConfusionMatrix cm(classes);
  const std::size_t bs = set.kind() == LabelKind::center ? batch_size : std::max<std::size_t>(1, batch_size / 16);
  const auto all = iota(set.size());
  for (std::size_t start = 0; start < all.size(); start += bs) {
    const std::span<const std::size_t> idx(all.data() + start, std::min(all.size(), start + bs) - start);
    const auto labels = set.batch_labels(idx);
    const auto pred = nn::prediction(net.predict(set.batch(idx)));
    for (std::size_t r = 0; r < labels.size(); ++r) {
      if (labels[r] != sampling::kUnlabeled) cm.add(labels[r], pred[r]);
    }
  }
  return cm;
}

namespace {

// Window offsets that cover the whole extent: the regular grid plus a final
// window flush with the far edge.
std::vector<std::size_t> cover_offsets(std::size_t extent, std::size_t size, std::size_t stride) {
  auto v = sampling::window_offsets(extent, size, stride);
  if (v.back() + size < extent) v.push_back(extent - size);
  return v;
}

}  // namespace

nn::ConfusionMatrix evaluate_dense(nn::Network& net, const Value& features, std::span<const std::uint8_t> labels,
                                   std::size_t patch, std::size_t stride, std::size_t classes) {
  const std::size_t h = features.shape()[0], w = features.shape()[1];
  if (labels.size() != h * w) throw DimensionError("label grid does not match the feature map");
  std::vector<double> score(h * w * classes, 0.0);
  PatchSet windows(std::make_shared<const Value>(features), patch, LabelKind::center);
  for (std::size_t r : cover_offsets(h, patch, stride))
    for (std::size_t c : cover_offsets(w, patch, stride)) windows.add_center({r, c}, 0);

  constexpr std::size_t kBatch = 4;
  const auto all = iota(windows.size());
  for (std::size_t start = 0; start < all.size(); start += kBatch) {
    const std::span<const std::size_t> idx(all.data() + start, std::min(all.size(), start + kBatch) - start);
    const Value y = net.predict(windows.batch(idx));
    y.visit([&](const auto& t) {
      for (std::size_t n = 0; n < idx.size(); ++n) {
        const auto& o = windows.origins()[idx[n]];
        for (std::size_t i = 0; i < patch; ++i) {
          for (std::size_t j = 0; j < patch; ++j) {
            double* s = &score[((o.row + i) * w + o.col + j) * classes];
            const auto* p = t.data() + ((n * patch + i) * patch + j) * classes;
            for (std::size_t k = 0; k < classes; ++k) {
              if constexpr (is_complex_v<std::decay_t<decltype(p[k])>>) {
                s[k] += 0.5 * (p[k].real() + p[k].imag());
              } else {
                s[k] += p[k];
              }
            }
          }
        }
      }
    });
  }

  nn::ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < h * w; ++i) {
    if (labels[i] == sampling::kUnlabeled) continue;
    const double* s = &score[i * classes];
    cm.add(labels[i], static_cast<std::size_t>(std::max_element(s, s + classes) - s));
  }
  return cm;
}

TrialResult run_trial(const ExperimentConfig& c, const polsar::PolsarField& field, std::size_t trial,
                      const std::filesystem::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t classes = field.classes();
  Dataset d = prepare_dataset(c, field, trial);
  const models::ModelSpec spec = resolve_model(c, classes);
  Rng init = make_rng(c.seed, {trial, kInit});
  nn::Network net = models::build(spec, init);

  TrialResult r;
  r.trial = trial;
  const std::uint64_t train_seed = make_rng(c.seed, {trial, kTrain})();
  r.history = train(net, d.train, &d.validation, d.class_weights, train_options(spec, c.patience, train_seed), classes);
  r.epochs_run = r.history.size();
  if (spec.family == Family::fcnn) {
    r.confusion = evaluate_dense(net, d.test.features(), d.test_labels, spec.patch_size, c.stride, classes);
  } else {
    r.confusion = evaluate(net, d.test, classes);
  }
  r.metrics = nn::metrics(r.confusion);
  r.balance = std::move(d.balance);
  r.train_counts_before = std::move(d.train_counts_before);
  r.train_counts_after = std::move(d.train_counts_after);
  if (c.save_checkpoints && !out_dir.empty()) {
    std::filesystem::create_directories(out_dir / "checkpoints");
    nn::save_checkpoint(net, out_dir / "checkpoints" / ("trial_" + std::to_string(trial)));
  }
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

// ---------------------------------------------------------------- aggregation

Stat summarize(std::span<const double> v) {
  Stat s;
  if (v.empty()) {
    s.mean = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  const auto n = static_cast<double>(v.size());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / (n - 1.0));
    s.half_width = 1.96 * s.sd / std::sqrt(n);
  }
  return s;
}

AggregateResult aggregate(std::span<const TrialResult> trials, std::size_t classes) {
  AggregateResult a;
  a.trials = trials.size();
  a.sd_undefined = trials.size() < 2;
  std::vector<double> oa, aa;
  std::vector<std::vector<double>> pc(classes);
  for (const auto& t : trials) {
    oa.push_back(t.metrics.overall_accuracy);
    aa.push_back(t.metrics.average_accuracy);
    for (std::size_t k = 0; k < classes && k < t.metrics.per_class.size(); ++k)
      if (!std::isnan(t.metrics.per_class[k])) pc[k].push_back(t.metrics.per_class[k]);
  }
  a.oa = summarize(oa);
  a.aa = summarize(aa);
  for (const auto& v : pc) a.per_class.push_back(summarize(v));
  return a;
}

polsar::PolsarField load_field(const ExperimentConfig& c) {
  if (c.scene_file) return polsar::read_scene(*c.scene_file);
  return polsar::generate_scene(c.recipe);
}

// ---------------------------------------------------------------- outputs

namespace {

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  std::ostringstream os;
  os << std::setprecision(12) << x;
  return os.str();
}

json stat_json(const Stat& s) {
  auto f = [](double x) { return std::isnan(x) ? json(nullptr) : json(x); };
  return {{"mean", f(s.mean)}, {"sd", f(s.sd)}, {"half_width", f(s.half_width)}};
}

void write_outputs(const ExperimentConfig& c, const ExperimentResult& res, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const auto& names = res.class_names;
  {
    std::ofstream os(dir / "config.json");
    json j = to_json(c);
    j["resolved_model"] = models::to_json(resolve_model(c, names.size()));
    os << j.dump(2) << '\n';
  }
  {
    std::ofstream os(dir / "trials.csv");
    os << "trial,oa,aa";
    for (const auto& n : names) os << ',' << n;
    os << ",epochs_run\n";
    for (const auto& t : res.trials) {
      os << t.trial << ',' << num(t.metrics.overall_accuracy) << ',' << num(t.metrics.average_accuracy);
      for (double x : t.metrics.per_class) os << ',' << num(x);
      os << ',' << t.epochs_run << '\n';
    }
  }
  {
    std::ofstream os(dir / "confusion.csv");
    os << "trial,truth,predicted,count\n";
    for (const auto& t : res.trials)
      for (std::size_t i = 0; i < names.size(); ++i)
        for (std::size_t j = 0; j < names.size(); ++j)
          os << t.trial << ',' << names[i] << ',' << names[j] << ',' << t.confusion(i, j) << '\n';
  }
  {
    std::ofstream os(dir / "history.csv");
    os << "trial,epoch,loss,validation_oa\n";
    for (const auto& t : res.trials)
      for (const auto& e : t.history)
        os << t.trial << ',' << e.epoch << ',' << num(e.loss) << ',' << num(e.validation_oa) << '\n';
  }
  {
    std::ofstream os(dir / "per_class.csv");
    os << "class,mean,sd,half_width\n";
    for (std::size_t k = 0; k < names.size() && k < res.aggregate.per_class.size(); ++k) {
      const auto& s = res.aggregate.per_class[k];
      os << names[k] << ',' << num(s.mean) << ',' << num(s.sd) << ',' << num(s.half_width) << '\n';
    }
  }
  {
    std::ofstream os(dir / "class_counts.csv");
    os << "trial,class,before,after\n";
    for (const auto& t : res.trials)
      for (std::size_t k = 0; k < names.size() && k < t.train_counts_before.size(); ++k)
        os << t.trial << ',' << names[k] << ',' << t.train_counts_before[k] << ',' << t.train_counts_after[k] << '\n';
  }
  for (const auto& t : res.trials) {
    if (!t.balance) continue;
    const std::string stem = "balance_trial_" + std::to_string(t.trial);
    std::ofstream os(dir / (stem + ".csv"));
    sampling::write_occurrence_csv(os, t.balance->phase_one.before, names, "before", true);
    sampling::write_occurrence_csv(os, t.balance->phase_one.after, names, "after_phase1", false);
    sampling::write_occurrence_csv(os, t.balance->phase_two.after, names, "after_phase2", false);
    std::ofstream log(dir / (stem + "_removals.csv"));
    auto entries = t.balance->phase_one.log;
    entries.insert(entries.end(), t.balance->phase_two.log.begin(), t.balance->phase_two.log.end());
    sampling::write_removal_log_csv(log, entries, names);
  }
  {
    const auto& a = res.aggregate;
    json pc = json::object();
    for (std::size_t k = 0; k < names.size() && k < a.per_class.size(); ++k) pc[names[k]] = stat_json(a.per_class[k]);
    json j = {{"name", c.name},
              {"trials", a.trials},
              {"completed", res.trials.size()},
              {"oa", stat_json(a.oa)},
              {"aa", stat_json(a.aa)},
              {"per_class", pc},
              {"sd_undefined", a.sd_undefined},
              {"interval", "mean +/- 1.96 * sample sd / sqrt(trials), normal approximation"}};
    std::ofstream os(dir / "aggregate.json");
    os << j.dump(2) << '\n';
  }
  {
    std::ofstream os(dir / "timing.txt");
    for (const auto& t : res.trials) os << "trial " << t.trial << ' ' << t.wall_seconds << " s\n";
  }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& c, const std::filesystem::path& out_dir) {
  const polsar::PolsarField field = load_field(c);
  ExperimentResult res;
  res.class_names = field.class_names();
  if (c.split == SplitMode::spatial) sampling::spatial_split(field, c.split_fractions);  // fail fast

  std::vector<std::optional<TrialResult>> slots(c.trials);
  std::vector<std::exception_ptr> errors(c.trials);
  std::mutex mu;
  std::size_t next = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t t;
      {
        std::lock_guard lock(mu);
        if (next >= c.trials) return;
        t = next++;
      }
      try {
        slots[t] = run_trial(c, field, t, out_dir);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::min(c.threads, c.trials);
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (auto& s : slots)
    if (s) res.trials.push_back(std::move(*s));
  res.aggregate = aggregate(res.trials, field.classes());
  if (!out_dir.empty() && !res.trials.empty()) write_outputs(c, res, out_dir);
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return res;
}

// ---------------------------------------------------------------- grid

ComparisonTable compare_grid(std::span<const GridEntry> entries) {
  if (entries.size() < 2) throw ContractError("a comparison grid needs at least two experiments");
  const auto& names = entries.front().result.class_names;
  for (const auto& e : entries) {
    if (e.result.class_names.size() != names.size()) {
      throw ContractError("experiment '" + e.config.name + "' has a different class count");
    }
  }
  // Metrics shared by every experiment.
  std::vector<std::string> metrics = {"OA", "AA"};
  for (const auto& n : names) {
    const bool shared = std::all_of(entries.begin(), entries.end(), [&](const GridEntry& e) {
      return std::find(e.result.class_names.begin(), e.result.class_names.end(), n) != e.result.class_names.end();
    });
    if (shared) metrics.push_back(n);
  }

  ComparisonTable t;
  const polsar::Representation reps[] = {polsar::Representation::coherency, polsar::Representation::pauli};
  const Domain domains[] = {Domain::complex, Domain::real};
  std::map<std::string, std::size_t> col_of;
  for (auto rep : reps) {
    for (auto d : domains) {
      const std::string col = polsar::to_string(rep) + "/" + cvnn::to_string(d);
      const bool used = std::any_of(entries.begin(), entries.end(), [&](const GridEntry& e) {
        return e.config.representation == rep && e.config.model.domain == d;
      });
      if (used) {
        col_of[col] = t.columns.size();
        t.columns.push_back(col);
      }
    }
  }
  std::map<std::string, std::size_t> row_of;
  for (Family f : {Family::mlp, Family::cnn, Family::fcnn}) {
    const bool used = std::any_of(entries.begin(), entries.end(),
                                  [&](const GridEntry& e) { return e.config.model.family == f; });
    if (!used) continue;
    for (const auto& m : metrics) {
      const std::string row = models::to_string(f) + "/" + m;
      row_of[row] = t.rows.size();
      t.rows.push_back(row);
    }
  }
  t.cells.assign(t.rows.size(), std::vector<std::optional<GridCell>>(t.columns.size()));

  for (const auto& e : entries) {
    const std::size_t col =
        col_of.at(polsar::to_string(e.config.representation) + "/" + cvnn::to_string(e.config.model.domain));
    const std::string fam = models::to_string(e.config.model.family);
    const auto& a = e.result.aggregate;
    for (const auto& m : metrics) {
      Stat s;
      if (m == "OA") {
        s = a.oa;
      } else if (m == "AA") {
        s = a.aa;
      } else {
        const auto& cn = e.result.class_names;
        s = a.per_class.at(static_cast<std::size_t>(std::find(cn.begin(), cn.end(), m) - cn.begin()));
      }
      auto& cell = t.cells[row_of.at(fam + "/" + m)][col];
      if (cell) throw ContractError("two experiments fill cell " + fam + "/" + m + " x " + t.columns[col]);
      cell = GridCell{s.mean, s.half_width, false};
    }
  }
  for (auto& row : t.cells) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& c : row)
      if (c && !std::isnan(c->mean)) best = std::max(best, c->mean);
    for (auto& c : row)
      if (c && c->mean == best) c->best = true;
  }
  return t;
}

void write_table_csv(std::ostream& os, const ComparisonTable& t) {
  os << "row";
  for (const auto& c : t.columns) os << ',' << c;
  os << '\n';
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    os << t.rows[r];
    for (const auto& cell : t.cells[r]) {
      os << ',';
      if (!cell) continue;
      std::ostringstream v;
      v << std::fixed << std::setprecision(2) << 100.0 * cell->mean << " +/- " << 100.0 * cell->half_width;
      os << (cell->best ? "**" + v.str() + "**" : v.str());
    }
    os << '\n';
  }
}

json to_json(const ComparisonTable& t) {
  json rows = json::array();
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    json cells = json::object();
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      const auto& cell = t.cells[r][c];
      if (!cell) continue;
      cells[t.columns[c]] = {{"mean", cell->mean}, {"half_width", cell->half_width}, {"best", cell->best}};
    }
    rows.push_back({{"row", t.rows[r]}, {"cells", cells}});
  }
  return {{"columns", t.columns}, {"rows", rows}};
}

}  // namespace cvnn::harness
