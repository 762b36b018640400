#pragma once

// Training loop, Monte-Carlo experiment runner, aggregation and the
// comparison grid.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cvnn/models.hpp"
#include "cvnn/nn/metrics.hpp"
#include "cvnn/polsar.hpp"
#include "cvnn/sampling.hpp"
#include "json.hpp"

namespace cvnn::harness {

enum class SplitMode : unsigned char { random_sampling, spatial };
enum class Balancing : unsigned char { none, dataset, weighted_loss };

std::string to_string(SplitMode m);
std::string to_string(Balancing b);

struct ExperimentConfig {
  std::string name = "experiment";
  models::ModelSpec model;
  polsar::Representation representation = polsar::Representation::coherency;
  SplitMode split = SplitMode::random_sampling;
  Balancing balancing = Balancing::none;
  std::size_t trials = 10;
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  // Scene source: a file when set, otherwise the recipe.
  std::optional<std::filesystem::path> scene_file;
  polsar::SceneRecipe recipe = polsar::imbalanced_recipe();

  std::size_t boxcar = 3;
  std::size_t stride = 1;  // window stride (FCNN default 25)
  double train_rate = 0.08, validation_rate = 0.02;
  std::array<double, 3> split_fractions{0.70, 0.15, 0.15};
  /// Caps on sample counts per set (0 = no cap), drawn uniformly per trial.
  std::size_t max_train_samples = 0, max_validation_samples = 0, max_test_samples = 0;
  /// Dataset balancing for center-labelled sets: per-class count cap (0 = the
  /// scarcest class's count).
  std::size_t balance_per_class = 0;
  /// Early stop after this many epochs without validation-OA improvement (0 = off).
  std::size_t patience = 0;
  bool save_checkpoints = false;
  /// Sizes a real model to match the complex twin when no widths are given.
  bool real_equivalent = true;
  /// Set when the config lists model widths; otherwise the default widths apply.
  bool explicit_widths = false;
};

/// Parses a JSON experiment config. Throws ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& c);

/// The experiment's ModelSpec after channel counts, defaults and real
/// equivalence are resolved.
models::ModelSpec resolve_model(const ExperimentConfig& c, std::size_t classes);

struct Dataset {
  sampling::PatchSet train, validation, test;
  std::vector<double> class_weights;  // empty unless weighted loss
  std::vector<std::string> class_names;
  std::optional<sampling::DatasetBalanceResult> balance;  // FCNN dataset balancing
  /// Training class counts before and after balancing or capping.
  std::vector<std::size_t> train_counts_before, train_counts_after;
  /// Source label grids for dense evaluation (FCNN), aligned with each set's
  /// feature map.
  std::vector<std::uint8_t> validation_labels, test_labels;
};

/// Builds the three sets for one trial.
Dataset prepare_dataset(const ExperimentConfig& c, const polsar::PolsarField& field, std::size_t trial);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double validation_oa = std::numeric_limits<double>::quiet_NaN();
};

struct TrainOptions {
  double learning_rate = 1e-3, beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::size_t patience = 0;
  std::uint64_t seed = 1;
};

TrainOptions train_options(const models::ModelSpec& spec, std::size_t patience, std::uint64_t seed);

/// Minibatch Adam on (weighted) ACE. Throws NumericError on a non-finite loss.
std::vector<EpochRecord> train(nn::Network& net, const sampling::PatchSet& train_set,
                               const sampling::PatchSet* validation, std::span<const double> class_weights,
                               const TrainOptions& options, std::size_t classes);

/// Confusion matrix over a patch set. Center sets count each patch once;
/// patch sets count every labeled pixel of every patch.
nn::ConfusionMatrix evaluate(nn::Network& net, const sampling::PatchSet& set, std::size_t classes,
                             std::size_t batch_size = 64);

/// Dense evaluation: every pixel of the feature map predicted once from the
/// average of the windows covering it.
nn::ConfusionMatrix evaluate_dense(nn::Network& net, const Value& features, std::span<const std::uint8_t> labels,
                                   std::size_t patch, std::size_t stride, std::size_t classes);

struct TrialResult {
  std::size_t trial = 0;
  nn::ConfusionMatrix confusion;
  nn::Metrics metrics;
  std::size_t epochs_run = 0;
  double wall_seconds = 0.0;
  std::vector<EpochRecord> history;
  std::optional<sampling::DatasetBalanceResult> balance;
  std::vector<std::size_t> train_counts_before, train_counts_after;
};

TrialResult run_trial(const ExperimentConfig& c, const polsar::PolsarField& field, std::size_t trial,
                      const std::filesystem::path& out_dir = {});

struct Stat {
  double mean = 0.0, sd = 0.0, half_width = 0.0;
};

struct AggregateResult {
  std::size_t trials = 0;
  Stat oa, aa;
  std::vector<Stat> per_class;
  bool sd_undefined = false;  // a single trial
};

/// Sample standard deviation and 1.96 sd / sqrt(n) half-width.
Stat summarize(std::span<const double> values);
AggregateResult aggregate(std::span<const TrialResult> trials, std::size_t classes);

polsar::PolsarField load_field(const ExperimentConfig& c);

struct ExperimentResult {
  std::vector<TrialResult> trials;
  AggregateResult aggregate;
  std::vector<std::string> class_names;
};

/// Runs every trial and writes trials.csv, per_class.csv, aggregate.json,
/// history.csv, balance reports and timing.txt under `out_dir` (when not
/// empty). Trials finished before a failure are still written.
ExperimentResult run_experiment(const ExperimentConfig& c, const std::filesystem::path& out_dir);

struct GridEntry {
  ExperimentConfig config;
  ExperimentResult result;
};

struct GridCell {
  double mean = 0.0, half_width = 0.0;
  bool best = false;
};

struct ComparisonTable {
  std::vector<std::string> columns;  // "<representation>/<domain>"
  std::vector<std::string> rows;     // "<family>/<metric>"
  std::vector<std::vector<std::optional<GridCell>>> cells;
};

/// One row per (family, metric), one column per (representation, domain);
/// the per-row maximum mean is marked best.
ComparisonTable compare_grid(std::span<const GridEntry> entries);
void write_table_csv(std::ostream& os, const ComparisonTable& table);
nlohmann::json to_json(const ComparisonTable& table);

}  // namespace cvnn::harness
