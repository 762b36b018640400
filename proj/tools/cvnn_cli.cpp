// Command-line front end: run, grid, genscene, balance-report.

#include <algorithm>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "cvnn/errors.hpp"
#include "cvnn/harness.hpp"

namespace fs = std::filesystem;
using namespace cvnn;

namespace {

enum Exit : int { kOk = 0, kOther = 1, kConfig = 2, kSplit = 3, kNumeric = 4 };

void print_summary(const harness::ExperimentResult& r) {
  const auto& a = r.aggregate;
  std::cout << "trials " << a.trials << "  OA " << a.oa.mean << " +/- " << a.oa.half_width << "  AA " << a.aa.mean
            << " +/- " << a.aa.half_width << '\n';
  for (std::size_t k = 0; k < r.class_names.size() && k < a.per_class.size(); ++k)
    std::cout << "  " << r.class_names[k] << ' ' << a.per_class[k].mean << '\n';
}

int cmd_run(const fs::path& config, const fs::path& out, std::optional<std::uint64_t> seed,
            std::optional<std::size_t> trials, std::optional<std::size_t> threads) {
  auto c = harness::load_config(config);
  if (seed) c.seed = *seed;
  if (trials) {
    if (*trials < 1) throw ConfigError("trials must be at least 1");
    c.trials = *trials;
  }
  if (threads) c.threads = std::max<std::size_t>(1, *threads);
  print_summary(harness::run_experiment(c, out));
  return kOk;
}

int cmd_grid(const fs::path& dir, const fs::path& out, std::optional<std::size_t> threads) {
  if (!fs::is_directory(dir)) throw ConfigError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<harness::GridEntry> entries;
  for (const auto& f : files) {
    auto c = harness::load_config(f);
    if (threads) c.threads = std::max<std::size_t>(1, *threads);
    std::cout << "== " << f.filename().string() << '\n';
    auto r = harness::run_experiment(c, out / f.stem());
    print_summary(r);
    entries.push_back({std::move(c), std::move(r)});
  }
  const auto table = harness::compare_grid(entries);
  fs::create_directories(out);
  std::ofstream csv(out / "comparison.csv");
  harness::write_table_csv(csv, table);
  std::ofstream js(out / "comparison.json");
  js << harness::to_json(table).dump(2) << '\n';
  harness::write_table_csv(std::cout, table);
  return kOk;
}

int cmd_genscene(const std::optional<fs::path>& recipe_file, const std::string& preset, std::size_t height,
                 std::size_t width, std::uint64_t seed, const fs::path& out) {
  polsar::SceneRecipe recipe;
  if (recipe_file) {
    std::ifstream is(*recipe_file);
    if (!is) throw ConfigError("cannot open recipe '" + recipe_file->string() + "'");
    try {
      recipe = polsar::recipe_from_json(nlohmann::json::parse(is));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("recipe is not valid JSON: ") + e.what());
    }
  } else {
    recipe = polsar::preset_recipe(preset, height, width, seed);
  }
  const auto field = polsar::generate_scene(recipe);
  polsar::write_scene(field, out);
  const auto counts = field.class_counts();
  std::cout << "wrote " << out.string() << " (" << field.height() << "x" << field.width() << ")\n";
  for (std::size_t k = 0; k < counts.size(); ++k) std::cout << "  " << field.class_names()[k] << ' ' << counts[k] << '\n';
  return kOk;
}

int cmd_balance(const fs::path& scene, const std::string& mode, std::size_t patch, std::size_t stride,
                std::uint64_t seed, const std::optional<fs::path>& out) {
  const auto field = polsar::read_scene(scene);
  polsar::PolsarField train;
  if (mode == "split") {
    train = sampling::spatial_split(field)[0];
  } else if (mode == "random") {
    Rng rng = make_rng(seed, {0});
    const auto split = sampling::sample_pixels(field.labels(), 0.08, 0.02, rng);
    train = field;
    std::fill(train.labels().begin(), train.labels().end(), sampling::kUnlabeled);
    for (std::size_t i : split.train) train.labels()[i] = field.labels()[i];
  } else {
    throw ConfigError("mode must be 'split' or 'random'");
  }
  if (patch > std::min(train.height(), train.width())) {
    throw ConfigError("patch " + std::to_string(patch) + " does not fit the training area");
  }
  // Balancing reads labels only; a one-channel placeholder stands in for inputs.
  auto features = std::make_shared<const Value>(RTensor({train.height(), train.width(), 1}));
  const auto set = sampling::sliding_window(features, train.labels(), patch, stride, sampling::LabelKind::patch);
  Rng rng = make_rng(seed, {1});
  const auto res = sampling::balance_patch_set(set, field.classes(), rng);

  std::ofstream table_file, log_file;
  std::ostream* table = &std::cout;
  std::ostream* log = nullptr;
  if (out) {
    fs::create_directories(*out);
    table_file.open(*out / "balance.csv");
    log_file.open(*out / "removals.csv");
    table = &table_file;
    log = &log_file;
  }
  const auto& names = field.class_names();
  sampling::write_occurrence_csv(*table, res.phase_one.before, names, "before", true);
  sampling::write_occurrence_csv(*table, res.phase_one.after, names, "after_phase1", false);
  sampling::write_occurrence_csv(*table, res.phase_two.after, names, "after_phase2", false);
  if (log) {
    auto entries = res.phase_one.log;
    entries.insert(entries.end(), res.phase_two.log.begin(), res.phase_two.log.end());
    sampling::write_removal_log_csv(*log, entries, names);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Complex-valued neural networks for PolSAR classification"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a Monte-Carlo experiment from a JSON config");
  fs::path run_config, run_out;
  std::optional<std::uint64_t> run_seed;
  std::optional<std::size_t> run_trials, run_threads;
  run->add_option("--config", run_config, "experiment config")->required();
  run->add_option("--out", run_out, "output directory")->required();
  run->add_option("--seed", run_seed, "override the master seed");
  run->add_option("--trials", run_trials, "override the trial count");
  run->add_option("--threads", run_threads, "trials run concurrently");

  auto* grid = app.add_subcommand("grid", "Run every config in a directory and tabulate them");
  fs::path grid_dir, grid_out = "grid_out";
  std::optional<std::size_t> grid_threads;
  grid->add_option("--configs", grid_dir, "directory of JSON configs")->required();
  grid->add_option("--out", grid_out, "output directory");
  grid->add_option("--threads", grid_threads, "trials run concurrently");

  auto* gen = app.add_subcommand("genscene", "Generate a synthetic scene file");
  std::optional<fs::path> gen_recipe;
  std::string gen_preset = "imbalanced";
  std::size_t gen_h = 256, gen_w = 256;
  std::uint64_t gen_seed = 1;
  fs::path gen_out;
  gen->add_option("--recipe", gen_recipe, "JSON scene recipe");
  gen->add_option("--preset", gen_preset, "balanced or imbalanced (without --recipe)");
  gen->add_option("--height", gen_h, "scene height (preset only)");
  gen->add_option("--width", gen_w, "scene width (preset only)");
  gen->add_option("--seed", gen_seed, "scene seed (preset only)");
  gen->add_option("--out", gen_out, "output .pscene file")->required();

  auto* bal = app.add_subcommand("balance-report", "Occurrence tables before and after dataset balancing");
  fs::path bal_scene;
  std::string bal_mode = "split";
  std::size_t bal_patch = 128, bal_stride = 25;
  std::uint64_t bal_seed = 1;
  std::optional<fs::path> bal_out;
  bal->add_option("--scene", bal_scene, "scene file")->required();
  bal->add_option("--mode", bal_mode, "split or random");
  bal->add_option("--patch", bal_patch, "patch size");
  bal->add_option("--stride", bal_stride, "patch stride");
  bal->add_option("--seed", bal_seed, "seed for sampling and relabeling");
  bal->add_option("--out", bal_out, "output directory (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  try {
    if (*run) return cmd_run(run_config, run_out, run_seed, run_trials, run_threads);
    if (*grid) return cmd_grid(grid_dir, grid_out, grid_threads);
    if (*gen) return cmd_genscene(gen_recipe, gen_preset, gen_h, gen_w, gen_seed, gen_out);
    if (*bal) return cmd_balance(bal_scene, bal_mode, bal_patch, bal_stride, bal_seed, bal_out);
  } catch (const SplitInfeasibleError& e) {
    std::cerr << "split infeasible: " << e.what() << '\n';
    return kSplit;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kOther;
}
