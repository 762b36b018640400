#pragma once

// Patch extraction, spatial splitting, pixel sampling and class balancing.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cvnn/ctensor.hpp"
#include "cvnn/polsar.hpp"
#include "cvnn/random.hpp"

namespace cvnn::sampling {

inline constexpr std::uint8_t kUnlabeled = polsar::kUnlabeled;

using LabelPatch = std::vector<std::uint8_t>;

/// Top-left offsets {0, stride, ...} of windows that fit inside `extent`.
std::vector<std::size_t> window_offsets(std::size_t extent, std::size_t size, std::size_t stride);

enum class LabelKind : unsigned char { center, patch };

/// Square windows over a shared H x W x C feature map. Inputs are sliced on
/// demand so a stride-1 set costs only its coordinates; label payloads are
/// owned because balancing edits them.
class PatchSet {
 public:
  struct Origin {
    std::size_t row = 0, col = 0;
    bool operator==(const Origin&) const = default;
  };

  PatchSet() = default;
  PatchSet(std::shared_ptr<const Value> features, std::size_t size, LabelKind kind);

  std::size_t size() const noexcept { return origins_.size(); }
  std::size_t patch_size() const noexcept { return size_; }
  std::size_t channels() const;
  LabelKind kind() const noexcept { return kind_; }
  const Value& features() const { return *features_; }
  const std::shared_ptr<const Value>& features_ptr() const noexcept { return features_; }

  const std::vector<Origin>& origins() const noexcept { return origins_; }
  /// Center labels (kind center).
  const std::vector<std::uint8_t>& centers() const noexcept { return centers_; }
  /// Label patches (kind patch), row-major size x size.
  std::vector<LabelPatch>& label_patches() noexcept { return patches_; }
  const std::vector<LabelPatch>& label_patches() const noexcept { return patches_; }

  void add_center(Origin o, std::uint8_t label);
  void add_patch(Origin o, LabelPatch labels);

  /// Input window of patch i as size x size x C.
  Value input(std::size_t i) const;
  /// N x size x size x C batch of the given patches.
  Value batch(std::span<const std::size_t> indices) const;
  /// Loss rows for the batch: N center labels or N*size*size pixel labels.
  std::vector<std::uint8_t> batch_labels(std::span<const std::size_t> indices) const;
  /// Patches at the given indices, in that order.
  PatchSet subset(std::span<const std::size_t> indices) const;
  /// Labeled pixel (or center) count per class.
  std::vector<std::size_t> class_counts(std::size_t classes) const;

 private:
  std::shared_ptr<const Value> features_;
  std::size_t size_ = 0;
  LabelKind kind_ = LabelKind::center;
  std::vector<Origin> origins_;
  std::vector<std::uint8_t> centers_;
  std::vector<LabelPatch> patches_;
};

/// Every window of `size` at `stride`. `labels` is the H x W grid aligned with
/// `features`. Center kind uses the label at (size/2, size/2) and skips
/// windows whose center is unlabeled when `skip_unlabeled` is set.
PatchSet sliding_window(std::shared_ptr<const Value> features, std::span<const std::uint8_t> labels,
                        std::size_t size, std::size_t stride, LabelKind kind, bool skip_unlabeled = true);

/// Column ranges [begin, end) of the three vertical strips.
std::array<std::pair<std::size_t, std::size_t>, 3> split_columns(std::size_t width,
                                                                 std::array<double, 3> fractions);

/// Train, validation and test strips. Throws SplitInfeasibleError naming the
/// first class absent from a strip.
std::array<polsar::PolsarField, 3> spatial_split(const polsar::PolsarField& field,
                                                 std::array<double, 3> fractions = {0.70, 0.15, 0.15});

struct IndexSplit {
  std::vector<std::size_t> train, validation, test;
};

/// Uniform disjoint sampling of labeled entries: floor(rate * n) for train and
/// validation, the rest is test. Indices are sorted ascending.
IndexSplit sample_pixels(std::span<const std::uint8_t> labels, double train_rate, double validation_rate,
                         Rng& rng);

/// Exactly m indices per class drawn without replacement from `pool`
/// (indices into `labels`), sorted ascending.
std::vector<std::size_t> balanced_pixel_sampling(std::span<const std::uint8_t> labels,
                                                 std::span<const std::size_t> pool, std::size_t classes,
                                                 std::size_t m, Rng& rng,
                                                 const std::vector<std::string>& class_names = {});

// ---------------------------------------------------------------- balancing

struct ClassOccurrence {
  std::size_t total_pixels = 0;
  std::size_t mixed_pixels = 0;
  std::size_t single_class_patches = 0;
  std::size_t mixed_patches = 0;

  std::size_t presence() const noexcept { return single_class_patches + mixed_patches; }
  bool operator==(const ClassOccurrence&) const = default;
};

using OccurrenceTable = std::vector<ClassOccurrence>;

OccurrenceTable occurrence_table(std::span<const LabelPatch> patches, std::size_t classes);

struct RemovalEntry {
  int phase = 0;              // 1 removes a patch, 2 relabels pixels
  std::size_t class_index = 0;
  std::size_t patch = 0;      // index into the phase's input
  std::size_t pixels = 0;     // pixels of the class removed
};

struct BalanceReport {
  OccurrenceTable before, after;
  std::vector<RemovalEntry> log;
};

struct PhaseOneResult {
  std::vector<std::size_t> kept;  // indices into the input, ascending
  BalanceReport report;
};

/// Deletes single-class patches, fewest pixels first, until each class's
/// patch presence reaches the scarcest class's presence or its single-class
/// patches run out. Mixed patches are never deleted.
PhaseOneResult remove_exceeding_one_class_images(std::span<const LabelPatch> patches, std::size_t classes);

/// Relabels pixels as unlabeled so every class's pixel total equals the
/// smallest class total. Per class, patches are visited in ascending order of
/// that class's pixel count; a patch above the running average
/// remaining / patches_left keeps floor(average) randomly chosen pixels.
BalanceReport balance_total_pixels_of_patch(std::vector<LabelPatch>& patches, std::size_t classes, Rng& rng);

struct DatasetBalanceResult {
  PatchSet patches;
  BalanceReport phase_one, phase_two;
};

/// Both phases on a patch-labelled set. Input windows are shared, not copied.
DatasetBalanceResult balance_patch_set(const PatchSet& set, std::size_t classes, Rng& rng);

/// w_c = min_count / n_c.
std::vector<double> weighted_loss_weights(std::span<const std::size_t> counts);

/// Occurrence table as CSV with the given stage tag per row. Writes the
/// column header when `header` is set.
void write_occurrence_csv(std::ostream& os, const OccurrenceTable& table, const std::vector<std::string>& names,
                          const std::string& stage, bool header);
void write_removal_log_csv(std::ostream& os, const std::vector<RemovalEntry>& log,
                           const std::vector<std::string>& names);

}  // namespace cvnn::sampling
