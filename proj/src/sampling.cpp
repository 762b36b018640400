#include "cvnn/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "cvnn/errors.hpp"

namespace cvnn::sampling {

std::vector<std::size_t> window_offsets(std::size_t extent, std::size_t size, std::size_t stride) {
  if (stride == 0) throw ContractError("window stride must be at least 1");
  if (size == 0 || size > extent) {
    throw ContractError("window size " + std::to_string(size) + " does not fit extent " + std::to_string(extent));
  }
  std::vector<std::size_t> out;
  for (std::size_t o = 0; o + size <= extent; o += stride) out.push_back(o);
  return out;
}

PatchSet::PatchSet(std::shared_ptr<const Value> features, std::size_t size, LabelKind kind)
    : features_(std::move(features)), size_(size), kind_(kind) {
  if (!features_ || features_->shape().size() != 3) throw DimensionError("patch features must be H x W x C");
}

std::size_t PatchSet::channels() const { return features_->shape()[2]; }

void PatchSet::add_center(Origin o, std::uint8_t label) {
  if (kind_ != LabelKind::center) throw ContractError("patch set holds label patches");
  origins_.push_back(o);
  centers_.push_back(label);
}

void PatchSet::add_patch(Origin o, LabelPatch labels) {
  if (kind_ != LabelKind::patch) throw ContractError("patch set holds center labels");
  if (labels.size() != size_ * size_) throw DimensionError("label patch does not match the patch size");
  origins_.push_back(o);
  patches_.push_back(std::move(labels));
}

Value PatchSet::input(std::size_t i) const {
  const std::size_t idx[1] = {i};
  Value v = batch(idx);
  return v.visit([&](auto& t) -> Value {
    return Value(std::move(t).reshaped({size_, size_, channels()}));
  });
}

Value PatchSet::batch(std::span<const std::size_t> indices) const {
  const std::size_t s = size_, c = channels(), width = features_->shape()[1];
  return features_->visit([&](const auto& src) -> Value {
    using T = typename std::decay_t<decltype(src)>::value_type;
    Tensor<T> out({indices.size(), s, s, c});
    T* dst = out.data();
    for (std::size_t i : indices) {
      const Origin& o = origins_.at(i);
      for (std::size_t r = 0; r < s; ++r) {
        const T* row = src.data() + ((o.row + r) * width + o.col) * c;
        dst = std::copy(row, row + s * c, dst);
      }
    }
    return Value(std::move(out));
  });
}

std::vector<std::uint8_t> PatchSet::batch_labels(std::span<const std::size_t> indices) const {
  std::vector<std::uint8_t> out;
  if (kind_ == LabelKind::center) {
    for (std::size_t i : indices) out.push_back(centers_.at(i));
  } else {
    out.reserve(indices.size() * size_ * size_);
    for (std::size_t i : indices) out.insert(out.end(), patches_.at(i).begin(), patches_.at(i).end());
  }
  return out;
}

PatchSet PatchSet::subset(std::span<const std::size_t> indices) const {
  PatchSet out(features_, size_, kind_);
  for (std::size_t i : indices) {
    out.origins_.push_back(origins_.at(i));
    if (kind_ == LabelKind::center) {
      out.centers_.push_back(centers_.at(i));
    } else {
      out.patches_.push_back(patches_.at(i));
    }
  }
  return out;
}

std::vector<std::size_t> PatchSet::class_counts(std::size_t classes) const {
  std::vector<std::size_t> counts(classes, 0);
  auto bump = [&](std::uint8_t l) {
    if (l != kUnlabeled) ++counts.at(l);
  };
  if (kind_ == LabelKind::center) {
    for (auto l : centers_) bump(l);
  } else {
    for (const auto& p : patches_)
      for (auto l : p) bump(l);
  }
  return counts;
}

PatchSet sliding_window(std::shared_ptr<const Value> features, std::span<const std::uint8_t> labels,
                        std::size_t size, std::size_t stride, LabelKind kind, bool skip_unlabeled) {
  PatchSet set(std::move(features), size, kind);
  const std::size_t h = set.features().shape()[0], w = set.features().shape()[1];
  if (labels.size() != h * w) throw DimensionError("label grid does not match the feature map");
  const auto rows = window_offsets(h, size, stride);
  const auto cols = window_offsets(w, size, stride);
  for (std::size_t r : rows) {
    for (std::size_t c : cols) {
      if (kind == LabelKind::center) {
        const std::uint8_t l = labels[(r + size / 2) * w + c + size / 2];
        if (skip_unlabeled && l == kUnlabeled) continue;
        set.add_center({r, c}, l);
      } else {
        LabelPatch p(size * size);
        for (std::size_t i = 0; i < size; ++i)
          std::copy_n(labels.begin() + static_cast<std::ptrdiff_t>((r + i) * w + c), size, p.begin() + i * size);
        if (skip_unlabeled && std::all_of(p.begin(), p.end(), [](auto l) { return l == kUnlabeled; })) continue;
        set.add_patch({r, c}, std::move(p));
      }
    }
  }
  return set;
}

std::array<std::pair<std::size_t, std::size_t>, 3> split_columns(std::size_t width, std::array<double, 3> f) {
  for (double x : f)
    if (!(x > 0.0)) throw ContractError("split fractions must be positive");
  if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) throw ContractError("split fractions must sum to 1");
  const auto w = static_cast<double>(width);
  // Small slack so 0.70 * 100 lands on 70 despite binary rounding.
  const auto a = static_cast<std::size_t>(std::floor(f[0] * w + 1e-9));
  const auto b = static_cast<std::size_t>(std::floor((f[0] + f[1]) * w + 1e-9));
  return {{{0, a}, {a, b}, {b, width}}};
}

std::array<polsar::PolsarField, 3> spatial_split(const polsar::PolsarField& field, std::array<double, 3> fractions) {
  static const char* const kStrip[3] = {"train", "validation", "test"};
  const auto ranges = split_columns(field.width(), fractions);
  std::array<polsar::PolsarField, 3> out;
  for (std::size_t s = 0; s < 3; ++s) {
    out[s] = field.columns(ranges[s].first, ranges[s].second);
    const auto counts = out[s].class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c) {
      if (counts[c] == 0) {
        throw SplitInfeasibleError(
            "class '" + field.class_names()[c] + "' is absent from the " + kStrip[s] + " strip",
            field.class_names()[c]);
      }
    }
  }
  return out;
}

namespace {

std::size_t take(double rate, std::size_t n) {
  return static_cast<std::size_t>(std::floor(rate * static_cast<double>(n) + 1e-9));
}

}  // namespace

IndexSplit sample_pixels(std::span<const std::uint8_t> labels, double train_rate, double validation_rate, Rng& rng) {
  if (train_rate < 0.0 || validation_rate < 0.0 || train_rate + validation_rate >= 1.0) {
    throw ContractError("sampling rates must be non-negative and sum below 1");
  }
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != kUnlabeled) eligible.push_back(i);
  shuffle(eligible.begin(), eligible.end(), rng);
  const std::size_t nt = take(train_rate, eligible.size()), nv = take(validation_rate, eligible.size());
  IndexSplit out;
  out.train.assign(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(nt));
  out.validation.assign(eligible.begin() + static_cast<std::ptrdiff_t>(nt),
                        eligible.begin() + static_cast<std::ptrdiff_t>(nt + nv));
  out.test.assign(eligible.begin() + static_cast<std::ptrdiff_t>(nt + nv), eligible.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::vector<std::size_t> balanced_pixel_sampling(std::span<const std::uint8_t> labels,
                                                 std::span<const std::size_t> pool, std::size_t classes,
                                                 std::size_t m, Rng& rng, const std::vector<std::string>& names) {
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i : pool) {
    const std::uint8_t l = labels[i];
    if (l != kUnlabeled && l < classes) by_class[l].push_back(i);
  }
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < classes; ++c) {
    auto& v = by_class[c];
    if (v.size() < m) {
      const std::string name = c < names.size() ? names[c] : std::to_string(c);
      throw ContractError("class '" + name + "' has only " + std::to_string(v.size()) + " samples, " +
                          std::to_string(m) + " requested");
    }
    shuffle(v.begin(), v.end(), rng);
    out.insert(out.end(), v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------- balancing

namespace {

std::vector<std::size_t> pixel_counts(const LabelPatch& p, std::size_t classes) {
  std::vector<std::size_t> n(classes, 0);
  for (auto l : p)
    if (l != kUnlabeled && l < classes) ++n[l];
  return n;
}

std::size_t present_classes(const std::vector<std::size_t>& n) {
  return static_cast<std::size_t>(std::count_if(n.begin(), n.end(), [](std::size_t x) { return x > 0; }));
}

}  // namespace

OccurrenceTable occurrence_table(std::span<const LabelPatch> patches, std::size_t classes) {
  OccurrenceTable t(classes);
  for (const auto& p : patches) {
    const auto n = pixel_counts(p, classes);
    const bool mixed = present_classes(n) > 1;
    for (std::size_t c = 0; c < classes; ++c) {
      if (n[c] == 0) continue;
      t[c].total_pixels += n[c];
      if (mixed) {
        t[c].mixed_pixels += n[c];
        ++t[c].mixed_patches;
      } else {
        ++t[c].single_class_patches;
      }
    }
  }
  return t;
}

PhaseOneResult remove_exceeding_one_class_images(std::span<const LabelPatch> patches, std::size_t classes) {
  PhaseOneResult out;
  out.report.before = occurrence_table(patches, classes);

  std::size_t target = SIZE_MAX;
  for (const auto& occ : out.report.before)
    if (occ.presence() > 0) target = std::min(target, occ.presence());

  // Single-class patches per class as (pixels, index).
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> singles(classes);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto n = pixel_counts(patches[i], classes);
    if (present_classes(n) != 1) continue;
    const auto c = static_cast<std::size_t>(std::find_if(n.begin(), n.end(), [](auto x) { return x > 0; }) - n.begin());
    singles[c].emplace_back(n[c], i);
  }

  std::vector<bool> removed(patches.size(), false);
  for (std::size_t c = 0; c < classes; ++c) {
    const std::size_t presence = out.report.before[c].presence();
    if (presence == 0 || presence <= target) continue;
    auto& s = singles[c];
    std::sort(s.begin(), s.end());
    const std::size_t count = std::min(s.size(), presence - target);
    for (std::size_t k = 0; k < count; ++k) {
      removed[s[k].second] = true;
      out.report.log.push_back({1, c, s[k].second, s[k].first});
    }
  }

  std::vector<LabelPatch> kept;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    if (removed[i]) continue;
    out.kept.push_back(i);
    kept.push_back(patches[i]);
  }
  out.report.after = occurrence_table(kept, classes);
  return out;
}

BalanceReport balance_total_pixels_of_patch(std::vector<LabelPatch>& patches, std::size_t classes, Rng& rng) {
  BalanceReport report;
  report.before = occurrence_table(patches, classes);

  std::size_t target = SIZE_MAX;
  for (const auto& occ : report.before)
    if (occ.total_pixels > 0) target = std::min(target, occ.total_pixels);

  for (std::size_t c = 0; c < classes; ++c) {
    if (report.before[c].total_pixels == 0) continue;
    std::vector<std::pair<std::size_t, std::size_t>> order;  // (pixels of c, patch)
    for (std::size_t i = 0; i < patches.size(); ++i) {
      const auto n = static_cast<std::size_t>(std::count(patches[i].begin(), patches[i].end(), c));
      if (n > 0) order.emplace_back(n, i);
    }
    std::sort(order.begin(), order.end());

    std::size_t remaining = target;
    std::size_t left = order.size();
    for (const auto& [occ, i] : order) {
      if (occ * left <= remaining) {
        remaining -= occ;
      } else {
        const std::size_t keep = remaining / left;
        std::vector<std::size_t> where;
        for (std::size_t p = 0; p < patches[i].size(); ++p)
          if (patches[i][p] == c) where.push_back(p);
        // Partial Fisher-Yates: the first occ - keep positions are dropped.
        const std::size_t drop = occ - keep;
        for (std::size_t k = 0; k < drop; ++k) {
          std::swap(where[k], where[k + uniform_index(rng, where.size() - k)]);
          patches[i][where[k]] = kUnlabeled;
        }
        report.log.push_back({2, c, i, drop});
        remaining -= keep;
      }
      --left;
    }
  }
  report.after = occurrence_table(patches, classes);
  return report;
}

DatasetBalanceResult balance_patch_set(const PatchSet& set, std::size_t classes, Rng& rng) {
  if (set.kind() != LabelKind::patch) throw ContractError("dataset balancing of patches needs label patches");
  DatasetBalanceResult out;
  auto one = remove_exceeding_one_class_images(set.label_patches(), classes);
  out.patches = set.subset(one.kept);
  out.phase_one = std::move(one.report);
  out.phase_two = balance_total_pixels_of_patch(out.patches.label_patches(), classes, rng);
  return out;
}

std::vector<double> weighted_loss_weights(std::span<const std::size_t> counts) {
  if (counts.empty()) throw ContractError("no class counts");
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) throw ContractError("class " + std::to_string(i) + " has no samples");
  }
  const std::size_t least = *std::min_element(counts.begin(), counts.end());
  std::vector<double> w;
  for (std::size_t n : counts) w.push_back(static_cast<double>(least) / static_cast<double>(n));
  return w;
}

void write_occurrence_csv(std::ostream& os, const OccurrenceTable& table, const std::vector<std::string>& names,
                          const std::string& stage, bool header) {
  if (header) os << "Stage,Class,Total Pixels,Pixels in mixed images,Single-class images,Mixed Images\n";
  for (std::size_t c = 0; c < table.size(); ++c) {
    const std::string name = c < names.size() ? names[c] : std::to_string(c);
    os << stage << ',' << name << ',' << table[c].total_pixels << ',' << table[c].mixed_pixels << ','
       << table[c].single_class_patches << ',' << table[c].mixed_patches << '\n';
  }
}

void write_removal_log_csv(std::ostream& os, const std::vector<RemovalEntry>& log,
                           const std::vector<std::string>& names) {
  os << "Phase,Class,Patch,Pixels removed\n";
  for (const auto& e : log) {
    const std::string name = e.class_index < names.size() ? names[e.class_index] : std::to_string(e.class_index);
    os << e.phase << ',' << name << ',' << e.patch << ',' << e.pixels << '\n';
  }
}

}  // namespace cvnn::sampling
