#include <set>
#include <sstream>

#include "cvnn/sampling.hpp"
#include "doctest.h"
#include "airport_fixture.hpp"
#include "test_util.hpp"

using namespace cvnn;
using namespace cvnn::sampling;

namespace {

std::vector<std::uint8_t> labels_with_counts(const std::vector<std::size_t>& counts, Rng& rng) {
  std::vector<std::uint8_t> l;
  for (std::size_t c = 0; c < counts.size(); ++c) l.insert(l.end(), counts[c], static_cast<std::uint8_t>(c));
  shuffle(l.begin(), l.end(), rng);
  return l;
}

std::vector<std::size_t> totals(const OccurrenceTable& t) {
  std::vector<std::size_t> out;
  for (const auto& o : t) out.push_back(o.total_pixels);
  return out;
}

std::size_t count_of(const LabelPatch& p, std::size_t c) {
  return static_cast<std::size_t>(std::count(p.begin(), p.end(), static_cast<std::uint8_t>(c)));
}

}  // namespace

TEST_SUITE("sampling") {
  TEST_CASE("window offsets") {
    CHECK(window_offsets(128, 12, 1).size() == 117);
    CHECK(window_offsets(128, 128, 25) == std::vector<std::size_t>{0});
    CHECK(window_offsets(10, 3, 4) == std::vector<std::size_t>{0, 4});
    for (std::size_t extent = 1; extent < 40; ++extent)
      for (std::size_t size = 1; size <= extent; ++size)
        for (std::size_t stride = 1; stride < 9; ++stride)
          CHECK(window_offsets(extent, size, stride).size() == (extent - size) / stride + 1);
    CHECK_THROWS_AS(window_offsets(10, 11, 1), ContractError);
    CHECK_THROWS_AS(window_offsets(10, 3, 0), ContractError);
  }

  TEST_CASE("sliding window patches equal source slices") {
    Rng rng = make_rng(51);
    const std::size_t h = 20, w = 17, ch = 3;
    auto features = std::make_shared<const Value>(testutil::random_complex({h, w, ch}, rng));
    std::vector<std::uint8_t> labels(h * w);
    for (auto& l : labels) l = static_cast<std::uint8_t>(uniform_index(rng, 3));
    const PatchSet set = sliding_window(features, labels, 5, 2, LabelKind::patch);
    CHECK(set.size() == 8 * 7);
    for (int k = 0; k < 20; ++k) {
      const std::size_t i = uniform_index(rng, set.size());
      const auto o = set.origins()[i];
      const CTensor in = set.input(i).complex();
      REQUIRE(in.shape() == Shape{5, 5, ch});
      for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < 5; ++c) {
          for (std::size_t q = 0; q < ch; ++q) CHECK(in(r, c, q) == features->complex()(o.row + r, o.col + c, q));
          CHECK(set.label_patches()[i][r * 5 + c] == labels[(o.row + r) * w + o.col + c]);
        }
    }
    const PatchSet centers = sliding_window(features, labels, 5, 1, LabelKind::center);
    const auto o = centers.origins()[7];
    CHECK(centers.centers()[7] == labels[(o.row + 2) * w + o.col + 2]);
    const std::vector<std::size_t> pick{3, 7};
    CHECK(centers.batch(pick).shape() == Shape{2, 5, 5, ch});
  }

  TEST_CASE("windows without labels are skipped") {
    auto features = std::make_shared<const Value>(Value(RTensor({6, 6, 1})));
    std::vector<std::uint8_t> labels(36, kUnlabeled);
    labels[0] = 1;
    CHECK(sliding_window(features, labels, 3, 3, LabelKind::patch).size() == 1);
    CHECK(sliding_window(features, labels, 3, 3, LabelKind::patch, false).size() == 4);
    CHECK(sliding_window(features, labels, 3, 1, LabelKind::center).size() == 0);
  }

  TEST_CASE("split columns") {
    const auto s = split_columns(100, {0.70, 0.15, 0.15});
    CHECK(s[0] == std::pair<std::size_t, std::size_t>{0, 70});
    CHECK(s[1] == std::pair<std::size_t, std::size_t>{70, 85});
    CHECK(s[2] == std::pair<std::size_t, std::size_t>{85, 100});
    for (std::size_t w = 1; w < 500; w += 7) {
      const auto t = split_columns(w, {0.70, 0.15, 0.15});
      CHECK(t[0].first == 0);
      CHECK(t[0].second == t[1].first);
      CHECK(t[1].second == t[2].first);
      CHECK(t[2].second == w);
    }
  }

  TEST_CASE("spatial split checks every class in every strip") {
    const polsar::PolsarField ok = polsar::generate_scene(polsar::imbalanced_recipe(256, 256, 1));
    const auto strips = spatial_split(ok);
    CHECK(strips[0].width() == 179);
    CHECK(strips[2].width() == 39);
    for (const auto& s : strips)
      for (std::size_t n : s.class_counts()) CHECK(n > 0);

    polsar::PolsarField bad(4, 100, {"left", "right"});
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 100; ++c) bad.label(r, c) = c < 50 ? 0 : 1;
    try {
      spatial_split(bad);
      FAIL("expected an infeasible split");
    } catch (const SplitInfeasibleError& e) {
      CHECK(std::string(e.what()).find("left") != std::string::npos);
      CHECK(std::string(e.what()).find("validation") != std::string::npos);
    }
  }

  TEST_CASE("pixel sampling sizes and disjointness") {
    Rng rng = make_rng(52);
    auto labels = labels_with_counts({6000, 2500, 1000, 500}, rng);
    labels.insert(labels.end(), 300, kUnlabeled);
    const IndexSplit s = sample_pixels(labels, 0.08, 0.02, rng);
    CHECK(s.train.size() == 800);
    CHECK(s.validation.size() == 200);
    CHECK(s.test.size() == 9000);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    for (auto i : s.validation) CHECK(all.insert(i).second);
    for (auto i : s.test) CHECK(all.insert(i).second);
    for (auto i : all) CHECK(labels[i] != kUnlabeled);
    CHECK_THROWS_AS(sample_pixels(labels, 0.9, 0.1, rng), ContractError);
  }

  TEST_CASE("sampled class proportions stay within three hypergeometric sigmas") {
    const std::vector<std::size_t> counts{6000, 2500, 1000, 500};
    const double big_n = 10000, n = 800;
    int failures = 0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      Rng rng = make_rng(53, {seed});
      const auto labels = labels_with_counts(counts, rng);
      const IndexSplit s = sample_pixels(labels, 0.08, 0.02, rng);
      for (std::size_t c = 0; c < 4; ++c) {
        std::size_t k = 0;
        for (auto i : s.train) k += labels[i] == c;
        const double p = counts[c] / big_n;
        const double sd = std::sqrt(n * p * (1 - p) * (big_n - n) / (big_n - 1));
        if (std::abs(static_cast<double>(k) - n * p) > 3 * sd) ++failures;
      }
    }
    // 120 checks at the 3-sigma level; a handful of excursions would be chance.
    CHECK(failures <= 2);
  }

  TEST_CASE("balanced pixel sampling") {
    Rng rng = make_rng(54);
    const auto labels = labels_with_counts({1000, 50, 400, 200}, rng);
    std::vector<std::size_t> pool(labels.size());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    const auto picked = balanced_pixel_sampling(labels, pool, 4, 50, rng);
    std::vector<std::size_t> hist(4);
    for (auto i : picked) ++hist[labels[i]];
    CHECK(hist == std::vector<std::size_t>{50, 50, 50, 50});
    CHECK(balanced_pixel_sampling(labels, pool, 4, 0, rng).empty());
    try {
      balanced_pixel_sampling(labels, pool, 4, 51, rng, {"a", "scarce", "c", "d"});
      FAIL("expected a contract error");
    } catch (const ContractError& e) {
      CHECK(std::string(e.what()).find("scarce") != std::string::npos);
    }
  }

  TEST_CASE("airport fixture reproduces its reference occurrence table") {
    const auto patches = testutil::airport_fixture();
    const testutil::FixtureCounts f;
    const auto t = occurrence_table(patches, 4);
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(t[c].single_class_patches == f.single_patches[c]);
      CHECK(t[c].mixed_patches == f.mixed_patches[c]);
      CHECK(t[c].mixed_pixels == f.mixed_pixels[c]);
      CHECK(t[c].total_pixels == f.single_pixels[c] + f.mixed_pixels[c]);
    }
    CHECK(t[testutil::kForest].presence() == 568);
    CHECK(totals(t) == std::vector<std::size_t>{2721238, 3091975, 9750257, 33245055});
  }

  TEST_CASE("phase one on the airport fixture") {
    const auto patches = testutil::airport_fixture();
    const PhaseOneResult r = remove_exceeding_one_class_images(patches, 4);
    CHECK(totals(r.report.after) == std::vector<std::size_t>{2721238, 2900017, 2620141, 10797471});
    CHECK(r.report.after[testutil::kForest].single_class_patches == 264);
    for (std::size_t c = 1; c < 4; ++c) CHECK(r.report.after[c].single_class_patches == 0);
    CHECK(r.kept.size() == 264 + 1519);
    CHECK(r.report.log.size() == 109 + 1134 + 2045);
    // Within a class, removals go in ascending pixel order.
    for (std::size_t i = 1; i < r.report.log.size(); ++i) {
      const auto &a = r.report.log[i - 1], &b = r.report.log[i];
      if (a.class_index == b.class_index) CHECK(a.pixels <= b.pixels);
    }
  }

  TEST_CASE("phase two on the airport fixture") {
    const auto patches = testutil::airport_fixture();
    const PhaseOneResult one = remove_exceeding_one_class_images(patches, 4);
    std::vector<LabelPatch> kept;
    for (auto i : one.kept) kept.push_back(patches[i]);
    Rng rng = make_rng(55);
    const BalanceReport two = balance_total_pixels_of_patch(kept, 4, rng);
    CHECK(totals(two.after) == std::vector<std::size_t>(4, 2620141));
    CHECK(totals(occurrence_table(kept, 4)) == std::vector<std::size_t>(4, 2620141));
  }

  TEST_CASE("phase two micro example") {
    // Class 0 holds 10 + 100 pixels; class 1 fixes the target at 100.
    std::vector<LabelPatch> p(3, LabelPatch(128, kUnlabeled));
    std::fill(p[0].begin(), p[0].begin() + 10, 0);
    std::fill(p[1].begin(), p[1].begin() + 100, 0);
    std::fill(p[2].begin(), p[2].begin() + 100, 1);
    Rng rng = make_rng(56);
    const BalanceReport r = balance_total_pixels_of_patch(p, 2, rng);
    CHECK(count_of(p[0], 0) == 10);
    CHECK(count_of(p[1], 0) == 90);
    REQUIRE(r.log.size() == 1);
    CHECK(r.log[0].patch == 1);
    CHECK(r.log[0].pixels == 10);
  }

  TEST_CASE("phase one leaves balanced presence alone") {
    std::vector<LabelPatch> p;
    for (std::uint8_t c = 0; c < 3; ++c)
      for (int k = 0; k < 4; ++k) p.push_back(LabelPatch(16, c));
    const auto r = remove_exceeding_one_class_images(p, 3);
    CHECK(r.kept.size() == 12);
    CHECK(r.report.log.empty());
  }

  TEST_CASE("balancing properties on random patch sets") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng = make_rng(57, {seed});
      const std::size_t classes = 2 + uniform_index(rng, 4);
      const auto input = testutil::random_label_patches(10 + uniform_index(rng, 40), 8, classes, rng);
      const auto before = occurrence_table(input, classes);
      const PhaseOneResult one = remove_exceeding_one_class_images(input, classes);

      // Scan oracle: each class is either at the minimum presence or has no
      // single-class patch left.
      std::size_t target = SIZE_MAX;
      for (const auto& o : before)
        if (o.presence() > 0) target = std::min(target, o.presence());
      for (std::size_t c = 0; c < classes; ++c) {
        if (before[c].presence() == 0) continue;
        const auto& a = one.report.after[c];
        CHECK((a.presence() == target || a.single_class_patches == 0 || before[c].presence() == target));
        CHECK(a.mixed_patches == before[c].mixed_patches);
        CHECK(a.total_pixels <= before[c].total_pixels);
      }

      std::vector<LabelPatch> kept;
      for (auto i : one.kept) kept.push_back(input[i]);
      const std::vector<LabelPatch> snapshot = kept;
      const BalanceReport two = balance_total_pixels_of_patch(kept, classes, rng);
      std::size_t least = SIZE_MAX;
      for (const auto& o : two.before)
        if (o.total_pixels > 0) least = std::min(least, o.total_pixels);
      for (std::size_t c = 0; c < classes; ++c) {
        if (two.before[c].total_pixels == 0) continue;
        CHECK(two.after[c].total_pixels == least);
      }
      for (std::size_t i = 0; i < kept.size(); ++i)
        for (std::size_t q = 0; q < kept[i].size(); ++q)
          CHECK((kept[i][q] == snapshot[i][q] || kept[i][q] == kUnlabeled));
    }
  }

  TEST_CASE("dataset balancing keeps inputs and only touches labels") {
    Rng rng = make_rng(58);
    const std::size_t h = 24, w = 24;
    auto features = std::make_shared<const Value>(testutil::random_real({h, w, 2}, rng));
    const Value copy = *features;
    std::vector<std::uint8_t> labels(h * w);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i < 400 ? 0 : (i < 520 ? 1 : 2);
    const PatchSet set = sliding_window(features, labels, 8, 4, LabelKind::patch);
    const auto res = balance_patch_set(set, 3, rng);
    CHECK(*features == copy);
    CHECK(res.patches.features_ptr() == features);
    const auto t = totals(res.phase_two.after);
    CHECK(t[0] == t[1]);
    CHECK(t[1] == t[2]);
  }

  TEST_CASE("weighted loss weights") {
    const std::vector<std::size_t> counts{2721238, 3091975, 9750257, 33245055};
    const auto w = weighted_loss_weights(counts);
    CHECK(w[0] == 1.0);
    CHECK(w[1] == doctest::Approx(0.88009).epsilon(1e-5));
    CHECK(w[2] == doctest::Approx(0.27909).epsilon(1e-5));
    CHECK(w[3] == doctest::Approx(0.08185).epsilon(1e-4));
    for (double v : w) CHECK((v > 0.0 && v <= 1.0));
    CHECK(weighted_loss_weights(std::vector<std::size_t>{5, 5, 5}) == std::vector<double>{1, 1, 1});
    CHECK_THROWS_AS(weighted_loss_weights(std::vector<std::size_t>{5, 0}), ContractError);
  }

  TEST_CASE("csv writers") {
    OccurrenceTable t(2);
    t[0] = {10, 4, 2, 1};
    t[1] = {7, 7, 0, 3};
    std::ostringstream os;
    write_occurrence_csv(os, t, {"A", "B"}, "before", true);
    CHECK(os.str() ==
          "Stage,Class,Total Pixels,Pixels in mixed images,Single-class images,Mixed Images\n"
          "before,A,10,4,2,1\nbefore,B,7,7,0,3\n");
    std::ostringstream log;
    write_removal_log_csv(log, {{1, 1, 5, 12}}, {"A", "B"});
    CHECK(log.str() == "Phase,Class,Patch,Pixels removed\n1,B,5,12\n");
  }
}
