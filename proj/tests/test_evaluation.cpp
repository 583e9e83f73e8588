#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "sifa/evaluator.hpp"
#include "support.hpp"

using namespace sifa;
using namespace sifa::testing;

namespace {

LabelVolume line_labels(std::vector<std::int32_t> v, int k = 2, Spacing3 sp = {1, 1, 1}) {
  const auto n = static_cast<std::int64_t>(v.size());
  return LabelVolume({n, 1, 1}, sp, std::move(v), k);
}

// Swaps axes (x,y,z) -> (z,x,y), spacing permuted accordingly.
LabelVolume permute_axes(const LabelVolume& v) {
  const auto& d = v.dims();
  const Dims3 nd{d[2], d[0], d[1]};
  std::vector<std::int32_t> out(static_cast<std::size_t>(voxel_count(nd)));
  for (std::int64_t z = 0; z < d[2]; ++z)
    for (std::int64_t y = 0; y < d[1]; ++y)
      for (std::int64_t x = 0; x < d[0]; ++x) out[static_cast<std::size_t>(z + nd[0] * (x + nd[1] * y))] = v.at(x, y, z);
  const auto& s = v.spacing();
  return LabelVolume(nd, {s[2], s[0], s[1]}, std::move(out), v.num_classes());
}

SubjectMetrics subject(std::string id, std::vector<double> dice, std::vector<std::optional<double>> asd,
                       std::vector<bool> both_empty = {}) {
  if (both_empty.empty()) both_empty.assign(dice.size(), false);
  return {std::move(id), std::move(dice), std::move(asd), std::move(both_empty)};
}

}  // namespace

TEST(Dice, HandComputedFixture) {
  // Prediction 3 voxels, ground truth 4, overlap 2: 2*2/(3+4).
  const auto pred = line_labels({1, 1, 1, 0, 0, 0});
  const auto gt = line_labels({0, 1, 1, 1, 1, 0});
  const auto d = dice_per_class(pred, gt);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_DOUBLE_EQ(d[0], 4.0 / 7.0);
}

TEST(Dice, EmptyConventions) {
  const auto none = line_labels({0, 0, 0}, 3);
  const auto some = line_labels({0, 1, 0}, 3);
  const auto d = dice_per_class(none, some);
  EXPECT_EQ(d, (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(dice_per_class(some, none), (std::vector<double>{0.0, 1.0}));
  EXPECT_SIFA_ERROR(dice_per_class(none, line_labels({0, 0}, 3)), ErrorKind::ShapeMismatch);
}

TEST(Asd, OneVoxelOffset) {
  const auto pred = line_labels({0, 1, 0, 0});
  const auto gt = line_labels({0, 0, 1, 0});
  EXPECT_DOUBLE_EQ(*asd_per_class(pred, gt)[0], 1.0);
  const auto pred2 = line_labels({0, 1, 0, 0}, 2, {2.5, 1, 1});
  const auto gt2 = line_labels({0, 0, 1, 0}, 2, {2.5, 1, 1});
  EXPECT_DOUBLE_EQ(*asd_per_class(pred2, gt2)[0], 2.5);
}

TEST(Asd, IdenticalMasksAndEmptySurfaces) {
  std::mt19937_64 rng(3);
  const auto v = random_label_volume(rng, 3, 6, {1, 1, 1});
  for (const auto& a : asd_per_class(v, v)) {
    if (a) EXPECT_DOUBLE_EQ(*a, 0.0);
  }
  const auto empty = line_labels({0, 0, 0});
  const auto one = line_labels({0, 1, 0});
  EXPECT_FALSE(asd_per_class(empty, one)[0].has_value());
  EXPECT_FALSE(asd_per_class(one, empty)[0].has_value());
  EXPECT_FALSE(asd_per_class(empty, empty)[0].has_value());
}

TEST(Asd, AsymmetricShapesUseMeanOfDirectedMeans) {
  // pred {0}, gt {0,1,2,3,4} on a line: every gt voxel is on the surface.
  // pred->gt: 0. gt->pred: (0+1+2+3+4)/5 = 2. Symmetric mean 1.
  const auto pred = line_labels({1, 0, 0, 0, 0});
  const auto gt = line_labels({1, 1, 1, 1, 1});
  EXPECT_DOUBLE_EQ(*asd_per_class(pred, gt)[0], 1.0);
}

TEST(Metrics, MatchIndependentOraclesOnRandomVolumes) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> sp(0.5, 2.0);
  for (int trial = 0; trial < 60; ++trial) {
    const Spacing3 spacing{sp(rng), sp(rng), sp(rng)};
    const auto g = random_label_volume(rng, 3, 8, spacing);
    const auto dims = g.dims();
    const auto p = random_label_volume(rng, 3, 8, spacing, &dims);
    EXPECT_EQ(dice_per_class(p, g), dice_oracle(p, g)) << "trial " << trial;
    const auto got = asd_per_class(p, g);
    const auto want = asd_oracle(p, g);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t c = 0; c < got.size(); ++c) {
      ASSERT_EQ(got[c].has_value(), want[c].has_value()) << "trial " << trial;
      if (got[c]) EXPECT_NEAR(*got[c], *want[c], 1e-9) << "trial " << trial;
    }
  }
}

TEST(Metrics, SymmetricAndAxisPermutationInvariant) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = random_label_volume(rng, 3, 7, {1.0, 1.5, 0.75});
    const auto dims = g.dims();
    const auto p = random_label_volume(rng, 3, 7, {1.0, 1.5, 0.75}, &dims);
    EXPECT_EQ(dice_per_class(p, g), dice_per_class(g, p));
    const auto a = asd_per_class(p, g), b = asd_per_class(g, p);
    const auto c = asd_per_class(permute_axes(p), permute_axes(g));
    for (std::size_t k = 0; k < a.size(); ++k) {
      ASSERT_EQ(a[k].has_value(), b[k].has_value());
      ASSERT_EQ(a[k].has_value(), c[k].has_value());
      if (a[k]) {
        EXPECT_NEAR(*a[k], *b[k], 1e-12);
        EXPECT_NEAR(*a[k], *c[k], 1e-12);
      }
    }
    const auto dp = dice_per_class(permute_axes(p), permute_axes(g));
    EXPECT_EQ(dp, dice_per_class(p, g));
  }
}

TEST(Report, HandAveragedTwoSubjects) {
  MetricsReport r;
  r.label = "m";
  r.num_classes = 3;
  r.subjects.push_back(subject("a", {0.5, 1.0}, {2.0, 4.0}));
  r.subjects.push_back(subject("b", {0.7, 0.0}, {4.0, std::nullopt}, {false, false}));
  finalize_report(r);
  EXPECT_NEAR(r.mean_dice[0], 0.6, 1e-12);
  EXPECT_NEAR(r.mean_dice[1], 0.5, 1e-12);
  EXPECT_NEAR(*r.mean_asd[0], 3.0, 1e-12);
  EXPECT_NEAR(*r.mean_asd[1], 4.0, 1e-12);
  EXPECT_NEAR(r.average_dice, 0.55, 1e-12);
  EXPECT_NEAR(*r.average_asd, 3.5, 1e-12);
  EXPECT_TRUE(r.asd_has_undefined);
  EXPECT_FALSE(r.dice_has_both_empty);
  const auto means = r.subject_mean_dice();
  EXPECT_NEAR(means[0], 0.75, 1e-12);
  EXPECT_NEAR(means[1], 0.35, 1e-12);

  EXPECT_EQ(MetricsReport::from_json(r.to_json()), r);
  const auto text = format_table({r});
  EXPECT_NE(text.find("4.00*"), std::string::npos) << text;
  EXPECT_NE(text.find("3.50*"), std::string::npos) << text;
  EXPECT_NE(text.find("55.0"), std::string::npos) << text;
}

TEST(Report, AllUndefinedAsdShowsNotAvailable) {
  MetricsReport r;
  r.label = "blank";
  r.num_classes = 2;
  r.subjects.push_back(subject("a", {1.0}, {std::nullopt}, {true}));
  finalize_report(r);
  EXPECT_FALSE(r.mean_asd[0].has_value());
  EXPECT_FALSE(r.average_asd.has_value());
  EXPECT_TRUE(r.dice_has_both_empty);
  const auto text = format_table({r});
  EXPECT_NE(text.find("N/A"), std::string::npos);
  EXPECT_EQ(text.find("nan"), std::string::npos);
  EXPECT_EQ(MetricsReport::from_json(r.to_json()), r);
}

TEST(Report, EmptyInputsRejected) {
  MetricsReport r;
  r.num_classes = 3;
  EXPECT_SIFA_ERROR(finalize_report(r), ErrorKind::EmptyDataset);
  EXPECT_SIFA_ERROR(format_table({}), ErrorKind::EmptyDataset);
  SifaState state(toy_arch(3), 1);
  PreprocessConfig pc;
  pc.target_resolution = 32;
  EXPECT_SIFA_ERROR(evaluate_dataset(state, Cohort{}, pc), ErrorKind::EmptyDataset);
}

TEST(Segment, ShapeRangeAndDeterminism) {
  SifaState state(toy_arch(3), 4);
  state.nets().set_training(false);
  std::mt19937_64 rng(8);
  std::normal_distribution<float> n(0, 1);
  std::vector<float> vox(20 * 24 * 7);
  for (auto& v : vox) v = n(rng);
  const Volume3D vol({20, 24, 7}, {1.0, 1.0, 2.0}, vox, Domain::target, "s");
  PreprocessConfig pc;
  pc.target_resolution = 32;
  pc.slicing_axis = SlicingAxis::axial;
  const auto a = segment_volume(state, vol, pc);
  EXPECT_EQ(a.dims(), vol.dims());
  EXPECT_EQ(a.spacing(), vol.spacing());
  EXPECT_EQ(a.num_classes(), 3);
  for (auto l : a.labels()) {
    EXPECT_GE(l, 0);
    EXPECT_LT(l, 3);
  }
  const auto b = segment_volume(state, vol, pc);
  EXPECT_TRUE(std::ranges::equal(a.labels(), b.labels()));
}

TEST(Segment, EvaluateDatasetProducesOneRowPerSubject) {
  SifaState state(toy_arch(3), 4);
  SyntheticConfig sc;
  sc.image_size = 32;
  sc.num_slices = 3;
  sc.num_subjects_per_domain = 2;
  sc.seed = 1;
  const auto data = make_synthetic_domains(sc);
  PreprocessConfig pc;
  pc.target_resolution = 32;
  pc.slicing_axis = SlicingAxis::axial;
  const auto r = evaluate_dataset(state, data.source, pc, "untrained");
  EXPECT_EQ(r.subjects.size(), 2u);
  EXPECT_EQ(r.label, "untrained");
  EXPECT_EQ(r.mean_dice.size(), 2u);
  for (double d : r.mean_dice) {
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
  }
  EXPECT_EQ(evaluate_dataset(state, data.source, pc, "untrained"), r);
}
