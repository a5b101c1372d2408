#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace crossreg;
using namespace crossreg::test;

namespace {

SceneSpec box_spec(double density = 4.0) {
  SceneSpec spec;
  spec.density = density;
  spec.surfaces = synth_detail::building(1, 0);
  for (auto s : synth_detail::building(2, 1)) {
    synth_detail::place(s, Mat3::Identity(), Vec3(120, 0, 0), 1.0);
    spec.surfaces.push_back(s);
  }
  spec.target_group = 0;
  return spec;
}

}  // namespace

TEST(Synthetic, Deterministic) {
  const SceneSpec spec = box_spec();
  const SyntheticScene a = generate_synthetic_scene(spec, 5), b = generate_synthetic_scene(spec, 5);
  EXPECT_EQ(a.scene.points, b.scene.points);
  EXPECT_EQ(a.query.points, b.query.points);
  EXPECT_EQ(a.truth.matrix(), b.truth.matrix());
  EXPECT_NE(generate_synthetic_scene(spec, 6).query.points, a.query.points);
}

TEST(Synthetic, TruthTransformResidualBelowResamplingFloor) {
  SceneSpec spec = box_spec();
  spec.query.scale_min = spec.query.scale_max = 1.0;
  const SyntheticScene s = generate_synthetic_scene(spec, 2);
  const double spacing = mean_nn_spacing(s.truth_region);
  EXPECT_LT(residual_error(s.truth_region, s.query, s.truth), 2.0 * spacing);
  EXPECT_NEAR(s.truth.scale, 1.0, 1e-12);
}

TEST(Synthetic, QueryDensityRatio) {
  SceneSpec spec = box_spec();
  spec.query.density_ratio = 4.0;
  const SyntheticScene s = generate_synthetic_scene(spec, 3);
  const double ratio = static_cast<double>(s.query.size()) / static_cast<double>(s.truth_region.size());
  EXPECT_NEAR(ratio, 4.0, 0.2);
}

TEST(Synthetic, DropoutAndScaleRange) {
  SceneSpec spec = box_spec();
  spec.query.dropout = 0.5;
  spec.query.scale_min = 0.5;
  spec.query.scale_max = 2.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SyntheticScene s = generate_synthetic_scene(spec, seed);
    const double ratio = static_cast<double>(s.query.size()) / static_cast<double>(s.truth_region.size());
    EXPECT_NEAR(ratio, 0.5, 0.05);
    // truth maps query -> scene, so its scale is the inverse of the query scaling
    EXPECT_GE(1.0 / s.truth.scale, 0.5 - 1e-12);
    EXPECT_LE(1.0 / s.truth.scale, 2.0 + 1e-12);
  }
}

TEST(Synthetic, TruthRegionIsTargetGroup) {
  const SyntheticScene s = generate_synthetic_scene(box_spec(), 4);
  std::size_t target = 0;
  for (int g : s.groups) target += g == 0;
  EXPECT_EQ(s.truth_region.size(), target);
  for (const auto& p : s.truth_region.points) EXPECT_LE((p - s.truth_center).norm(), s.truth_radius);
}

TEST(Synthetic, FixedRotationAboutZ) {
  SceneSpec spec = box_spec();
  spec.query.fixed_rotation_deg = 60.0;
  spec.query.rotate_about_z = true;
  const SyntheticScene s = generate_synthetic_scene(spec, 1);
  EXPECT_NEAR(rotation_angle_between(s.truth.rotation, Mat3::Identity()) * 180.0 / std::numbers::pi, 60.0, 1e-9);
  EXPECT_NEAR(std::abs((s.truth.rotation * Vec3::UnitZ()).z()), 1.0, 1e-12);
}

TEST(Synthetic, Errors) {
  SceneSpec spec;
  EXPECT_THROW(generate_synthetic_scene(spec, 1), ConfigError);
  spec = box_spec();
  spec.query.dropout = 1.0;
  EXPECT_THROW(generate_synthetic_scene(spec, 1), ConfigError);
  spec = box_spec(0.0001);
  EXPECT_THROW(generate_synthetic_scene(spec, 1), DataError);
}

TEST(Synthetic, StreetSceneShape) {
  QuerySpec q;
  const SceneSpec spec = street_scene_spec(1, q);
  const SyntheticScene s = generate_synthetic_scene(spec, 1);
  EXPECT_NEAR(static_cast<double>(s.scene.size()), 50000.0, 1500.0);
  EXPECT_GE(s.truth_radius, 15.0);
  EXPECT_LE(s.truth_radius, 30.0);
}

TEST(Retrieval, HitCriterion) {
  // Uniform-density solid ball: fractions follow volume ratios.
  Rng rng(1);
  PointCloud scene;
  while (scene.size() < 20000) {
    const Vec3 p(uniform(rng, -10, 10), uniform(rng, -10, 10), uniform(rng, -10, 10));
    scene.points.push_back(p);
  }
  const KdTree idx(scene);
  const Vec3 c = Vec3::Zero();
  EXPECT_TRUE(classify_retrieval(idx, c, 3.0, c, 3.0).hit);
  const RetrievalEntry disjoint = classify_retrieval(idx, Vec3(8, 8, 8), 1.0, c, 3.0);
  EXPECT_FALSE(disjoint.hit);
  EXPECT_EQ(disjoint.truth_coverage, 0.0);
  // Concentric at twice the radius: 7/8 of its volume lies outside.
  const RetrievalEntry wide = classify_retrieval(idx, c, 6.0, c, 3.0);
  EXPECT_FALSE(wide.hit);
  EXPECT_EQ(wide.truth_coverage, 1.0);
  EXPECT_NEAR(wide.background_fraction, 7.0 / 8.0, 0.03);
}

TEST(Retrieval, HitsWithinCutoff) {
  Rng rng(2);
  PointCloud scene;
  for (int i = 0; i < 5000; ++i) scene.points.emplace_back(uniform(rng, 0, 100), uniform(rng, 0, 10), uniform(rng, 0, 10));
  const KdTree idx(scene);
  const Vec3 truth(50, 5, 5);
  std::vector<std::pair<Vec3, double>> ranked;
  for (int i = 0; i < 6; ++i) ranked.emplace_back(Vec3(10, 5, 5), 3.0);
  ranked[2] = {truth, 4.0};
  ranked[5] = {truth, 4.0};
  const RetrievalStats st = evaluate_retrieval(ranked, idx, truth, 4.0, 5);
  EXPECT_EQ(st.hits, 1u);
  EXPECT_EQ(st.first_hit_rank, 3u);
  EXPECT_EQ(st.entries.size(), 5u);
}
