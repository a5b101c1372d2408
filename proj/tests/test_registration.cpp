#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace crossreg;
using namespace crossreg::test;

namespace {

RegistrationConfig fast_config(std::uint64_t seed = 0) {
  RegistrationConfig c;
  c.components = 100;
  c.downsample_max = 800;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Procrustes, RecoversRigidMotionExactly) {
  const PointCloud src = random_cloud(50, 1, -5, 5);
  const SimilarityTransform T = rigid(73.0, Vec3(1, -2, 0.5), Vec3(3, 4, -1));
  const PointCloud dst = apply_transform(src, T);
  std::vector<double> w(src.size());
  Rng rng(2);
  for (auto& x : w) x = uniform(rng, 0.1, 2.0);
  const RigidFit fit = weighted_procrustes(src.points, dst.points, w);
  EXPECT_LT((fit.rotation - T.rotation).norm(), 1e-10);
  EXPECT_LT((fit.translation - T.translation).norm(), 1e-10);
  EXPECT_NEAR(fit.rotation.determinant(), 1.0, 1e-12);
  EXPECT_FALSE(fit.rank_deficient());
}

TEST(Procrustes, NeverReturnsReflection) {
  PointCloud src = random_cloud(30, 3);
  PointCloud dst = src;
  for (auto& p : dst.points) p.x() = -p.x();
  const RigidFit fit = weighted_procrustes(src.points, dst.points, std::vector<double>(30, 1.0));
  EXPECT_NEAR(fit.rotation.determinant(), 1.0, 1e-12);
}

TEST(InitGmm, SingleComponent) {
  const PointCloud a = random_cloud(20, 1), b = random_cloud(20, 2);
  RegistrationConfig c = fast_config();
  c.components = 1;
  const GmmState g = init_gmm(a, b, c);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_DOUBLE_EQ(g.weights[0], 1.0 - c.outlier_weight);
  const bool from_a = std::find(a.points.begin(), a.points.end(), g.means[0]) != a.points.end();
  const bool from_b = std::find(b.points.begin(), b.points.end(), g.means[0]) != b.points.end();
  EXPECT_TRUE(from_a || from_b);
  EXPECT_NEAR(g.total_weight(), 1.0, 1e-12);
}

TEST(InitGmm, DeterministicEqualVariancesAndClamp) {
  const PointCloud a = random_cloud(300, 1), b = random_cloud(300, 2);
  RegistrationConfig c = fast_config(7);
  const GmmState g1 = init_gmm(a, b, c), g2 = init_gmm(a, b, c);
  EXPECT_EQ(g1.means, g2.means);
  EXPECT_EQ(g1.variances, g2.variances);
  for (double v : g1.variances) EXPECT_EQ(v, g1.variances[0]);
  EXPECT_NEAR(g1.total_weight(), 1.0, 1e-12);

  std::vector<std::string> warnings;
  c.components = 1000;
  const GmmState g3 = init_gmm(a, b, c, &warnings);
  EXPECT_EQ(g3.size(), 300u);
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(Expectation, RowsAreDistributions) {
  const PointCloud a = random_cloud(200, 4), b = random_cloud(200, 5);
  RegistrationConfig c = fast_config();
  c.components = 30;
  c.outlier_weight = 0.0;
  GmmState g = init_gmm(a, b, c);
  gmm_detail::Responsibilities r;
  gmm_detail::expectation(g, a.points, r);
  ASSERT_EQ(r.rows(), a.size());
  for (std::size_t i = 0; i < r.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = r.offset[i]; j < r.offset[i + 1]; ++j) s += r.value[j];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Expectation, LogLikelihoodMatchesDenseOracle) {
  const PointCloud a = random_cloud(100, 6), b = random_cloud(100, 7);
  RegistrationConfig c = fast_config();
  c.components = 10;
  const GmmState g = init_gmm(a, b, c);
  gmm_detail::Responsibilities r;
  const double ll = static_cast<double>(gmm_detail::expectation(g, a.points, r));
  long double oracle = 0;
  for (const auto& p : a.points) {
    long double dens = g.outlier_weight * g.outlier_density;
    for (std::size_t k = 0; k < g.size(); ++k) {
      const long double v = g.variances[k];
      dens += g.weights[k] * std::exp(-(long double)squared_distance(p, g.means[k]) / (2 * v)) /
              std::pow(2 * std::numbers::pi_v<long double> * v, 1.5L);
    }
    oracle += std::log(dens);
  }
  EXPECT_NEAR(ll, static_cast<double>(oracle), 1e-9 * std::abs(static_cast<double>(oracle)));
}

TEST(Jrmpc, SelfRegistration) {
  const PointCloud region = asymmetric_object(1500, 1);
  // Default config: 1500 points are under the downsample cap, so both sides
  // see the identical point set.
  const JrmpcResult r = jrmpc_register(region, region, RegistrationConfig{});
  const double radius = bounding_radius(region, centroid(region));
  EXPECT_LT(rotation_angle_between(r.transform.rotation, Mat3::Identity()), 1e-3);
  EXPECT_LT(r.transform.translation.norm(), 1e-3 * radius);
  EXPECT_TRUE(non_decreasing(r.loglik_trace));
}

TEST(Jrmpc, FifteenDegreesWithNoise) {
  const PointCloud region = asymmetric_object(2000, 2);
  const double radius = bounding_radius(region, centroid(region));
  const SimilarityTransform T = rigid(15.0, Vec3::UnitZ(), Vec3(1, 0.5, 0));
  const PointCloud query = add_noise(apply_transform(region, T), 0.01 * radius, 3);
  const JrmpcResult r = jrmpc_register(region, query, RegistrationConfig{});
  const PoseError e = pose_error(r.transform, T.inverse(), query);
  EXPECT_LT(e.rotation_deg, 2.0);
  EXPECT_LT(e.translation, 0.02 * radius);
  EXPECT_TRUE(non_decreasing(r.loglik_trace));
}

TEST(Jrmpc, MonotoneOnTwentySeededTrials) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(s);
    const PointCloud region = s % 2 ? asymmetric_object(1200, s) : box_surface(1200, s, Vec3(4, 2, 1.5));
    const SimilarityTransform T =
        rigid(uniform(rng, 0, 30), random_unit_vector(rng), gaussian_vector(rng, 2.0));
    const PointCloud query = add_noise(apply_transform(region, T), 0.05, s);
    const JrmpcResult r = jrmpc_register(region, query, fast_config(s));
    EXPECT_TRUE(non_decreasing(r.loglik_trace)) << "trial " << s;
    EXPECT_EQ(r.loglik_trace.size(), r.iterations + 1);
  }
}

TEST(Jrmpc, ScaleComesFromNormalization) {
  const PointCloud region = asymmetric_object(800, 4);
  const ScaleNormalization norm{1.75, Vec3(1, 2, 3)};
  const JrmpcResult r = jrmpc_register(region, region, fast_config(), norm);
  EXPECT_EQ(r.transform.scale, 1.75);
  EXPECT_TRUE(r.transform.is_valid());
}

TEST(Jrmpc, DeterministicForSeed) {
  const PointCloud region = asymmetric_object(800, 5);
  const PointCloud query = apply_transform(region, rigid(10, Vec3(0, 1, 1), Vec3(1, 1, 1)));
  const JrmpcResult a = jrmpc_register(region, query, fast_config(3));
  const JrmpcResult b = jrmpc_register(region, query, fast_config(3));
  EXPECT_EQ(a.loglik_trace, b.loglik_trace);
  EXPECT_EQ(a.transform.matrix(), b.transform.matrix());
}

TEST(Jrmpc, CollinearInputRejected) {
  PointCloud line;
  for (int i = 0; i < 50; ++i) line.points.emplace_back(i, 2 * i, 0.5 * i);
  try {
    jrmpc_register(line, asymmetric_object(100, 1), fast_config());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("rank-deficient Procrustes"), std::string::npos);
  }
  EXPECT_THROW(jrmpc_register(PointCloud({Vec3(0, 0, 0), Vec3(1, 0, 0)}), line, fast_config()), DataError);
}

TEST(Jrmpc, ConfigValidation) {
  RegistrationConfig c;
  c.components = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.outlier_weight = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.tol = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Icp, Identity) {
  const PointCloud c = asymmetric_object(1000, 1);
  const IcpResult r = icp_register(c, c);
  EXPECT_LT((r.transform.rotation - Mat3::Identity()).norm(), 1e-6);
  EXPECT_LT(r.transform.translation.norm(), 1e-6);
}

TEST(Icp, FiveDegrees) {
  const PointCloud region = asymmetric_object(1500, 2);
  const SimilarityTransform T = rigid(5.0, Vec3(0.3, 0.2, 1.0), Vec3(0.2, -0.1, 0.3));
  const PointCloud query = apply_transform(region, T);
  const IcpResult r = icp_register(region, query, 100);
  EXPECT_LT(pose_error(r.transform, T.inverse(), query).rotation_deg, 0.5);
}

TEST(Icp, NinetyDegreesDoesNotCrash) {
  const PointCloud region = asymmetric_object(1000, 3);
  const PointCloud query = apply_transform(region, rigid(90.0, Vec3::UnitZ(), Vec3::Zero()));
  const IcpResult r = icp_register(region, query);
  EXPECT_TRUE(std::isfinite(r.mean_residual));
  EXPECT_TRUE(r.transform.is_valid(1e-6));
}
