#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"

using namespace crossreg;
using namespace crossreg::test;

namespace {

std::pair<CandidateRegion, RegistrationResult> entry(std::size_t index, double radius, double r_score,
                                                     double final) {
  CandidateRegion c;
  c.index = index;
  c.radius = radius;
  RegistrationResult r;
  r.r_score = r_score;
  r.final_score = final;
  return {c, r};
}

}  // namespace

TEST(ResidualError, Trivial) {
  const PointCloud c = random_cloud(100, 1);
  EXPECT_EQ(residual_error(c, c, SimilarityTransform{}), 0.0);
  EXPECT_EQ(residual_error(PointCloud({Vec3(0, 0, 0)}), PointCloud({Vec3(0, 0, 1)}), SimilarityTransform{}), 1.0);
  EXPECT_THROW(residual_error(PointCloud{}, c, SimilarityTransform{}), DataError);
  EXPECT_THROW(residual_error(c, PointCloud{}, SimilarityTransform{}), DataError);
}

TEST(ResidualError, PointForPointTransformIsZero) {
  const PointCloud q = random_cloud(200, 2, -3, 3);
  SimilarityTransform T = rigid(40, Vec3(1, 1, 0), Vec3(5, 6, 7));
  T.scale = 1.0;  // exact inverse image only for rigid maps up to rounding
  const PointCloud region = apply_transform(q, T);
  EXPECT_LT(residual_error(region, q, T), 1e-12);
}

TEST(ResidualError, MatchesBruteForceDoubleLoop) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng rng(s);
    const PointCloud region = random_cloud(150, 300 + s, -2, 2);
    const PointCloud query = random_cloud(120, 600 + s, -2, 2);
    SimilarityTransform T = rigid(uniform(rng, 0, 90), random_unit_vector(rng), gaussian_vector(rng, 0.5));
    T.scale = uniform(rng, 0.5, 2.0);
    std::vector<Vec3> moved;
    for (const auto& p : query.points) moved.push_back(T.scale * (T.rotation * p) + T.translation);
    long double total = 0;
    for (const auto& m : region.points) total += brute_nearest(moved, m);
    const double oracle = static_cast<double>(total / region.size());
    EXPECT_NEAR(residual_error(region, query, T), oracle, 1e-12) << "instance " << s;
  }
}

TEST(FinalScore, ReferenceValues) {
  ScoringConfig cfg;
  EXPECT_NEAR(final_score(2.0, 5.0, cfg), 2.0 / std::numbers::e, 1e-12);
  EXPECT_NEAR(final_score(3.0, std::sqrt(25.0), cfg), 3.0 / std::numbers::e, 1e-12);
  EXPECT_NEAR(final_score(1.5, 1e-9, cfg), 1.5, 1e-12);
}

TEST(FinalScore, StrictlyDecreasingInScale) {
  ScoringConfig cfg;
  double prev = final_score(1.0, 0.1, cfg);
  for (double s = 0.2; s < 6.0; s += 0.1) {
    const double v = final_score(1.0, s, cfg);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Rerank, Singleton) {
  const auto out = rerank({entry(0, 30, 1.0, 0.9)}, ScoringConfig{});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].rank, 1u);
}

TEST(Rerank, TwentyDistinctScoresTopFive) {
  std::vector<std::pair<CandidateRegion, RegistrationResult>> in;
  Rng rng(1);
  for (std::size_t i = 0; i < 20; ++i) {
    const double v = uniform(rng, 0.0, 10.0);
    in.push_back(entry(i, 30, v, v));
  }
  const auto out = rerank(in, ScoringConfig{});
  ASSERT_EQ(out.size(), 5u);
  std::vector<double> all;
  for (const auto& e : in) all.push_back(e.second.final_score);
  std::sort(all.begin(), all.end());
  for (std::size_t r = 0; r < 5; ++r) {
    EXPECT_EQ(out[r].rank, r + 1);
    EXPECT_EQ(out[r].result.final_score, all[r]);
  }
}

TEST(Rerank, PermutationInvariantWithTieRules) {
  std::vector<std::pair<CandidateRegion, RegistrationResult>> in;
  // Ties on final score broken by r_score, then radius.
  in.push_back(entry(0, 40, 2.0, 1.0));
  in.push_back(entry(1, 30, 2.0, 1.0));
  in.push_back(entry(2, 30, 1.0, 1.0));
  in.push_back(entry(3, 50, 9.0, 0.5));
  in.push_back(entry(4, 60, 9.0, 3.0));
  in.push_back(entry(5, 35, 9.0, 2.0));
  ScoringConfig cfg;
  cfg.cutoff = 6;
  const auto ref = rerank(in, cfg);
  std::vector<std::size_t> expected = {3, 2, 1, 0, 5, 4};
  for (std::size_t r = 0; r < ref.size(); ++r) EXPECT_EQ(ref[r].candidate.index, expected[r]);
  std::mt19937 shuffler(5);
  for (int trial = 0; trial < 30; ++trial) {
    std::shuffle(in.begin(), in.end(), shuffler);
    const auto out = rerank(in, cfg);
    for (std::size_t r = 0; r < out.size(); ++r) EXPECT_EQ(out[r].candidate.index, expected[r]);
  }
}

TEST(Rerank, CommonRescalingKeepsOrder) {
  std::vector<std::pair<CandidateRegion, RegistrationResult>> in, scaled;
  Rng rng(2);
  ScoringConfig cfg;
  for (std::size_t i = 0; i < 12; ++i) {
    const double r = uniform(rng, 0.1, 5.0);
    in.push_back(entry(i, 30, r, final_score(r, 1.5, cfg)));
    scaled.push_back(entry(i, 30, 7.0 * r, final_score(7.0 * r, 1.5, cfg)));
  }
  const auto a = rerank(in, cfg), b = rerank(scaled, cfg);
  for (std::size_t r = 0; r < a.size(); ++r) EXPECT_EQ(a[r].candidate.index, b[r].candidate.index);
}

TEST(ScoringConfig, Validation) {
  ScoringConfig c;
  c.alpha = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.cutoff = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}
