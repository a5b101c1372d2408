#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "crossreg/coarse_match.hpp"
#include "crossreg/pointcloud.hpp"
#include "crossreg/spatial_index.hpp"

namespace crossreg {

struct ScoringConfig {
  double alpha = 25.0;      // scale penalty parameter
  std::size_t cutoff = 5;   // ranks kept after re-ranking
  bool penalize_scale = true;

  void validate() const {
    if (!(alpha > 0.0)) throw ConfigError("scoring config: alpha must be positive");
    if (cutoff < 1) throw ConfigError("scoring config: cutoff must be >= 1");
  }
};

struct RegistrationResult {
  SimilarityTransform transform;  // original query -> scene
  double r_score = 0.0;
  double final_score = 0.0;
  std::size_t iterations = 0;
  std::vector<double> loglik_trace;
  bool converged = false;
};

struct RankedMatch {
  CandidateRegion candidate;
  RegistrationResult result;
  std::size_t rank = 0;
};

/// Mean distance from each region point to its nearest transformed query
/// point. `transformed_index` must be built over T(query_original).
inline double residual_error(const PointCloud& scene_region, const SpatialIndex& transformed_index) {
  require_nonempty(scene_region, "residual_error");
  if (transformed_index.empty()) throw DataError("residual_error: empty point cloud");
  double total = 0.0;
  for (const auto& m : scene_region.points) total += transformed_index.nearest(m).distance;
  return total / static_cast<double>(scene_region.size());
}

inline double residual_error(const PointCloud& scene_region, const PointCloud& query_original,
                             const SimilarityTransform& T) {
  require_nonempty(query_original, "residual_error");
  const KdTree index(apply_transform(query_original, T));
  return residual_error(scene_region, index);
}

/// exp(-scale^2 / alpha) * r_score.
inline double final_score(double r_score, double scale, const ScoringConfig& cfg) {
  return std::exp(-(scale * scale) / cfg.alpha) * r_score;
}

/// Sorts by final score (ties: r_score, candidate radius, input order),
/// keeps `cutoff` entries and numbers them from 1.
inline std::vector<RankedMatch> rerank(const std::vector<std::pair<CandidateRegion, RegistrationResult>>& matches,
                                       const ScoringConfig& cfg) {
  std::vector<std::size_t> order(matches.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ra = matches[a].second;
    const auto& rb = matches[b].second;
    if (ra.final_score != rb.final_score) return ra.final_score < rb.final_score;
    if (ra.r_score != rb.r_score) return ra.r_score < rb.r_score;
    if (matches[a].first.radius != matches[b].first.radius) return matches[a].first.radius < matches[b].first.radius;
    return a < b;
  });
  const std::size_t n = std::min(cfg.cutoff, order.size());
  std::vector<RankedMatch> out;
  out.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    out.push_back({matches[order[r]].first, matches[order[r]].second, r + 1});
  }
  return out;
}

}  // namespace crossreg
