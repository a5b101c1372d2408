#pragma once

#include <cmath>
#include <vector>

#include "crossreg/pointcloud.hpp"
#include "crossreg/procrustes.hpp"
#include "crossreg/spatial_index.hpp"

namespace crossreg {

struct IcpResult {
  SimilarityTransform transform;  // rigid, query -> region
  std::size_t iterations = 0;
  double mean_residual = 0.0;
  bool converged = false;
};

/// Point-to-point ICP from a centroid-aligned start. Used as the baseline
/// refinement only.
inline IcpResult icp_register(const PointCloud& region, const PointCloud& query_normalized,
                              std::size_t max_iterations = 50, double tol = 1e-6) {
  if (region.size() < 3 || query_normalized.size() < 3) {
    throw DataError("icp_register: both clouds need at least 3 points");
  }
  const KdTree tree(region);
  IcpResult out;
  out.transform.translation = centroid(region) - centroid(query_normalized);

  const std::size_t n = query_normalized.size();
  std::vector<Vec3> dst(n);
  const std::vector<double> w(n, 1.0);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < max_iterations; ++it) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto nn = tree.nearest(out.transform.apply(query_normalized[i]));
      dst[i] = region[nn.index];
      total += nn.distance;
    }
    const double mean = total / static_cast<double>(n);
    out.mean_residual = mean;
    if (std::isfinite(prev) && std::abs(prev - mean) <= tol * std::max(prev, 1e-300)) {
      out.converged = true;
      break;
    }
    prev = mean;
    const RigidFit fit = weighted_procrustes(query_normalized.points, dst, w);
    if (fit.rank_deficient()) throw DataError("icp_register: rank-deficient correspondence set");
    out.transform.rotation = fit.rotation;
    out.transform.translation = fit.translation;
    out.iterations = it + 1;
  }
  return out;
}

}  // namespace crossreg
