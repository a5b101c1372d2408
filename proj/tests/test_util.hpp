#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <tuple>
#include <string>
#include <vector>

#include "crossreg/crossreg.hpp"

namespace crossreg::test {

inline PointCloud random_cloud(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.emplace_back(uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi));
  return c;
}

// Closed box surface sampled uniformly, centered at the origin.
inline PointCloud box_surface(std::size_t n, std::uint64_t seed, const Vec3& half = Vec3(3, 2, 1)) {
  Rng rng(seed);
  const double a[3] = {half.y() * half.z(), half.x() * half.z(), half.x() * half.y()};
  const double total = a[0] + a[1] + a[2];
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = uniform01(rng) * total;
    const int axis = u < a[0] ? 0 : (u < a[0] + a[1] ? 1 : 2);
    Vec3 p;
    for (int k = 0; k < 3; ++k) p[k] = uniform(rng, -half[k], half[k]);
    p[axis] = uniform01(rng) < 0.5 ? -half[axis] : half[axis];
    c.points.push_back(p);
  }
  return c;
}

// Box with a cylinder on top: asymmetric enough to pin down a rotation.
inline PointCloud asymmetric_object(std::size_t n, std::uint64_t seed) {
  PointCloud c = box_surface(n * 2 / 3, seed, Vec3(6, 3, 2));
  Rng rng(derive_seed(seed, 9));
  for (std::size_t i = c.size(); i < n; ++i) {
    const double th = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    c.points.emplace_back(3.5 + 1.5 * std::cos(th), 1.0 + 1.5 * std::sin(th), uniform(rng, 2.0, 8.0));
  }
  return c;
}

inline SimilarityTransform rigid(double deg, const Vec3& axis, const Vec3& t) {
  SimilarityTransform T;
  T.rotation = Eigen::AngleAxisd(deg * std::numbers::pi / 180.0, axis.normalized()).toRotationMatrix();
  T.translation = t;
  return T;
}

inline std::string temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "crossreg_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

inline double brute_nearest(const std::vector<Vec3>& pts, const Vec3& q, std::size_t* index = nullptr) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3 d = pts[i] - q;
    const double d2 = d.x() * d.x() + d.y() * d.y() + d.z() * d.z();
    if (d2 < best) {
      best = d2;
      if (index) *index = i;
    }
  }
  return std::sqrt(best);
}

}  // namespace crossreg::test

namespace crossreg::test {

struct PoseError {
  double rotation_deg = 0.0;
  double translation = 0.0;  // displacement of the query centroid, meters
};

/// Error of an estimated query->region transform against the truth, with
/// translation measured where the query actually is (its centroid), so it
/// does not depend on how far the clouds sit from the origin.
inline PoseError pose_error(const SimilarityTransform& est, const SimilarityTransform& truth, const PointCloud& query) {
  const Vec3 c = centroid(query);
  return {rotation_angle_between(est.rotation, truth.rotation) * 180.0 / std::numbers::pi,
          (est.apply(c) - truth.apply(c)).norm()};
}

inline PointCloud add_noise(PointCloud c, double sigma, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& p : c.points) p += gaussian_vector(rng, sigma);
  return c;
}

inline bool non_decreasing(const std::vector<double>& trace, double slack = 1e-9) {
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i] < trace[i - 1] - slack) return false;
  }
  return true;
}

}  // namespace crossreg::test
