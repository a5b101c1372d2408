#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "crossreg/error.hpp"
#include "crossreg/random.hpp"

namespace crossreg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Ordered list of 3D points in meters.
struct PointCloud {
  std::vector<Vec3> points;
  std::string id;

  PointCloud() = default;
  explicit PointCloud(std::vector<Vec3> pts, std::string label = {})
      : points(std::move(pts)), id(std::move(label)) {}

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
  const Vec3& operator[](std::size_t i) const { return points[i]; }

  bool all_finite() const {
    for (const auto& p : points) {
      if (!p.allFinite()) return false;
    }
    return true;
  }
};

/// Squared Euclidean distance. Every exact comparison in the library goes
/// through this one expression so that index queries and linear scans agree
/// to the last bit.
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

/// x -> scale * R * x + t.
struct SimilarityTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  static SimilarityTransform identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }

  SimilarityTransform inverse() const {
    SimilarityTransform inv;
    inv.rotation = rotation.transpose();
    inv.scale = 1.0 / scale;
    inv.translation = -(inv.scale * (inv.rotation * translation));
    return inv;
  }

  /// (*this) after `first`: x -> this(first(x)).
  SimilarityTransform compose(const SimilarityTransform& first) const {
    SimilarityTransform out;
    out.rotation = rotation * first.rotation;
    out.scale = scale * first.scale;
    out.translation = scale * (rotation * first.translation) + translation;
    return out;
  }

  /// Row-major 4x4 homogeneous matrix [scale*R | t; 0 0 0 1].
  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = scale * rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  /// True when R is orthonormal with det +1 and scale > 0, to `tol`.
  bool is_valid(double tol = 1e-9) const {
    if (!(scale > 0.0) || !std::isfinite(scale)) return false;
    if (!rotation.allFinite() || !translation.allFinite()) return false;
    const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    return ortho < tol && std::abs(rotation.determinant() - 1.0) <= tol;
  }
};

/// Angle of the relative rotation between two rotation matrices, radians.
inline double rotation_angle_between(const Mat3& a, const Mat3& b) {
  const double c = std::clamp(((a.transpose() * b).trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

inline void require_nonempty(const PointCloud& cloud, const char* what) {
  if (cloud.empty()) throw DataError(std::string(what) + ": empty point cloud");
}

inline Vec3 centroid(const PointCloud& cloud) {
  require_nonempty(cloud, "centroid");
  Vec3 sum = Vec3::Zero();
  for (const auto& p : cloud.points) sum += p;
  return sum / static_cast<double>(cloud.size());
}

/// Largest distance from `center` to any point.
inline double bounding_radius(const PointCloud& cloud, const Vec3& center) {
  require_nonempty(cloud, "bounding_radius");
  double best = 0.0;
  for (const auto& p : cloud.points) best = std::max(best, squared_distance(p, center));
  return std::sqrt(best);
}

inline PointCloud select(const PointCloud& cloud, std::span<const std::size_t> indices) {
  PointCloud out;
  out.id = cloud.id;
  out.points.reserve(indices.size());
  for (std::size_t i : indices) out.points.push_back(cloud.points[i]);
  return out;
}

inline PointCloud apply_transform(const PointCloud& cloud, const SimilarityTransform& T) {
  PointCloud out;
  out.id = cloud.id;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(T.apply(p));
  return out;
}

/// Returns the cloud unchanged when it has at most `max_points` points,
/// otherwise a uniformly random subset of exactly `max_points` points in
/// original order. Deterministic in `seed`.
inline PointCloud uniform_downsample(const PointCloud& cloud, std::size_t max_points,
                                     std::uint64_t seed) {
  if (max_points < 1) throw ConfigError("uniform_downsample: max_points must be >= 1");
  if (cloud.size() <= max_points) return cloud;
  Rng rng(seed);
  const auto keep = sample_without_replacement(rng, cloud.size(), max_points);
  return select(cloud, keep);
}

/// Keeps round(ratio * n) points (at least one).
inline PointCloud downsample_ratio(const PointCloud& cloud, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("downsample_ratio: ratio must be in (0, 1]");
  const auto target = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(cloud.size())));
  return uniform_downsample(cloud, std::max<std::size_t>(1, target), seed);
}

/// Checks that the points do not all lie on one line (or one point).
inline bool is_collinear(const PointCloud& cloud, double rel_tol = 1e-10) {
  if (cloud.size() < 3) return true;
  const Vec3 c = centroid(cloud);
  Mat3 cov = Mat3::Zero();
  for (const auto& p : cloud.points) {
    const Vec3 d = p - c;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();  // ascending
  return ev(2) <= 0.0 || ev(1) <= rel_tol * ev(2);
}

}  // namespace crossreg
