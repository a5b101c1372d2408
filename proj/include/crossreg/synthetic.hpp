#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "crossreg/pointcloud.hpp"
#include "crossreg/random.hpp"
#include "crossreg/spatial_index.hpp"

namespace crossreg {

enum class SurfaceKind { kBox, kCylinder, kPlane };

/// One sampled surface of a synthetic scene.
///  - box: `center`, `half_extents`, `rotation`; four walls and roof, floor if `closed`
///  - cylinder: base `center`, `radius`, `height`, axis = rotation * z; roof cap if `closed`
///  - plane: parallelogram center + a*u + b*v for a, b in [-1, 1]
struct Surface {
  SurfaceKind kind = SurfaceKind::kBox;
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Ones();
  Mat3 rotation = Mat3::Identity();
  double radius = 1.0;
  double height = 1.0;
  Vec3 u = Vec3::UnitX();
  Vec3 v = Vec3::UnitY();
  bool closed = false;
  double density = 0.0;  // points per square meter, 0 = scene default
  int group = 0;

  double area() const {
    switch (kind) {
      case SurfaceKind::kBox: {
        const Vec3 e = 2.0 * half_extents;
        return 2.0 * (e.x() + e.y()) * e.z() + (closed ? 2.0 : 1.0) * e.x() * e.y();
      }
      case SurfaceKind::kCylinder:
        return 2.0 * std::numbers::pi * radius * height + (closed ? std::numbers::pi * radius * radius : 0.0);
      case SurfaceKind::kPlane:
        return 4.0 * u.cross(v).norm();
    }
    return 0.0;
  }
};

struct QuerySpec {
  double density_ratio = 1.0;  // query density / scene density
  double noise_frac = 0.0;     // Gaussian sigma as a fraction of the truth radius
  double dropout = 0.0;        // probability of removing each query point
  double scale_min = 0.3;
  double scale_max = 3.0;
  double max_rotation_deg = 30.0;  // angle drawn uniformly in [0, max] unless fixed
  double fixed_rotation_deg = -1.0;
  bool rotate_about_z = false;
  double offset_range = 100.0;  // query frame offset, uniform per axis in [-r, r]
};

struct SceneSpec {
  std::vector<Surface> surfaces;
  double density = 2.0;
  // Ground-truth sphere: explicit when target_radius > 0, otherwise the
  // bounding sphere (plus margin) of the points of `target_group`.
  int target_group = 0;
  Vec3 target_center = Vec3::Zero();
  double target_radius = 0.0;
  double target_margin = 0.5;
  QuerySpec query;
};

struct SyntheticScene {
  PointCloud scene;
  std::vector<int> groups;  // per scene point
  PointCloud query;
  SimilarityTransform truth;  // query -> scene
  Vec3 truth_center = Vec3::Zero();
  double truth_radius = 0.0;
  PointCloud truth_region;
};

namespace synth_detail {

inline std::size_t point_count(double density, double area, Rng& rng) {
  const double expected = density * area;
  // Randomized rounding keeps the mean exact for small surfaces.
  const double base = std::floor(expected);
  return static_cast<std::size_t>(base) + (uniform01(rng) < expected - base ? 1 : 0);
}

inline void sample_rect(const Vec3& c, const Vec3& a, const Vec3& b, std::size_t n, Rng& rng, std::vector<Vec3>& out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double s = uniform(rng, -1.0, 1.0);
    const double t = uniform(rng, -1.0, 1.0);
    out.push_back(c + s * a + t * b);
  }
}

inline void sample_surface(const Surface& s, double density, Rng& rng, std::vector<Vec3>& out) {
  switch (s.kind) {
    case SurfaceKind::kBox: {
      const Vec3 h = s.half_extents;
      const Vec3 ex = s.rotation.col(0) * h.x(), ey = s.rotation.col(1) * h.y(), ez = s.rotation.col(2) * h.z();
      const double ax = 4.0 * h.y() * h.z(), ay = 4.0 * h.x() * h.z(), az = 4.0 * h.x() * h.y();
      sample_rect(s.center + ex, ey, ez, point_count(density, ax, rng), rng, out);
      sample_rect(s.center - ex, ey, ez, point_count(density, ax, rng), rng, out);
      sample_rect(s.center + ey, ex, ez, point_count(density, ay, rng), rng, out);
      sample_rect(s.center - ey, ex, ez, point_count(density, ay, rng), rng, out);
      sample_rect(s.center + ez, ex, ey, point_count(density, az, rng), rng, out);
      if (s.closed) sample_rect(s.center - ez, ex, ey, point_count(density, az, rng), rng, out);
      break;
    }
    case SurfaceKind::kCylinder: {
      const Vec3 ax = s.rotation.col(0), ay = s.rotation.col(1), az = s.rotation.col(2);
      const std::size_t n_side = point_count(density, 2.0 * std::numbers::pi * s.radius * s.height, rng);
      for (std::size_t i = 0; i < n_side; ++i) {
        const double th = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        const double z = uniform(rng, 0.0, s.height);
        out.push_back(s.center + s.radius * (std::cos(th) * ax + std::sin(th) * ay) + z * az);
      }
      if (s.closed) {
        const std::size_t n_cap = point_count(density, std::numbers::pi * s.radius * s.radius, rng);
        for (std::size_t i = 0; i < n_cap; ++i) {
          const double th = uniform(rng, 0.0, 2.0 * std::numbers::pi);
          const double r = s.radius * std::sqrt(uniform01(rng));
          out.push_back(s.center + r * (std::cos(th) * ax + std::sin(th) * ay) + s.height * az);
        }
      }
      break;
    }
    case SurfaceKind::kPlane:
      sample_rect(s.center, s.u, s.v, point_count(density, s.area(), rng), rng, out);
      break;
  }
}

inline Mat3 random_rotation(const QuerySpec& q, Rng& rng) {
  const double deg = q.fixed_rotation_deg >= 0.0 ? q.fixed_rotation_deg : uniform(rng, 0.0, q.max_rotation_deg);
  const Vec3 axis = q.rotate_about_z ? Vec3::UnitZ() : random_unit_vector(rng);
  return Eigen::AngleAxisd(deg * std::numbers::pi / 180.0, axis).toRotationMatrix();
}

}  // namespace synth_detail

/// Samples the scene surfaces, cuts out the ground-truth sphere and builds a
/// cross-source style query from an independent resampling of the same
/// surfaces: different density, Gaussian noise, random dropout, then the
/// inverse of a random similarity transform.
inline SyntheticScene generate_synthetic_scene(const SceneSpec& spec, std::uint64_t seed) {
  using namespace synth_detail;
  if (spec.surfaces.empty()) throw ConfigError("synthetic scene: no surfaces");
  const auto& q = spec.query;
  if (!(q.density_ratio > 0.0)) throw ConfigError("synthetic scene: density_ratio must be positive");
  if (!(q.dropout >= 0.0 && q.dropout < 1.0)) throw ConfigError("synthetic scene: dropout must be in [0, 1)");
  if (!(q.scale_min > 0.0 && q.scale_max >= q.scale_min)) throw ConfigError("synthetic scene: bad scale range");

  SyntheticScene out;
  Rng scene_rng(derive_seed(seed, 1));
  for (const auto& s : spec.surfaces) {
    const double dens = s.density > 0.0 ? s.density : spec.density;
    const std::size_t before = out.scene.size();
    sample_surface(s, dens, scene_rng, out.scene.points);
    out.groups.insert(out.groups.end(), out.scene.size() - before, s.group);
  }
  out.scene.id = "scene";
  if (out.scene.size() < 100) throw DataError("synthetic scene: fewer than 100 scene points");

  if (spec.target_radius > 0.0) {
    out.truth_center = spec.target_center;
    out.truth_radius = spec.target_radius;
  } else {
    PointCloud group;
    for (std::size_t i = 0; i < out.scene.size(); ++i) {
      if (out.groups[i] == spec.target_group) group.points.push_back(out.scene[i]);
    }
    if (group.empty()) throw ConfigError("synthetic scene: target group has no points");
    out.truth_center = centroid(group);
    out.truth_radius = bounding_radius(group, out.truth_center) + spec.target_margin;
  }
  const double r2 = out.truth_radius * out.truth_radius;
  for (const auto& p : out.scene.points) {
    if (squared_distance(p, out.truth_center) <= r2) out.truth_region.points.push_back(p);
  }
  out.truth_region.id = "truth_region";

  // Query surfaces are resampled independently of the scene sampling.
  Rng query_rng(derive_seed(seed, 2));
  std::vector<Vec3> resampled;
  for (const auto& s : spec.surfaces) {
    const double dens = (s.density > 0.0 ? s.density : spec.density) * q.density_ratio;
    sample_surface(s, dens, query_rng, resampled);
  }
  const double sigma = q.noise_frac * out.truth_radius;
  std::vector<Vec3> kept;
  for (const auto& p : resampled) {
    if (squared_distance(p, out.truth_center) > r2) continue;
    const Vec3 noisy = sigma > 0.0 ? Vec3(p + gaussian_vector(query_rng, sigma)) : p;
    if (q.dropout > 0.0 && uniform01(query_rng) < q.dropout) continue;
    kept.push_back(noisy);
  }
  if (kept.size() < 3) throw DataError("synthetic scene: query has fewer than 3 points");

  Rng pose_rng(derive_seed(seed, 3));
  const Mat3 rot = random_rotation(q, pose_rng);
  const double scale = uniform(pose_rng, q.scale_min, q.scale_max);
  const Vec3 offset(uniform(pose_rng, -q.offset_range, q.offset_range),
                    uniform(pose_rng, -q.offset_range, q.offset_range),
                    uniform(pose_rng, -q.offset_range, q.offset_range));
  // truth(x) = scale * R * (x - offset) + truth_center
  out.truth.rotation = rot;
  out.truth.scale = scale;
  out.truth.translation = out.truth_center - scale * (rot * offset);
  const SimilarityTransform inv = out.truth.inverse();
  out.query.points.reserve(kept.size());
  for (const auto& p : kept) out.query.points.push_back(inv.apply(p));
  out.query.id = "query";
  return out;
}

/// Mean distance from each point to its nearest other point.
inline double mean_nn_spacing(const PointCloud& cloud) {
  if (cloud.size() < 2) return 0.0;
  const KdTree tree(cloud);
  double total = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) total += tree.knn(cloud[i], 2).back().distance;
  return total / static_cast<double>(cloud.size());
}

namespace synth_detail {

inline Surface box(Vec3 c, Vec3 h, int group) {
  Surface s;
  s.kind = SurfaceKind::kBox;
  s.center = c;
  s.half_extents = h;
  s.group = group;
  return s;
}

inline Surface cylinder(Vec3 base, double r, double height, int group) {
  Surface s;
  s.kind = SurfaceKind::kCylinder;
  s.center = base;
  s.radius = r;
  s.height = height;
  s.closed = true;
  s.group = group;
  return s;
}

inline Surface plane(Vec3 c, Vec3 u, Vec3 v, int group) {
  Surface s;
  s.kind = SurfaceKind::kPlane;
  s.center = c;
  s.u = u;
  s.v = v;
  s.group = group;
  return s;
}

/// Building templates in local coordinates, ground at z = 0.
inline std::vector<Surface> building(int type, int group) {
  switch (type % 8) {
    case 0:  // hall with a round tower
      return {box({0, 0, 7}, {15, 9, 7}, group), cylinder({-11, 0, 0}, 4, 28, group)};
    case 1:  // L-shaped block
      return {box({0, -5, 6}, {15, 5, 6}, group), box({10, 7, 6}, {5, 7, 6}, group)};
    case 2:  // tower
      return {box({0, 0, 18}, {6, 6, 18}, group)};
    case 3:  // drum with annex
      return {cylinder({0, 0, 0}, 12, 14, group), box({16, 0, 4}, {5, 6, 4}, group)};
    case 4:  // twin slabs
      return {box({0, -7, 5}, {14, 4, 5}, group), box({0, 7, 5}, {14, 4, 5}, group)};
    case 5:  // gable house
      return {box({0, 0, 4}, {13, 8, 4}, group), plane({0, -4, 10}, {13, 0, 0}, {0, 4, 2}, group),
              plane({0, 4, 10}, {13, 0, 0}, {0, -4, 2}, group)};
    case 6:  // U-shaped courtyard block
      return {box({0, -10, 6}, {14, 3, 6}, group), box({-11, 2, 6}, {3, 9, 6}, group),
              box({11, 2, 6}, {3, 9, 6}, group)};
    default:  // long hall with chimney
      return {box({0, 0, 5}, {20, 7, 5}, group), cylinder({15, 0, 0}, 1.5, 20, group)};
  }
}

inline void place(Surface& s, const Mat3& rot, const Vec3& offset, double size) {
  s.center = offset + rot * (size * s.center);
  s.rotation = rot * s.rotation;
  s.half_extents *= size;
  s.radius *= size;
  s.height *= size;
  s.u = rot * (size * s.u);
  s.v = rot * (size * s.v);
}

}  // namespace synth_detail

/// Street-like scene: eight isolated buildings of distinct shapes on a
/// 2 x 4 grid with `spacing` meters between lots, random yaw and size
/// jitter around `building_size` times the template size (bounding radii
/// of roughly 18-26 m at the default). One building, chosen by the seed, is
/// the target. The density is set so the scene has about `scene_points` points.
inline SceneSpec street_scene_spec(std::uint64_t seed, const QuerySpec& query, std::size_t scene_points = 50000,
                                   double spacing = 160.0, double building_size = 1.0) {
  using namespace synth_detail;
  Rng rng(derive_seed(seed, 0x57));
  SceneSpec spec;
  spec.query = query;
  double area = 0.0;
  for (int b = 0; b < 8; ++b) {
    const double yaw = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double size = building_size * uniform(rng, 0.9, 1.1);
    const Mat3 rot = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
    const Vec3 offset(spacing * (b % 4), spacing * (b / 4), 0.0);
    for (auto s : building(b, b)) {
      place(s, rot, offset, size);
      area += s.area();
      spec.surfaces.push_back(s);
    }
  }
  spec.density = static_cast<double>(scene_points) / area;
  spec.target_group = static_cast<int>(uniform_index(rng, 8));
  return spec;
}

}  // namespace crossreg
