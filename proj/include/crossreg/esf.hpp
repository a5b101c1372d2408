#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "crossreg/pointcloud.hpp"
#include "crossreg/random.hpp"

namespace crossreg {

inline constexpr std::size_t kEsfBinsPerBlock = 64;
inline constexpr std::size_t kEsfBlocks = 10;
inline constexpr std::size_t kEsfLength = kEsfBinsPerBlock * kEsfBlocks;
inline constexpr std::size_t kEsfDefaultSamples = 20000;
inline constexpr int kEsfVoxelResolution = 64;

/// Sub-histogram layout of the 640-bin descriptor.
enum class EsfBlock : std::size_t {
  kD2On = 0, kD2Off, kD2Mixed,
  kA3On, kA3Off, kA3Mixed,
  kD3On, kD3Off, kD3Mixed,
  kD2Ratio,
};

enum class LineClass : std::size_t { kOn = 0, kOff = 1, kMixed = 2 };

/// Ensemble of Shape Functions: ten 64-bin histograms, each normalized to
/// unit mass (or all zero when no sample fell into its class).
struct EsfDescriptor {
  std::vector<double> bins = std::vector<double>(kEsfLength, 0.0);

  std::size_t size() const noexcept { return bins.size(); }

  double block_sum(std::size_t block) const {
    double s = 0.0;
    for (std::size_t i = 0; i < kEsfBinsPerBlock; ++i) s += bins[block * kEsfBinsPerBlock + i];
    return s;
  }

  bool operator==(const EsfDescriptor&) const = default;
};

/// Cubic occupancy grid over a cloud's bounding box.
///
/// Points are mapped into unit-cube coordinates and snapped to a 2^-20
/// lattice before anything else is computed. Translating or uniformly scaling
/// a cloud then reproduces the same lattice coordinates, so descriptors built
/// from them are bit-identical.
class VoxelGrid {
 public:
  static constexpr double kLattice = 1048576.0;  // 2^20

  VoxelGrid() = default;

  VoxelGrid(const PointCloud& cloud, int resolution) : resolution_(resolution) {
    require_nonempty(cloud, "voxelize");
    if (resolution < 2) throw ConfigError("voxelize: resolution must be >= 2");
    Vec3 lo = cloud[0], hi = cloud[0];
    for (const auto& p : cloud.points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const double longest = (hi - lo).maxCoeff();
    if (longest > 0.0) {
      side_ = longest * (1.0 + 2e-6);
      origin_ = lo.array() - longest * 1e-6;
    } else {
      side_ = 1.0;
      origin_ = lo.array() - 0.5;
    }
    const auto n = static_cast<std::size_t>(resolution);
    occupancy_.assign((n * n * n + 63) / 64, 0);
    unit_.reserve(cloud.size());
    for (const auto& p : cloud.points) {
      const Vec3 u = to_unit(p);
      unit_.push_back(u);
      const std::size_t cell = linear(cell_of(u));
      const std::uint64_t bit = std::uint64_t{1} << (cell & 63);
      if (!(occupancy_[cell >> 6] & bit)) {
        occupancy_[cell >> 6] |= bit;
        ++occupied_;
      }
    }
  }

  int resolution() const noexcept { return resolution_; }
  std::size_t occupied_count() const noexcept { return occupied_; }
  const Vec3& origin() const noexcept { return origin_; }
  double side() const noexcept { return side_; }

  /// Lattice-snapped unit-cube coordinates of the cloud, in point order.
  const std::vector<Vec3>& unit_points() const noexcept { return unit_; }

  Vec3 to_unit(const Vec3& p) const {
    Vec3 u = (p - origin_) / side_;
    for (int a = 0; a < 3; ++a) u[a] = std::round(u[a] * kLattice) / kLattice;
    return u;
  }

  Eigen::Vector3i cell_of(const Vec3& unit) const {
    Eigen::Vector3i c;
    for (int a = 0; a < 3; ++a) {
      const int i = static_cast<int>(std::floor(unit[a] * resolution_));
      c[a] = std::clamp(i, 0, resolution_ - 1);
    }
    return c;
  }

  bool occupied(const Eigen::Vector3i& c) const { return occupied_linear(linear(c)); }
  bool occupied_linear(std::size_t cell) const { return (occupancy_[cell >> 6] >> (cell & 63)) & 1U; }

  std::size_t linear(const Eigen::Vector3i& c) const {
    const auto n = static_cast<std::size_t>(resolution_);
    return (static_cast<std::size_t>(c.z()) * n + static_cast<std::size_t>(c.y())) * n +
           static_cast<std::size_t>(c.x());
  }

 private:
  int resolution_ = kEsfVoxelResolution;
  Vec3 origin_ = Vec3::Zero();
  double side_ = 1.0;
  std::vector<std::uint64_t> occupancy_;  // bitset, x fastest
  std::vector<Vec3> unit_;
  std::size_t occupied_ = 0;
};

inline VoxelGrid voxelize(const PointCloud& cloud, int resolution = kEsfVoxelResolution) {
  return VoxelGrid(cloud, resolution);
}

struct LineTrace {
  LineClass cls = LineClass::kOn;
  double occupied_fraction = 1.0;
  std::size_t visited = 1;
};

/// Walks the voxels crossed by the segment between two unit-cube points
/// (3D DDA) and classifies it: ON when every visited voxel is occupied, OFF
/// when no voxel strictly between the endpoint cells is, MIXED otherwise. Each step advances along the axis whose next
/// cell boundary is closest among the axes that still have cells to cross,
/// so the walk always ends in the endpoint's cell.
inline LineTrace trace_unit_segment(const VoxelGrid& grid, const Vec3& pu, const Vec3& qu) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const int res = grid.resolution();
  const Eigen::Vector3i c0 = grid.cell_of(pu);
  const Eigen::Vector3i c1 = grid.cell_of(qu);
  const Vec3 p = pu * res;
  const Vec3 d = (qu - pu) * res;
  const std::ptrdiff_t stride[3] = {1, res, static_cast<std::ptrdiff_t>(res) * res};

  int remaining[3];
  std::ptrdiff_t step[3];
  double t_max[3], t_delta[3];
  int total = 0;
  for (int a = 0; a < 3; ++a) {
    remaining[a] = std::abs(c1[a] - c0[a]);
    total += remaining[a];
    step[a] = c1[a] > c0[a] ? stride[a] : -stride[a];
    if (remaining[a] == 0) {
      t_max[a] = kInf;
      t_delta[a] = kInf;
      continue;
    }
    const double boundary = c1[a] > c0[a] ? c0[a] + 1.0 : static_cast<double>(c0[a]);
    t_max[a] = (boundary - p[a]) / d[a];
    t_delta[a] = 1.0 / std::abs(d[a]);
  }

  std::size_t cell = grid.linear(c0);
  std::size_t occupied = grid.occupied_linear(cell) ? 1 : 0;
  bool interior_occupied = false;
  for (int s = 0; s < total; ++s) {
    // Lowest axis wins ties; exhausted axes sit at infinity.
    const int a = t_max[0] <= t_max[1] ? (t_max[0] <= t_max[2] ? 0 : 2) : (t_max[1] <= t_max[2] ? 1 : 2);
    cell = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(cell) + step[a]);
    t_max[a] = --remaining[a] == 0 ? kInf : t_max[a] + t_delta[a];
    const bool occ = grid.occupied_linear(cell);
    occupied += occ;
    interior_occupied |= occ && s + 1 < total;
  }

  LineTrace out;
  out.visited = static_cast<std::size_t>(total) + 1;
  out.occupied_fraction = static_cast<double>(occupied) / static_cast<double>(out.visited);
  if (occupied == out.visited) {
    out.cls = LineClass::kOn;
  } else if (!interior_occupied) {
    out.cls = LineClass::kOff;
  } else {
    out.cls = LineClass::kMixed;
  }
  return out;
}

/// Classifies segment pq (cloud coordinates) against the grid's occupancy.
inline LineTrace trace_line_class(const VoxelGrid& grid, const Vec3& p, const Vec3& q) {
  return trace_unit_segment(grid, grid.to_unit(p), grid.to_unit(q));
}

namespace esf_detail {

inline std::size_t bin_of(double v) {
  if (!(v > 0.0)) return 0;
  const auto i = static_cast<std::size_t>(v * static_cast<double>(kEsfBinsPerBlock));
  return std::min(i, kEsfBinsPerBlock - 1);
}

inline LineClass majority(LineClass a, LineClass b, LineClass c) {
  if (a == b || a == c) return a;
  if (b == c) return b;
  return LineClass::kMixed;
}

}  // namespace esf_detail

/// Computes the ESF descriptor from `samples` random point triples.
///
/// Per triple, three segments are classified ON/OFF/MIXED. Their lengths go
/// to the D2 block of their class, MIXED segments additionally record their
/// occupied-voxel fraction in D2-ratio, each interior angle goes to the A3
/// block of the opposite side's class, and sqrt(area) goes to the D3 block
/// of the majority class (MIXED when all three differ). Lengths and
/// sqrt(area) are divided by the grid diagonal.
inline EsfDescriptor compute_esf(const PointCloud& cloud, std::size_t samples = kEsfDefaultSamples,
                                 std::uint64_t seed = 0) {
  using esf_detail::bin_of;
  if (cloud.size() < 3) throw DataError("compute_esf: need at least 3 points");
  const VoxelGrid grid(cloud, kEsfVoxelResolution);
  const auto& u = grid.unit_points();
  const double diag = std::sqrt(3.0);
  const std::size_t n = u.size();

  std::array<std::array<std::uint64_t, kEsfBinsPerBlock>, kEsfBlocks> counts{};
  auto add = [&](EsfBlock block, std::size_t bin) { ++counts[static_cast<std::size_t>(block)][bin]; };

  Rng rng(seed);
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t i0 = uniform_index(rng, n);
    std::size_t i1 = uniform_index(rng, n);
    while (i1 == i0) i1 = uniform_index(rng, n);
    std::size_t i2 = uniform_index(rng, n);
    while (i2 == i0 || i2 == i1) i2 = uniform_index(rng, n);
    const Vec3* v[3] = {&u[i0], &u[i1], &u[i2]};

    // Side e joins vertex e and vertex (e+1)%3; it is opposite vertex (e+2)%3.
    LineClass cls[3];
    double len[3];
    for (int e = 0; e < 3; ++e) {
      const Vec3& a = *v[e];
      const Vec3& b = *v[(e + 1) % 3];
      const LineTrace tr = trace_unit_segment(grid, a, b);
      cls[e] = tr.cls;
      len[e] = (b - a).norm();
      add(static_cast<EsfBlock>(static_cast<std::size_t>(EsfBlock::kD2On) + static_cast<std::size_t>(tr.cls)),
          bin_of(len[e] / diag));
      if (tr.cls == LineClass::kMixed) add(EsfBlock::kD2Ratio, bin_of(tr.occupied_fraction));
    }

    for (int k = 0; k < 3; ++k) {
      const Vec3& apex = *v[k];
      const Vec3 e1 = *v[(k + 1) % 3] - apex;
      const Vec3 e2 = *v[(k + 2) % 3] - apex;
      if (e1.squaredNorm() == 0.0 || e2.squaredNorm() == 0.0) continue;
      const double angle = std::atan2(e1.cross(e2).norm(), e1.dot(e2));
      const LineClass opposite = cls[(k + 1) % 3];
      add(static_cast<EsfBlock>(static_cast<std::size_t>(EsfBlock::kA3On) + static_cast<std::size_t>(opposite)),
          bin_of(angle / std::numbers::pi));
    }

    const double area = 0.5 * (*v[1] - *v[0]).cross(*v[2] - *v[0]).norm();
    const LineClass major = esf_detail::majority(cls[0], cls[1], cls[2]);
    add(static_cast<EsfBlock>(static_cast<std::size_t>(EsfBlock::kD3On) + static_cast<std::size_t>(major)),
        bin_of(std::sqrt(area) / diag));
  }

  EsfDescriptor out;
  for (std::size_t b = 0; b < kEsfBlocks; ++b) {
    std::uint64_t total = 0;
    for (auto c : counts[b]) total += c;
    if (total == 0) continue;
    for (std::size_t i = 0; i < kEsfBinsPerBlock; ++i) {
      out.bins[b * kEsfBinsPerBlock + i] = static_cast<double>(counts[b][i]) / static_cast<double>(total);
    }
  }
  return out;
}

/// Euclidean norm of the bin-wise difference.
inline double descriptor_distance(const EsfDescriptor& a, const EsfDescriptor& b) {
  if (a.size() != kEsfLength || b.size() != kEsfLength) {
    throw DataError("descriptor_distance: descriptor length mismatch (" + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()) + ")");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < kEsfLength; ++i) {
    const double d = a.bins[i] - b.bins[i];
    s += d * d;
  }
  return std::sqrt(s);
}

/// One CSV row of 640 values, 17 significant digits.
inline void write_descriptor_row(std::ostream& out, const EsfDescriptor& d) {
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (i) out << ',';
    out << d.bins[i];
  }
  out.precision(old);
}

inline EsfDescriptor parse_descriptor_fields(const std::vector<std::string>& fields, std::size_t offset) {
  if (fields.size() < offset + kEsfLength) throw DataError("descriptor row: expected 640 values");
  EsfDescriptor d;
  for (std::size_t i = 0; i < kEsfLength; ++i) {
    try {
      d.bins[i] = std::stod(fields[offset + i]);
    } catch (const std::exception&) {
      throw DataError("descriptor row: bad value '" + fields[offset + i] + "'");
    }
  }
  return d;
}

}  // namespace crossreg
