#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "crossreg/esf.hpp"
#include "crossreg/parallel.hpp"
#include "crossreg/pointcloud.hpp"
#include "crossreg/spatial_index.hpp"

namespace crossreg {

struct MatchConfig {
  std::vector<double> radii{30, 35, 40, 45, 50, 55, 60};
  std::size_t regions_per_scale = 100;
  std::size_t top_k = 20;
  std::size_t esf_samples = kEsfDefaultSamples;
  // Clouds are thinned to this many points before the descriptor is
  // computed, so that occupancy statistics do not depend on sensor density.
  std::size_t esf_max_points = 2000;
  std::uint64_t seed = 0;
  std::size_t min_region_points = 50;
  std::size_t attempt_factor = 10;  // center draws allowed per requested region
  std::size_t threads = 1;

  void validate() const {
    if (radii.empty()) throw ConfigError("match config: radii must not be empty");
    for (std::size_t i = 0; i < radii.size(); ++i) {
      if (!(radii[i] > 0.0) || !std::isfinite(radii[i])) throw ConfigError("match config: radii must be positive");
      if (i > 0 && !(radii[i] > radii[i - 1])) throw ConfigError("match config: radii must be strictly ascending");
    }
    if (top_k < 1) throw ConfigError("match config: top_k must be >= 1");
    if (esf_samples < 1) throw ConfigError("match config: esf_samples must be >= 1");
    if (esf_max_points < 3) throw ConfigError("match config: esf_max_points must be >= 3");
    if (min_region_points < 3) throw ConfigError("match config: min_region_points must be >= 3");
  }

  /// Seed shared by every descriptor, so equal point sets get equal descriptors.
  std::uint64_t esf_seed() const { return derive_seed(seed, 0xE5F); }
};

/// Spherical crop of the scene with its descriptor. `scale` and `similarity`
/// are filled relative to a query by top_k_matches.
struct CandidateRegion {
  std::size_t index = 0;  // position in generation order
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  PointCloud cloud;
  EsfDescriptor descriptor;
  double scale = 0.0;
  double similarity = std::numeric_limits<double>::infinity();
};

struct CandidateSet {
  std::vector<CandidateRegion> regions;
  std::vector<std::string> warnings;
  double coverage = 0.0;  // fraction of scene points inside at least one region
};

/// Descriptor of a region or rescaled query under the matching settings.
inline EsfDescriptor describe(const PointCloud& cloud, const MatchConfig& cfg) {
  const auto seed = cfg.esf_seed();
  return compute_esf(uniform_downsample(cloud, cfg.esf_max_points, seed), cfg.esf_samples, seed);
}

namespace coarse_detail {

inline void compute_descriptors(std::vector<CandidateRegion>& regions, const MatchConfig& cfg) {
  parallel_for(regions.size(), cfg.threads,
               [&](std::size_t i) { regions[i].descriptor = describe(regions[i].cloud, cfg); });
}

inline double coverage_of(const std::vector<CandidateRegion>& regions, const SpatialIndex& index) {
  if (index.empty()) return 0.0;
  std::vector<std::uint8_t> covered(index.size(), 0);
  for (const auto& r : regions) {
    for (auto i : index.radius_search(r.center, r.radius)) covered[i] = 1;
  }
  std::size_t n = 0;
  for (auto c : covered) n += c;
  return static_cast<double>(n) / static_cast<double>(index.size());
}

}  // namespace coarse_detail

/// Places `regions_per_scale` spheres per radius on seeded random scene
/// points, keeps crops with at least `min_region_points` points, and
/// describes each crop. Regions are ordered by (radius, draw order); the
/// descriptor pass may run in parallel without affecting the result.
inline CandidateSet generate_candidates(const PointCloud& scene, const SpatialIndex& index,
                                        const MatchConfig& cfg) {
  require_nonempty(scene, "generate_candidates");
  cfg.validate();
  CandidateSet out;
  for (std::size_t r = 0; r < cfg.radii.size(); ++r) {
    const double radius = cfg.radii[r];
    Rng rng(derive_seed(cfg.seed, r));
    std::size_t accepted = 0;
    const std::size_t budget = cfg.regions_per_scale * cfg.attempt_factor;
    for (std::size_t attempt = 0; attempt < budget && accepted < cfg.regions_per_scale; ++attempt) {
      const Vec3 center = scene[uniform_index(rng, scene.size())];
      auto idx = index.radius_search(center, radius);
      if (idx.size() < cfg.min_region_points) continue;
      CandidateRegion region;
      region.index = out.regions.size();
      region.center = center;
      region.radius = radius;
      region.cloud = select(scene, idx);
      out.regions.push_back(std::move(region));
      ++accepted;
    }
    if (accepted < cfg.regions_per_scale) {
      std::ostringstream msg;
      msg << "radius " << radius << ": only " << accepted << " of " << cfg.regions_per_scale
          << " regions had at least " << cfg.min_region_points << " points";
      out.warnings.push_back(msg.str());
    }
  }
  coarse_detail::compute_descriptors(out.regions, cfg);
  out.coverage = coarse_detail::coverage_of(out.regions, index);
  return out;
}

/// candidate_radius over the query's bounding radius about its centroid.
inline double estimate_scale(double candidate_radius, const PointCloud& query) {
  require_nonempty(query, "estimate_scale");
  const double r = bounding_radius(query, centroid(query));
  if (!(r > 0.0)) throw DataError("estimate_scale: degenerate query (bounding radius 0)");
  if (!(candidate_radius > 0.0)) throw ConfigError("estimate_scale: candidate radius must be positive");
  return candidate_radius / r;
}

/// Centroid-anchored uniform scaling, as a transform: x -> c + s (x - c).
inline SimilarityTransform scaling_about(const Vec3& anchor, double scale) {
  SimilarityTransform t;
  t.scale = scale;
  t.translation = (1.0 - scale) * anchor;
  return t;
}

inline PointCloud normalize_query(const PointCloud& query, double scale) {
  if (!(scale > 0.0)) throw ConfigError("normalize_query: scale must be positive");
  const Vec3 c = centroid(query);
  PointCloud out;
  out.id = query.id;
  out.points.reserve(query.size());
  for (const auto& p : query.points) out.points.push_back(c + scale * (p - c));
  return out;
}

/// Scores every candidate against the query rescaled to that candidate's
/// radius and returns the best `top_k` by ascending descriptor distance
/// (ties: smaller radius, then generation order). Query descriptors are
/// cached per scale rounded to 1e-6.
inline std::vector<CandidateRegion> top_k_matches(std::vector<CandidateRegion> candidates,
                                                  const PointCloud& query, const MatchConfig& cfg) {
  if (candidates.empty()) return {};
  require_nonempty(query, "top_k_matches");
  const double query_radius = bounding_radius(query, centroid(query));
  if (!(query_radius > 0.0)) throw DataError("top_k_matches: degenerate query (bounding radius 0)");

  std::map<long long, std::size_t> slot_of_scale;
  std::vector<double> scales;
  for (auto& c : candidates) {
    c.scale = c.radius / query_radius;
    const long long key = std::llround(c.scale * 1e6);
    if (slot_of_scale.emplace(key, scales.size()).second) scales.push_back(c.scale);
  }
  std::vector<EsfDescriptor> query_desc(scales.size());
  parallel_for(scales.size(), cfg.threads,
               [&](std::size_t i) { query_desc[i] = describe(normalize_query(query, scales[i]), cfg); });
  for (auto& c : candidates) {
    const auto& qd = query_desc[slot_of_scale.at(std::llround(c.scale * 1e6))];
    c.similarity = descriptor_distance(c.descriptor, qd);
  }
  std::sort(candidates.begin(), candidates.end(), [](const CandidateRegion& a, const CandidateRegion& b) {
    if (a.similarity != b.similarity) return a.similarity < b.similarity;
    if (a.radius != b.radius) return a.radius < b.radius;
    return a.index < b.index;
  });
  if (candidates.size() > cfg.top_k) candidates.resize(cfg.top_k);
  return candidates;
}

// Candidate cache: CSV header line, then one row per region with
// cx,cy,cz,radius followed by the 640 descriptor values.

inline void save_candidate_cache(const CandidateSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write candidate cache " + path);
  out << "cx,cy,cz,radius";
  for (std::size_t i = 0; i < kEsfLength; ++i) out << ",esf_" << i;
  out << '\n';
  out.precision(17);
  for (const auto& r : set.regions) {
    out << r.center.x() << ',' << r.center.y() << ',' << r.center.z() << ',' << r.radius << ',';
    write_descriptor_row(out, r.descriptor);
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

/// Rebuilds regions from a cache. Crops are recomputed from the scene, the
/// descriptors are taken from the file.
inline CandidateSet load_candidate_cache(const std::string& path, const PointCloud& scene,
                                         const SpatialIndex& index) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open candidate cache " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("cx,cy,cz,radius", 0) != 0) {
    throw DataError("candidate cache " + path + ": missing header");
  }
  CandidateSet set;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 4 + kEsfLength) {
      throw DataError("candidate cache row " + std::to_string(row) + ": expected " +
                      std::to_string(4 + kEsfLength) + " columns");
    }
    CandidateRegion r;
    r.index = set.regions.size();
    try {
      r.center = Vec3(std::stod(fields[0]), std::stod(fields[1]), std::stod(fields[2]));
      r.radius = std::stod(fields[3]);
    } catch (const std::exception&) {
      throw DataError("candidate cache row " + std::to_string(row) + ": bad number");
    }
    r.descriptor = parse_descriptor_fields(fields, 4);
    r.cloud = select(scene, index.radius_search(r.center, r.radius));
    set.regions.push_back(std::move(r));
    ++row;
  }
  set.coverage = coarse_detail::coverage_of(set.regions, index);
  return set;
}

}  // namespace crossreg
