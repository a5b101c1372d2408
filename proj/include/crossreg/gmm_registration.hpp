#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "crossreg/pointcloud.hpp"
#include "crossreg/procrustes.hpp"
#include "crossreg/random.hpp"

namespace crossreg {

struct RegistrationConfig {
  std::size_t components = 300;
  std::size_t max_iterations = 100;
  double tol = 1e-6;             // relative log-likelihood change
  double outlier_weight = 0.05;  // fixed mass of the uniform outlier class
  std::size_t downsample_max = 2000;
  std::uint64_t seed = 0;

  void validate() const {
    if (components < 1) throw ConfigError("registration config: components must be >= 1");
    if (max_iterations < 1) throw ConfigError("registration config: max_iterations must be >= 1");
    if (!(tol > 0.0)) throw ConfigError("registration config: tol must be positive");
    if (!(outlier_weight >= 0.0 && outlier_weight < 1.0)) {
      throw ConfigError("registration config: outlier_weight must be in [0, 1)");
    }
    if (downsample_max < 3) throw ConfigError("registration config: downsample_max must be >= 3");
  }
};

/// Isotropic Gaussian mixture shared by both point sets, plus a uniform
/// outlier class of fixed weight over the joint bounding sphere.
struct GmmState {
  std::vector<Vec3> means;
  std::vector<double> variances;
  std::vector<double> weights;  // sum to 1 - outlier_weight
  double outlier_weight = 0.0;
  double outlier_density = 0.0;  // 1 / volume of the joint bounding sphere
  double variance_floor = 0.0;

  std::size_t size() const noexcept { return means.size(); }

  double total_weight() const {
    double s = outlier_weight;
    for (double w : weights) s += w;
    return s;
  }
};

/// Pre-applied uniform scaling of the query, x -> anchor + scale (x - anchor).
struct ScaleNormalization {
  double scale = 1.0;
  Vec3 anchor = Vec3::Zero();

  SimilarityTransform transform() const {
    SimilarityTransform t;
    t.scale = scale;
    t.translation = (1.0 - scale) * anchor;
    return t;
  }
};

struct JrmpcResult {
  /// Maps the original (unnormalized) query into scene coordinates.
  SimilarityTransform transform;
  /// Rigid part only: normalized query -> scene.
  SimilarityTransform rigid;
  GmmState gmm;
  std::vector<double> loglik_trace;  // one entry per E-step
  std::size_t iterations = 0;        // M-steps performed
  bool converged = false;
  std::vector<std::string> warnings;
};

/// Seeded initialization: means on a random subset of the union of both sets,
/// equal variances (joint radius / K^(1/3))^2, equal weights.
inline GmmState init_gmm(const PointCloud& region_ds, const PointCloud& query_ds, const RegistrationConfig& cfg,
                         std::vector<std::string>* warnings = nullptr) {
  const std::size_t combined = region_ds.size() + query_ds.size();
  if (combined == 0) throw DataError("init_gmm: empty point sets");
  std::size_t k = cfg.components;
  const std::size_t cap = std::max<std::size_t>(1, combined / 2);
  if (k > cap) {
    if (warnings) {
      warnings->push_back("GMM components clamped from " + std::to_string(k) + " to " + std::to_string(cap));
    }
    k = cap;
  }

  PointCloud joint;
  joint.points.reserve(combined);
  joint.points.insert(joint.points.end(), region_ds.points.begin(), region_ds.points.end());
  joint.points.insert(joint.points.end(), query_ds.points.begin(), query_ds.points.end());
  double radius = bounding_radius(joint, centroid(joint));
  if (!(radius > 0.0)) radius = 1.0;

  GmmState g;
  Rng rng(derive_seed(cfg.seed, 0x6D6D));
  for (auto i : sample_without_replacement(rng, combined, k)) g.means.push_back(joint[i]);
  const double sigma = radius / std::cbrt(static_cast<double>(k));
  g.variances.assign(k, sigma * sigma);
  g.weights.assign(k, (1.0 - cfg.outlier_weight) / static_cast<double>(k));
  g.outlier_weight = cfg.outlier_weight;
  g.outlier_density = 1.0 / (4.0 / 3.0 * std::numbers::pi * radius * radius * radius);
  g.variance_floor = (1e-4 * radius) * (1e-4 * radius);
  return g;
}

namespace gmm_detail {

// Terms further than this below the row maximum vanish against it in
// double precision and are stored as exact zeros.
inline constexpr double kNegligibleLog = -60.0;

/// Row-sparse responsibility matrix: for point i, entries
/// [offset[i], offset[i+1]) of (component, value).
struct Responsibilities {
  std::vector<std::size_t> offset{0};
  std::vector<std::uint32_t> component;
  std::vector<double> value;

  void clear() {
    offset.assign(1, 0);
    component.clear();
    value.clear();
  }
  std::size_t rows() const { return offset.size() - 1; }
};

/// E-step over `pts`: fills the responsibilities and returns the
/// observed-data log-likelihood contribution.
inline long double expectation(const GmmState& g, const std::vector<Vec3>& pts, Responsibilities& resp) {
  const std::size_t k = g.size();
  // Structure-of-arrays copy of the components for a vectorizable inner loop.
  std::vector<double> mx(k), my(k), mz(k), log_norm(k), inv_two_var(k), term(k);
  for (std::size_t c = 0; c < k; ++c) {
    mx[c] = g.means[c].x();
    my[c] = g.means[c].y();
    mz[c] = g.means[c].z();
    log_norm[c] = g.weights[c] > 0.0
                      ? std::log(g.weights[c]) - 1.5 * std::log(2.0 * std::numbers::pi * g.variances[c])
                      : -std::numeric_limits<double>::infinity();
    inv_two_var[c] = 0.5 / g.variances[c];
  }
  const double log_out = g.outlier_weight > 0.0 ? std::log(g.outlier_weight * g.outlier_density)
                                                : -std::numeric_limits<double>::infinity();
  resp.clear();
  long double total = 0.0L;
  for (const Vec3& p : pts) {
    const double px = p.x(), py = p.y(), pz = p.z();
    double m = log_out;
    for (std::size_t c = 0; c < k; ++c) {
      const double dx = px - mx[c], dy = py - my[c], dz = pz - mz[c];
      term[c] = log_norm[c] - (dx * dx + dy * dy + dz * dz) * inv_two_var[c];
    }
    for (std::size_t c = 0; c < k; ++c) m = std::max(m, term[c]);
    double s = std::isfinite(log_out) ? std::exp(log_out - m) : 0.0;
    const std::size_t row_begin = resp.value.size();
    const double cut = m + kNegligibleLog;
    for (std::size_t c = 0; c < k; ++c) {
      if (!(term[c] > cut)) continue;
      const double x = std::exp(term[c] - m);
      s += x;
      resp.component.push_back(static_cast<std::uint32_t>(c));
      resp.value.push_back(x);
    }
    const double inv = 1.0 / s;
    for (std::size_t j = row_begin; j < resp.value.size(); ++j) resp.value[j] *= inv;
    resp.offset.push_back(resp.value.size());
    total += static_cast<long double>(m) + static_cast<long double>(std::log(s));
  }
  return total;
}

}  // namespace gmm_detail

/// Joint registration of two point sets against one shared GMM.
///
/// The region is the gauge-fixed set and never moves; the query is moved by
/// a rigid transform. Each iteration runs one E-step followed by
/// conditional maximizations of the query transform (weighted Procrustes
/// toward responsibility-weighted virtual targets), the means, the
/// variances (floored) and the weights (outlier mass held fixed), so the
/// observed-data log-likelihood never decreases.
///
/// `query_normalized` is the query after the scaling in `norm`; the returned
/// `transform` composes that scaling with the estimated pose.
inline JrmpcResult jrmpc_register(const PointCloud& region, const PointCloud& query_normalized,
                                  const RegistrationConfig& cfg, const ScaleNormalization& norm = {}) {
  cfg.validate();
  if (region.size() < 3 || query_normalized.size() < 3) {
    throw DataError("jrmpc_register: both clouds need at least 3 points");
  }
  if (is_collinear(region) || is_collinear(query_normalized)) {
    throw DataError("rank-deficient Procrustes: collinear input cloud");
  }

  JrmpcResult out;
  const PointCloud region_ds = uniform_downsample(region, cfg.downsample_max, derive_seed(cfg.seed, 1));
  const PointCloud query_ds = uniform_downsample(query_normalized, cfg.downsample_max, derive_seed(cfg.seed, 2));

  SimilarityTransform pose;  // normalized query -> scene, rigid
  pose.translation = centroid(region_ds) - centroid(query_ds);
  std::vector<Vec3> moved(query_ds.size());
  auto move_query = [&] {
    for (std::size_t i = 0; i < query_ds.size(); ++i) moved[i] = pose.apply(query_ds[i]);
  };
  move_query();

  GmmState g = init_gmm(region_ds, PointCloud(moved), cfg, &out.warnings);
  const std::size_t k = g.size();
  const std::size_t nq = query_ds.size();
  gmm_detail::Responsibilities resp_r, resp_q;

  std::vector<Vec3> targets(nq);
  std::vector<double> lambda(nq);
  std::vector<double> mass(k);
  std::vector<Vec3> sum(k);

  for (std::size_t it = 0;; ++it) {
    const long double ll = gmm_detail::expectation(g, region_ds.points, resp_r) +
                           gmm_detail::expectation(g, moved, resp_q);
    const double ll_d = static_cast<double>(ll);
    if (!std::isfinite(ll_d)) {
      throw DataError("jrmpc_register: non-finite log-likelihood at iteration " + std::to_string(it));
    }
    out.loglik_trace.push_back(ll_d);
    if (it > 0) {
      const double prev = out.loglik_trace[it - 1];
      if (std::abs(ll_d - prev) < cfg.tol * std::abs(prev)) {
        out.converged = true;
        break;
      }
    }
    if (it == cfg.max_iterations) break;

    // Query transform given current means/variances.
    for (std::size_t i = 0; i < nq; ++i) {
      double l = 0.0;
      Vec3 y = Vec3::Zero();
      for (std::size_t j = resp_q.offset[i]; j < resp_q.offset[i + 1]; ++j) {
        const std::uint32_t c = resp_q.component[j];
        const double w = resp_q.value[j] / g.variances[c];
        l += w;
        y += w * g.means[c];
      }
      lambda[i] = l;
      targets[i] = l > 0.0 ? Vec3(y / l) : query_ds[i];
    }
    double lsum = 0.0;
    for (double l : lambda) lsum += l;
    if (lsum > 0.0) {
      const RigidFit fit = weighted_procrustes(query_ds.points, targets, lambda);
      pose.rotation = fit.rotation;
      pose.translation = fit.translation;
      move_query();
    }

    // Means, then variances, then weights.
    std::fill(mass.begin(), mass.end(), 0.0);
    std::fill(sum.begin(), sum.end(), Vec3::Zero());
    auto accumulate_means = [&](const std::vector<Vec3>& pts, const gmm_detail::Responsibilities& resp) {
      for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = resp.offset[i]; j < resp.offset[i + 1]; ++j) {
          const std::uint32_t c = resp.component[j];
          mass[c] += resp.value[j];
          sum[c] += resp.value[j] * pts[i];
        }
      }
    };
    accumulate_means(region_ds.points, resp_r);
    accumulate_means(moved, resp_q);
    for (std::size_t c = 0; c < k; ++c) {
      if (mass[c] > 0.0) g.means[c] = sum[c] / mass[c];
    }
    std::vector<double> sq(k, 0.0);
    auto accumulate_var = [&](const std::vector<Vec3>& pts, const gmm_detail::Responsibilities& resp) {
      for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = resp.offset[i]; j < resp.offset[i + 1]; ++j) {
          const std::uint32_t c = resp.component[j];
          sq[c] += resp.value[j] * squared_distance(pts[i], g.means[c]);
        }
      }
    };
    accumulate_var(region_ds.points, resp_r);
    accumulate_var(moved, resp_q);
    double mass_total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      mass_total += mass[c];
      if (mass[c] > 0.0) g.variances[c] = std::max(g.variance_floor, sq[c] / (3.0 * mass[c]));
    }
    if (mass_total > 0.0) {
      for (std::size_t c = 0; c < k; ++c) g.weights[c] = (1.0 - g.outlier_weight) * mass[c] / mass_total;
    }
    out.iterations = it + 1;
  }

  out.gmm = std::move(g);
  out.rigid = pose;
  out.transform = pose.compose(norm.transform());
  return out;
}

}  // namespace crossreg
