#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "crossreg/coarse_match.hpp"
#include "crossreg/gmm_registration.hpp"
#include "crossreg/icp.hpp"
#include "crossreg/parallel.hpp"
#include "crossreg/ply.hpp"
#include "crossreg/scoring.hpp"
#include "crossreg/spatial_index.hpp"

namespace crossreg {

enum class RefineMethod { kGmm, kIcp };

inline const char* to_string(RefineMethod m) { return m == RefineMethod::kGmm ? "gmm" : "icp"; }

struct RefineOptions {
  RefineMethod method = RefineMethod::kGmm;
  RegistrationConfig registration;
  ScoringConfig scoring;
  std::size_t icp_max_iterations = 50;
  double icp_tol = 1e-6;
  std::size_t threads = 1;
  /// Called once per candidate with its generation index and the EM trace.
  std::function<void(std::size_t, const std::vector<double>&)> on_trace;
};

/// Registers the query (rescaled to each candidate's radius) against every
/// candidate and scores it on the original clouds. Output order follows the
/// input order; each candidate uses a seed derived from its generation index.
inline std::vector<std::pair<CandidateRegion, RegistrationResult>> refine_candidates(
    const std::vector<CandidateRegion>& candidates, const PointCloud& query, const RefineOptions& opt) {
  opt.registration.validate();
  opt.scoring.validate();
  const Vec3 anchor = centroid(query);
  std::vector<std::pair<CandidateRegion, RegistrationResult>> out(candidates.size());
  std::vector<std::vector<double>> traces(candidates.size());
  parallel_for(candidates.size(), opt.threads, [&](std::size_t i) {
    const CandidateRegion& c = candidates[i];
    const ScaleNormalization norm{c.scale, anchor};
    const PointCloud qn = normalize_query(query, c.scale);
    RegistrationResult res;
    if (opt.method == RefineMethod::kGmm) {
      RegistrationConfig cfg = opt.registration;
      cfg.seed = derive_seed(opt.registration.seed, c.index);
      JrmpcResult jr = jrmpc_register(c.cloud, qn, cfg, norm);
      res.transform = jr.transform;
      res.iterations = jr.iterations;
      res.converged = jr.converged;
      res.loglik_trace = std::move(jr.loglik_trace);
    } else {
      const PointCloud qd =
          uniform_downsample(qn, opt.registration.downsample_max, derive_seed(opt.registration.seed, c.index));
      const IcpResult icp = icp_register(c.cloud, qd, opt.icp_max_iterations, opt.icp_tol);
      res.transform = icp.transform.compose(norm.transform());
      res.iterations = icp.iterations;
      res.converged = icp.converged;
    }
    res.r_score = residual_error(c.cloud, query, res.transform);
    res.final_score = opt.scoring.penalize_scale ? final_score(res.r_score, c.scale, opt.scoring) : res.r_score;
    out[i] = {c, std::move(res)};
  });
  if (opt.on_trace) {
    for (const auto& [c, r] : out) opt.on_trace(c.index, r.loglik_trace);
  }
  return out;
}

struct PipelineConfig {
  std::string scene_path;
  std::string query_path;
  std::string output_dir;  // empty: nothing is written
  MatchConfig match;
  RefineOptions refine;
  std::size_t threads = 1;
  std::string cache_path;
  std::string trace_dir;
  bool preclean = false;
  double scene_ratio = 1.0;

  void validate() const {
    if (scene_path.empty()) throw ConfigError("pipeline: scene path is required");
    if (query_path.empty()) throw ConfigError("pipeline: query path is required");
    if (!(scene_ratio > 0.0 && scene_ratio <= 1.0)) throw ConfigError("pipeline: scene ratio must be in (0, 1]");
    match.validate();
    refine.registration.validate();
    refine.scoring.validate();
  }
};

struct StageTimings {
  double load = 0, candidates = 0, matching = 0, registration = 0, scoring = 0, output = 0, total = 0;
};

struct PipelineReport {
  std::vector<RankedMatch> matches;
  std::size_t candidate_count = 0;
  double coverage = 0.0;
  std::vector<std::string> warnings;
  StageTimings timings;
  std::size_t threads = 1;
  PipelineConfig config;
};

/// Error raised inside a pipeline stage; the message is prefixed with the stage.
template <class Base>
[[noreturn]] void rethrow_with_stage(const std::string& stage, const Base& e) {
  throw Base(stage + ": " + e.what());
}

namespace pipeline_detail {

class Stopwatch {
 public:
  Stopwatch() : last_(Clock::now()) {}
  double lap() {
    const auto now = Clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  using Clock = std::chrono::steady_clock;
  Clock::time_point last_;
};

template <class Fn>
auto staged(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    rethrow_with_stage<ConfigError>(stage, e);
  } catch (const DataError& e) {
    rethrow_with_stage<DataError>(stage, e);
  }
}

}  // namespace pipeline_detail

/// Candidate generation, descriptor matching, registration, scoring and
/// re-ranking in one pass. Output files (when `output_dir` is set) are
/// written by the caller-facing `write_pipeline_outputs` in io_json.hpp.
inline PipelineReport run_pipeline_core(const PipelineConfig& cfg, PointCloud* query_out = nullptr) {
  using pipeline_detail::staged;
  cfg.validate();
  PipelineReport report;
  report.config = cfg;
  report.threads = resolve_threads(cfg.threads);
  pipeline_detail::Stopwatch total, lap;

  PointCloud scene, query;
  std::tie(scene, query) = staged("load", [&] {
    PointCloud s = load_ply(cfg.scene_path);
    PointCloud q = load_ply(cfg.query_path);
    return std::pair{std::move(s), std::move(q)};
  });
  PointCloud query_work = query;
  if (cfg.scene_ratio < 1.0) scene = downsample_ratio(scene, cfg.scene_ratio, derive_seed(cfg.match.seed, 0x5C));
  if (cfg.preclean) {
    scene = remove_statistical_outliers(scene);
    query_work = remove_statistical_outliers(query);
  }
  report.timings.load = lap.lap();

  MatchConfig match = cfg.match;
  match.threads = cfg.threads;
  const KdTree scene_index(scene);
  CandidateSet set = staged("candidates", [&] {
    if (!cfg.cache_path.empty() && std::filesystem::exists(cfg.cache_path)) {
      return load_candidate_cache(cfg.cache_path, scene, scene_index);
    }
    CandidateSet s = generate_candidates(scene, scene_index, match);
    if (!cfg.cache_path.empty()) save_candidate_cache(s, cfg.cache_path);
    return s;
  });
  report.candidate_count = set.regions.size();
  report.coverage = set.coverage;
  report.warnings = set.warnings;
  report.timings.candidates = lap.lap();
  if (set.regions.empty()) throw DataError("candidates: no candidate region could be generated");

  auto top = staged("matching", [&] { return top_k_matches(std::move(set.regions), query_work, match); });
  report.timings.matching = lap.lap();

  RefineOptions refine = cfg.refine;
  refine.threads = cfg.threads;
  if (!cfg.trace_dir.empty()) {
    std::filesystem::create_directories(cfg.trace_dir);
    refine.on_trace = [&](std::size_t index, const std::vector<double>& trace) {
      std::ofstream out(std::filesystem::path(cfg.trace_dir) / ("trace_" + std::to_string(index) + ".csv"));
      out << "iteration,loglik\n";
      out.precision(17);
      for (std::size_t i = 0; i < trace.size(); ++i) out << i << ',' << trace[i] << '\n';
    };
  }
  auto refined = staged("registration", [&] { return refine_candidates(top, query_work, refine); });
  report.timings.registration = lap.lap();

  report.matches = staged("scoring", [&] { return rerank(refined, cfg.refine.scoring); });
  report.timings.scoring = lap.lap();
  report.timings.total = total.lap();
  if (query_out) *query_out = std::move(query);
  return report;
}

/// Hit test for one retrieved sphere against the ground-truth sphere, by
/// point counts on the scene.
struct RetrievalEntry {
  std::size_t rank = 0;
  double truth_coverage = 0.0;       // fraction of truth-region points inside the candidate
  double background_fraction = 0.0;  // fraction of candidate points outside the truth region
  bool hit = false;
};

struct RetrievalStats {
  std::vector<RetrievalEntry> entries;
  std::size_t hits = 0;            // hits within the cutoff
  std::size_t first_hit_rank = 0;  // 0 when no hit
};

inline RetrievalEntry classify_retrieval(const SpatialIndex& scene_index, const Vec3& center, double radius,
                                         const Vec3& truth_center, double truth_radius) {
  const auto truth = scene_index.radius_search(truth_center, truth_radius);
  const auto cand = scene_index.radius_search(center, radius);
  std::size_t shared = 0;
  {
    std::size_t i = 0, j = 0;
    while (i < truth.size() && j < cand.size()) {
      if (truth[i] == cand[j]) {
        ++shared, ++i, ++j;
      } else if (truth[i] < cand[j]) {
        ++i;
      } else {
        ++j;
      }
    }
  }
  RetrievalEntry e;
  e.truth_coverage = truth.empty() ? 0.0 : static_cast<double>(shared) / static_cast<double>(truth.size());
  e.background_fraction =
      cand.empty() ? 1.0 : static_cast<double>(cand.size() - shared) / static_cast<double>(cand.size());
  e.hit = !truth.empty() && !cand.empty() && e.truth_coverage >= 0.9 && e.background_fraction < 0.1;
  return e;
}

/// Ranked spheres (center, radius), best first.
inline RetrievalStats evaluate_retrieval(const std::vector<std::pair<Vec3, double>>& ranked,
                                         const SpatialIndex& scene_index, const Vec3& truth_center,
                                         double truth_radius, std::size_t cutoff = 5) {
  RetrievalStats stats;
  for (std::size_t r = 0; r < ranked.size() && r < cutoff; ++r) {
    RetrievalEntry e = classify_retrieval(scene_index, ranked[r].first, ranked[r].second, truth_center, truth_radius);
    e.rank = r + 1;
    if (e.hit) {
      ++stats.hits;
      if (stats.first_hit_rank == 0) stats.first_hit_rank = e.rank;
    }
    stats.entries.push_back(e);
  }
  return stats;
}

inline RetrievalStats evaluate_retrieval(const std::vector<RankedMatch>& matches, const SpatialIndex& scene_index,
                                         const Vec3& truth_center, double truth_radius, std::size_t cutoff = 5) {
  std::vector<std::pair<Vec3, double>> spheres;
  for (const auto& m : matches) spheres.emplace_back(m.candidate.center, m.candidate.radius);
  return evaluate_retrieval(spheres, scene_index, truth_center, truth_radius, cutoff);
}

}  // namespace crossreg
