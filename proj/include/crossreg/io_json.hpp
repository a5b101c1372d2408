#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crossreg/pipeline.hpp"
#include "crossreg/synthetic.hpp"

namespace crossreg {

using json = nlohmann::json;

inline json to_json_vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

/// Row-major 4x4 homogeneous matrix.
inline json to_json_matrix(const SimilarityTransform& t) {
  const Mat4 m = t.matrix();
  json rows = json::array();
  for (int r = 0; r < 4; ++r) rows.push_back(json::array({m(r, 0), m(r, 1), m(r, 2), m(r, 3)}));
  return rows;
}

/// Splits [sR | t] back into rotation, translation and scale.
inline SimilarityTransform transform_from_json(const json& rows) {
  if (!rows.is_array() || rows.size() != 4) throw ConfigError("transform: expected 4 rows");
  Mat4 m;
  for (int r = 0; r < 4; ++r) {
    if (!rows[r].is_array() || rows[r].size() != 4) throw ConfigError("transform: expected 4 columns");
    for (int c = 0; c < 4; ++c) m(r, c) = rows[r][c].get<double>();
  }
  SimilarityTransform t;
  const Mat3 sr = m.topLeftCorner<3, 3>();
  t.scale = std::cbrt(sr.determinant());
  if (!(t.scale > 0.0)) throw DataError("transform: non-positive scale");
  t.rotation = sr / t.scale;
  t.translation = m.topRightCorner<3, 1>();
  return t;
}

inline json config_to_json(const PipelineConfig& c) {
  const auto& r = c.refine.registration;
  const auto& s = c.refine.scoring;
  return {
      {"scene", c.scene_path},
      {"query", c.query_path},
      {"method", to_string(c.refine.method)},
      {"radii", c.match.radii},
      {"per_scale", c.match.regions_per_scale},
      {"top_k", c.match.top_k},
      {"esf_samples", c.match.esf_samples},
      {"min_region_points", c.match.min_region_points},
      {"seed", c.match.seed},
      {"gmm_k", r.components},
      {"max_iterations", r.max_iterations},
      {"tol", r.tol},
      {"outlier_weight", r.outlier_weight},
      {"downsample_max", r.downsample_max},
      {"registration_seed", r.seed},
      {"alpha", s.alpha},
      {"cutoff", s.cutoff},
      {"penalize_scale", s.penalize_scale},
      {"icp_max_iterations", c.refine.icp_max_iterations},
      {"icp_tol", c.refine.icp_tol},
      {"preclean", c.preclean},
      {"scene_ratio", c.scene_ratio},
      {"ground_truth_criterion", "truth coverage >= 0.9 and background fraction < 0.1 (point counts)"},
  };
}

/// Everything except the "runtime" member is a deterministic function of the
/// configuration and inputs.
inline json report_to_json(const PipelineReport& rep) {
  json matches = json::array();
  for (const auto& m : rep.matches) {
    matches.push_back({
        {"rank", m.rank},
        {"candidate_index", m.candidate.index},
        {"center", to_json_vec(m.candidate.center)},
        {"radius", m.candidate.radius},
        {"points", m.candidate.cloud.size()},
        {"scale", m.candidate.scale},
        {"similarity", m.candidate.similarity},
        {"r_score", m.result.r_score},
        {"final_score", m.result.final_score},
        {"iterations", m.result.iterations},
        {"converged", m.result.converged},
        {"transform", to_json_matrix(m.result.transform)},
    });
  }
  const auto& t = rep.timings;
  return {
      {"config", config_to_json(rep.config)},
      {"candidates", {{"count", rep.candidate_count}, {"coverage", rep.coverage}, {"warnings", rep.warnings}}},
      {"matches", matches},
      {"runtime",
       {{"threads", rep.threads},
        {"timings",
         {{"load", t.load},
          {"candidates", t.candidates},
          {"matching", t.matching},
          {"registration", t.registration},
          {"scoring", t.scoring},
          {"output", t.output},
          {"total", t.total}}}}},
  };
}

/// Runs the pipeline and, when `output_dir` is set, writes report.json and
/// one transformed query PLY per ranked match (match_<rank>.ply).
inline PipelineReport run_pipeline(const PipelineConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  PointCloud query;
  PipelineReport rep;
  try {
    rep = run_pipeline_core(cfg, &query);
  } catch (const Error& e) {
    if (!cfg.output_dir.empty()) {
      std::filesystem::create_directories(cfg.output_dir);
      std::ofstream out(std::filesystem::path(cfg.output_dir) / "report.json");
      out << json{{"config", config_to_json(cfg)}, {"error", e.what()}}.dump(2) << '\n';
    }
    throw;
  }
  if (cfg.output_dir.empty()) return rep;

  const auto lap = std::chrono::steady_clock::now();
  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  for (const auto& m : rep.matches) {
    save_ply(apply_transform(query, m.result.transform), (dir / ("match_" + std::to_string(m.rank) + ".ply")).string());
  }
  const auto end = std::chrono::steady_clock::now();
  rep.timings.output = std::chrono::duration<double>(end - lap).count();
  rep.timings.total = std::chrono::duration<double>(end - start).count();
  std::ofstream out(dir / "report.json");
  out << report_to_json(rep).dump(2) << '\n';
  if (!out) throw DataError("cannot write " + (dir / "report.json").string());
  return rep;
}

// --- synthetic scene spec / truth files -----------------------------------

inline Surface surface_from_json(const json& j) {
  Surface s;
  const std::string type = j.at("type").get<std::string>();
  if (type == "box") {
    s.kind = SurfaceKind::kBox;
    s.center = vec_from_json(j.at("center"));
    s.half_extents = 0.5 * vec_from_json(j.at("size"));
  } else if (type == "cylinder") {
    s.kind = SurfaceKind::kCylinder;
    s.center = vec_from_json(j.at("base"));
    s.radius = j.at("radius").get<double>();
    s.height = j.at("height").get<double>();
    s.closed = true;
  } else if (type == "plane") {
    s.kind = SurfaceKind::kPlane;
    s.center = vec_from_json(j.at("center"));
    s.u = vec_from_json(j.at("u"));
    s.v = vec_from_json(j.at("v"));
  } else {
    throw ConfigError("unknown structure type '" + type + "'");
  }
  if (j.contains("yaw_deg")) {
    s.rotation = Eigen::AngleAxisd(j["yaw_deg"].get<double>() * std::numbers::pi / 180.0, Vec3::UnitZ())
                     .toRotationMatrix();
    s.u = s.rotation * s.u;
    s.v = s.rotation * s.v;
  }
  s.closed = j.value("closed", s.closed);
  s.density = j.value("density", 0.0);
  s.group = j.value("group", 0);
  return s;
}

/// Scene spec file. Either {"preset": "street", ...} or an explicit
/// {"structures": [...], "density": d, "target": {...}} description, both
/// with an optional "query" block.
inline SceneSpec scene_spec_from_json(const json& j, std::uint64_t seed) {
  try {
    QuerySpec q;
    if (j.contains("query")) {
      const json& qj = j["query"];
      q.density_ratio = qj.value("density_ratio", q.density_ratio);
      q.noise_frac = qj.value("noise_frac", q.noise_frac);
      q.dropout = qj.value("dropout", q.dropout);
      q.scale_min = qj.value("scale_min", q.scale_min);
      q.scale_max = qj.value("scale_max", q.scale_max);
      q.max_rotation_deg = qj.value("max_rotation_deg", q.max_rotation_deg);
      q.fixed_rotation_deg = qj.value("rotation_deg", q.fixed_rotation_deg);
      q.rotate_about_z = qj.value("rotate_about_z", q.rotate_about_z);
      q.offset_range = qj.value("offset_range", q.offset_range);
    }
    if (j.contains("preset")) {
      if (j["preset"] != "street") throw ConfigError("unknown preset " + j["preset"].dump());
      return street_scene_spec(seed, q, j.value("scene_points", std::size_t{50000}), j.value("spacing", 160.0));
    }
    SceneSpec spec;
    spec.query = q;
    spec.density = j.value("density", spec.density);
    for (const auto& s : j.at("structures")) spec.surfaces.push_back(surface_from_json(s));
    if (j.contains("target")) {
      const json& t = j["target"];
      spec.target_group = t.value("group", 0);
      spec.target_margin = t.value("margin", spec.target_margin);
      if (t.contains("radius")) {
        spec.target_radius = t["radius"].get<double>();
        spec.target_center = vec_from_json(t.at("center"));
      }
    }
    return spec;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scene spec: ") + e.what());
  }
}

inline json truth_to_json(const SyntheticScene& s, const std::string& scene_file, const std::string& query_file) {
  return {
      {"scene", scene_file},
      {"query", query_file},
      {"center", to_json_vec(s.truth_center)},
      {"radius", s.truth_radius},
      {"scale", s.truth.scale},
      {"transform", to_json_matrix(s.truth)},
      {"truth_region_points", s.truth_region.size()},
  };
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace crossreg
