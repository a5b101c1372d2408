// crossreg command-line front end: run / synth / eval.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crossreg/crossreg.hpp"

namespace fs = std::filesystem;
using namespace crossreg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

int run_command(PipelineConfig cfg, const std::string& method) {
  if (method == "gmm") {
    cfg.refine.method = RefineMethod::kGmm;
  } else if (method == "icp") {
    cfg.refine.method = RefineMethod::kIcp;
  } else {
    throw ConfigError("--method must be gmm or icp");
  }
  cfg.refine.registration.seed = cfg.match.seed;
  const PipelineReport rep = run_pipeline(cfg);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& m : rep.matches) {
    std::cout << "rank " << m.rank << "  center (" << m.candidate.center.x() << ", " << m.candidate.center.y() << ", "
              << m.candidate.center.z() << ")  radius " << m.candidate.radius << "  final " << m.result.final_score
              << "  r_score " << m.result.r_score << '\n';
  }
  std::cout << "report: " << (fs::path(cfg.output_dir) / "report.json").string() << '\n';
  return kExitOk;
}

int synth_command(const std::string& spec_path, const std::string& out_dir, std::uint64_t seed) {
  const SceneSpec spec = scene_spec_from_json(read_json_file(spec_path), seed);
  const SyntheticScene s = generate_synthetic_scene(spec, seed);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  save_ply(s.scene, (dir / "scene.ply").string());
  save_ply(s.query, (dir / "query.ply").string());
  std::ofstream out(dir / "truth.json");
  out << truth_to_json(s, "scene.ply", "query.ply").dump(2) << '\n';
  if (!out) throw DataError("cannot write " + (dir / "truth.json").string());
  std::cout << "scene " << s.scene.size() << " points, query " << s.query.size() << " points, truth radius "
            << s.truth_radius << '\n';
  return kExitOk;
}

int eval_command(const std::string& report_path, const std::string& truth_path, std::size_t cutoff) {
  const json report = read_json_file(report_path);
  const json truth = read_json_file(truth_path);
  if (report.contains("error")) throw DataError("report records a failed run: " + report["error"].get<std::string>());
  std::vector<std::pair<Vec3, double>> ranked;
  fs::path scene_path;
  Vec3 truth_center;
  double truth_radius = 0.0;
  try {
    for (const auto& m : report.at("matches")) {
      ranked.emplace_back(vec_from_json(m.at("center")), m.at("radius").get<double>());
    }
    truth_center = vec_from_json(truth.at("center"));
    truth_radius = truth.at("radius").get<double>();
    scene_path = truth.at("scene").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("eval: ") + e.what());
  }
  if (scene_path.is_relative()) scene_path = fs::path(truth_path).parent_path() / scene_path;
  const PointCloud scene = load_ply(scene_path.string());
  const KdTree index(scene);
  const RetrievalStats stats = evaluate_retrieval(ranked, index, truth_center, truth_radius, cutoff);

  json entries = json::array();
  for (const auto& e : stats.entries) {
    entries.push_back({{"rank", e.rank},
                       {"truth_coverage", e.truth_coverage},
                       {"background_fraction", e.background_fraction},
                       {"hit", e.hit}});
  }
  const json out = {{"cutoff", cutoff},
                    {"hits", stats.hits},
                    {"first_hit_rank", stats.first_hit_rank},
                    {"hit_within_cutoff", stats.hits > 0},
                    {"entries", entries}};
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

std::vector<double> parse_radii(const std::string& s) {
  std::vector<double> radii;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t comma = s.find(',', pos);
    const std::string tok = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      radii.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("--radii: cannot parse '" + tok + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return radii;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-source point cloud detection and registration"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  PipelineConfig cfg;
  std::string radii = "30,35,40,45,50,55,60";
  std::string method = "gmm";
  auto* run = app.add_subcommand("run", "Locate and register a query cloud inside a scene cloud");
  run->add_option("--scene", cfg.scene_path, "Scene PLY (ASCII)")->required();
  run->add_option("--query", cfg.query_path, "Query PLY (ASCII)")->required();
  run->add_option("--out", cfg.output_dir, "Output directory")->required();
  run->add_option("--radii", radii, "Comma-separated candidate radii");
  run->add_option("--per-scale", cfg.match.regions_per_scale, "Candidate regions per radius");
  run->add_option("--top-k", cfg.match.top_k, "Candidates kept for fine registration");
  run->add_option("--alpha", cfg.refine.scoring.alpha, "Scale penalty width");
  run->add_option("--gmm-k", cfg.refine.registration.components, "GMM components");
  run->add_option("--threads", cfg.threads, "Worker threads (0: all cores)");
  run->add_option("--seed", cfg.match.seed, "Random seed");
  run->add_option("--cache", cfg.cache_path, "Candidate cache CSV (read if present, else written)");
  run->add_option("--trace-dir", cfg.trace_dir, "Write per-candidate log-likelihood traces here");
  run->add_option("--method", method, "Fine registration: gmm or icp");
  run->add_option("--scene-ratio", cfg.scene_ratio, "Uniformly downsample the scene to this fraction");
  run->add_flag("--preclean", cfg.preclean, "Statistical outlier removal on both clouds");

  std::string spec_path, synth_out;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene, planted query and ground truth");
  synth->add_option("--spec", spec_path, "Scene spec JSON")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Random seed");

  std::string report_path, truth_path;
  std::size_t cutoff = 5;
  auto* eval = app.add_subcommand("eval", "Score a report against synthetic ground truth");
  eval->add_option("--report", report_path, "report.json from `run`")->required();
  eval->add_option("--truth", truth_path, "truth.json from `synth`")->required();
  eval->add_option("--cutoff", cutoff, "Rank cutoff");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) {
      cfg.match.radii = parse_radii(radii);
      return run_command(cfg, method);
    }
    if (*synth) return synth_command(spec_path, synth_out, synth_seed);
    return eval_command(report_path, truth_path, cutoff);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
}
