// Library walkthrough: everything `crossreg run` does, in memory, on a small
// synthetic street scene. Usage: crossreg_walkthrough [seed]

#include <cstdio>
#include <cstdlib>

#include "crossreg/crossreg.hpp"

using namespace crossreg;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;

  QuerySpec q;
  q.density_ratio = 2.0;
  q.noise_frac = 0.005;
  q.scale_min = 0.8;
  q.scale_max = 1.25;
  q.max_rotation_deg = 10.0;
  const SyntheticScene s = generate_synthetic_scene(street_scene_spec(seed, q, 8000), seed);
  std::printf("scene %zu points, query %zu points, true scale %.3f\n", s.scene.size(), s.query.size(), s.truth.scale);

  // Coarse stage: spheres at several radii, ESF on each, nearest descriptors.
  const KdTree index(s.scene);
  MatchConfig match;
  match.radii = {20, 25, 30};
  match.regions_per_scale = 30;
  match.top_k = 5;
  match.seed = seed;
  const CandidateSet set = generate_candidates(s.scene, index, match);
  const auto top = top_k_matches(set.regions, s.query, match);

  // Fine stage: joint GMM registration per candidate, then re-rank.
  RefineOptions refine;
  refine.registration.components = 100;
  refine.registration.downsample_max = 800;
  refine.registration.seed = seed;
  const auto ranked = rerank(refine_candidates(top, s.query, refine), refine.scoring);

  // A hit covers >= 90% of the true region with < 10% other points.
  for (const auto& m : ranked) {
    const RetrievalEntry e = classify_retrieval(index, m.candidate.center, m.candidate.radius, s.truth_center,
                                                s.truth_radius);
    std::printf("rank %zu  radius %.0f  scale %.3f  r_score %.4f  final %.4f  truth covered %.2f  background %.2f  %s\n",
                m.rank, m.candidate.radius, m.result.transform.scale, m.result.r_score, m.result.final_score,
                e.truth_coverage, e.background_fraction, e.hit ? "hit" : "-");
  }
  return 0;
}
