#pragma once

// Shared definition of the ESF rotation-stability trials. The calibration
// tool records the measured envelope in data/; the tests assert against it.

#include <string>
#include <vector>

#include "crossreg/crossreg.hpp"

namespace crossreg::test {

inline constexpr std::size_t kRotationTrials = 20;
inline constexpr std::size_t kRotationTrialPoints = 20000;

/// Trial t: a building template of the street scene, a random rotation,
/// and independent sampling seeds for the two descriptors.
inline double esf_rotation_trial(std::size_t t) {
  std::vector<Vec3> pts;
  {
    SceneSpec spec;
    spec.density = 30.0;
    spec.surfaces = synth_detail::building(static_cast<int>(t % 8), 0);
    spec.query.scale_min = spec.query.scale_max = 1.0;
    const SyntheticScene s = generate_synthetic_scene(spec, 500 + t);
    pts = uniform_downsample(s.scene, kRotationTrialPoints, t).points;
  }
  const PointCloud cloud(pts);
  Rng rng(derive_seed(0xCA11B, t));
  SimilarityTransform rot;
  rot.rotation = Eigen::AngleAxisd(uniform(rng, 0.0, std::numbers::pi), random_unit_vector(rng)).toRotationMatrix();
  const PointCloud rotated = apply_transform(cloud, rot);
  const EsfDescriptor a = compute_esf(cloud, kEsfDefaultSamples, derive_seed(t, 1));
  const EsfDescriptor b = compute_esf(rotated, kEsfDefaultSamples, derive_seed(t, 2));
  return descriptor_distance(a, b);
}

inline std::string rotation_envelope_path() { return std::string(CROSSREG_DATA_DIR) + "/esf_rotation_envelope.txt"; }

}  // namespace crossreg::test
