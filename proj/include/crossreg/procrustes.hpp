#pragma once

#include <span>

#include <Eigen/SVD>

#include "crossreg/pointcloud.hpp"

namespace crossreg {

struct RigidFit {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  Vec3 singular_values = Vec3::Zero();  // of the weighted cross-covariance, descending

  /// Rank of the cross-covariance is below 2: the rotation is not unique.
  bool rank_deficient(double rel_tol = 1e-12) const {
    return !(singular_values(0) > 0.0) || singular_values(1) <= rel_tol * singular_values(0);
  }
};

/// Rotation and translation minimizing sum_i w_i |R src_i + t - dst_i|^2
/// (Kabsch with reflection correction). Zero weights are allowed; the total
/// weight must be positive.
inline RigidFit weighted_procrustes(std::span<const Vec3> src, std::span<const Vec3> dst,
                                    std::span<const double> w) {
  double wsum = 0.0;
  Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    wsum += w[i];
    cs += w[i] * src[i];
    cd += w[i] * dst[i];
  }
  if (!(wsum > 0.0)) throw DataError("weighted_procrustes: total weight is zero");
  cs /= wsum;
  cd /= wsum;
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) h += w[i] * (src[i] - cs) * (dst[i] - cd).transpose();

  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;

  RigidFit fit;
  fit.rotation = v * d * u.transpose();
  fit.translation = cd - fit.rotation * cs;
  fit.singular_values = svd.singularValues();
  return fit;
}

}  // namespace crossreg
