#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "crossreg/pointcloud.hpp"

namespace crossreg {

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;
};

/// Exact kd-tree over a point cloud. The tree stores a copy of the points, so
/// it stays valid after the source cloud goes away. Read-only after
/// construction; concurrent queries are safe.
///
/// Ties in nearest-neighbor queries resolve to the smallest point index, and
/// radius queries return indices in ascending order, which makes every query
/// result identical to a linear scan over the same points.
class KdTree {
 public:
  KdTree() = default;

  explicit KdTree(const PointCloud& cloud, std::size_t leaf_size = 12)
      : points_(cloud.points), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (!points_.empty()) {
      nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
      build(0, points_.size());
    }
  }

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  const std::vector<Vec3>& points() const noexcept { return points_; }

  Neighbor nearest(const Vec3& query) const {
    if (empty()) throw DataError("nearest_neighbor: empty index");
    Best best;
    search_nearest(0, query, best);
    return {best.index, std::sqrt(best.d2)};
  }

  /// Indices (ascending) of the points with distance <= radius.
  std::vector<std::size_t> radius_search(const Vec3& center, double radius) const {
    std::vector<std::size_t> out;
    if (empty() || radius < 0.0) return out;
    search_radius(0, center, radius * radius, out);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// The k nearest points ordered by (distance, index).
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const {
    std::vector<Candidate> heap;
    if (empty() || k == 0) return {};
    k = std::min(k, size());
    heap.reserve(k + 1);
    search_knn(0, query, k, heap);
    std::sort_heap(heap.begin(), heap.end());
    std::vector<Neighbor> out;
    out.reserve(heap.size());
    for (const auto& c : heap) out.push_back({c.index, std::sqrt(c.d2)});
    return out;
  }

 private:
  struct Node {
    std::size_t begin = 0, end = 0;  // range in order_
    std::uint32_t left = 0, right = 0;
    int axis = -1;                   // -1 for leaves
    double split = 0.0;
  };

  struct Best {
    double d2 = std::numeric_limits<double>::infinity();
    std::size_t index = std::numeric_limits<std::size_t>::max();
    void offer(double d2_new, std::size_t i) {
      if (d2_new < d2 || (d2_new == d2 && i < index)) {
        d2 = d2_new;
        index = i;
      }
    }
  };

  struct Candidate {
    double d2;
    std::size_t index;
    bool operator<(const Candidate& o) const {
      return d2 < o.d2 || (d2 == o.d2 && index < o.index);
    }
  };

  std::uint32_t build(std::size_t begin, std::size_t end) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({begin, end, 0, 0, -1, 0.0});
    if (end - begin <= leaf_size_) return id;

    Vec3 lo = points_[order_[begin]], hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] <= lo[axis]) return id;  // all points identical

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
    const double split = points_[order_[mid]][axis];
    const auto left = build(begin, mid);
    const auto right = build(mid, end);
    Node& node = nodes_[id];
    node.axis = axis;
    node.split = split;
    node.left = left;
    node.right = right;
    return id;
  }

  // Left subtree holds coordinates <= split, right subtree >= split.
  void search_nearest(std::uint32_t id, const Vec3& q, Best& best) const {
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        best.offer(squared_distance(points_[order_[i]], q), order_[i]);
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const std::uint32_t near = diff <= 0.0 ? node.left : node.right;
    const std::uint32_t far = diff <= 0.0 ? node.right : node.left;
    search_nearest(near, q, best);
    if (diff * diff <= best.d2) search_nearest(far, q, best);
  }

  void search_radius(std::uint32_t id, const Vec3& c, double r2, std::vector<std::size_t>& out) const {
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        if (squared_distance(points_[order_[i]], c) <= r2) out.push_back(order_[i]);
      }
      return;
    }
    const double diff = c[node.axis] - node.split;
    if (diff <= 0.0 || diff * diff <= r2) search_radius(node.left, c, r2, out);
    if (diff >= 0.0 || diff * diff <= r2) search_radius(node.right, c, r2, out);
  }

  void search_knn(std::uint32_t id, const Vec3& q, std::size_t k, std::vector<Candidate>& heap) const {
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        Candidate c{squared_distance(points_[order_[i]], q), order_[i]};
        if (heap.size() < k) {
          heap.push_back(c);
          std::push_heap(heap.begin(), heap.end());
        } else if (c < heap.front()) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = c;
          std::push_heap(heap.begin(), heap.end());
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const std::uint32_t near = diff <= 0.0 ? node.left : node.right;
    const std::uint32_t far = diff <= 0.0 ? node.right : node.left;
    search_knn(near, q, k, heap);
    if (heap.size() < k || diff * diff <= heap.front().d2) search_knn(far, q, k, heap);
  }

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_ = 12;
};

using SpatialIndex = KdTree;

inline Neighbor nearest_neighbor(const SpatialIndex& index, const Vec3& query) {
  return index.nearest(query);
}

/// Points within `radius` of `center`, original order preserved.
inline PointCloud crop_sphere(const PointCloud& cloud, const SpatialIndex& index, const Vec3& center,
                              double radius) {
  if (!(radius > 0.0)) throw ConfigError("crop_sphere: radius must be positive");
  const auto idx = index.radius_search(center, radius);
  return select(cloud, idx);
}

/// Drops points whose mean distance to their k nearest neighbors exceeds
/// mean + std_mul * stddev over the cloud.
inline PointCloud remove_statistical_outliers(const PointCloud& cloud, std::size_t k = 16,
                                              double std_mul = 2.0) {
  if (cloud.size() <= k) return cloud;
  const KdTree tree(cloud);
  std::vector<double> mean_dist(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto nn = tree.knn(cloud[i], k + 1);  // includes the point itself
    double s = 0.0;
    for (std::size_t j = 1; j < nn.size(); ++j) s += nn[j].distance;
    mean_dist[i] = s / static_cast<double>(nn.size() - 1);
  }
  double mu = 0.0;
  for (double d : mean_dist) mu += d;
  mu /= static_cast<double>(mean_dist.size());
  double var = 0.0;
  for (double d : mean_dist) var += (d - mu) * (d - mu);
  const double sd = std::sqrt(var / static_cast<double>(mean_dist.size()));
  const double cut = mu + std_mul * sd;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (mean_dist[i] <= cut) keep.push_back(i);
  }
  return select(cloud, keep);
}

}  // namespace crossreg
