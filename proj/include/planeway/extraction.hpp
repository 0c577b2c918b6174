#pragma once

#include "planeway/config.hpp"
#include "planeway/plane_set.hpp"

#include <string>
#include <utility>
#include <vector>

namespace planeway {

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // empty, or one unit normal per point

  bool has_normals() const { return !normals.empty() && normals.size() == points.size(); }
  std::size_t size() const { return points.size(); }
};

struct PlaneSegment {
  std::vector<std::size_t> point_indices;
  Transform transform;
  double inclination = 0.0;
  double thickness = 0.0;
  PlaneKind kind = PlaneKind::Ground;
  bool merged_from_stairs = false;
  // Extra in-plane points that widen the hull; merged stairs reach down to the
  // floor below the first riser and up to the landing above the last one.
  std::vector<Vec3> extent_points;

  std::size_t size() const { return point_indices.size(); }
};

/// k nearest neighbors (including the point itself) for every point, nearest first.
std::vector<std::vector<std::size_t>> knn_graph(const std::vector<Vec3>& points, int k);

/// Voxel centroid downsampling, statistical outlier removal and PCA normals.
/// Throws EmptyCloud when fewer than `min_points` survive.
PointCloud preprocess(const PointCloud& cloud, double voxel, int k_neighbors, int min_points = 50,
                      double std_ratio = 2.0);

/// Curvature-seeded region growing. Requires normals.
std::vector<PlaneSegment> region_growing(const PointCloud& cloud, const ExtractionConfig& config);

/// Replaces tread chains (>= 2 treads) by one refit Stairs segment.
std::vector<PlaneSegment> merge_stairs(const PointCloud& cloud, std::vector<PlaneSegment> segments,
                                       const ExtractionConfig& config);

struct PartitionedSegments {
  std::vector<PlaneSegment> traversable;
  std::vector<PlaneSegment> vertical;
};

/// Merges coplanar overlapping traversable segments to a fixed point, drops the
/// lower of near-coincident same-size parallel pairs, and splits by kind.
PartitionedSegments merge_coplanar(const PointCloud& cloud, std::vector<PlaneSegment> segments,
                                   const ExtractionConfig& config);

using StageTimings = std::vector<std::pair<std::string, double>>;  // stage, ms

/// Full pipeline: preprocess, segment, merge, bound, link and grid.
/// Throws NoTraversablePlane when nothing walkable is found.
PlaneSet extract_traversable_planes(const PointCloud& cloud, const RunConfig& config, StageTimings* timings = nullptr);

/// Kind for a fitted plane: Vertical above the traversable limit, Stairs if merged, else Ground/Slope.
PlaneKind classify(double inclination, bool merged_from_stairs, const ExtractionConfig& config);

}  // namespace planeway
