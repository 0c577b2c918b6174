#pragma once

#include "planeway/extraction.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace planeway {

/// Planar patch to sample: a parallelogram origin + a*u + b*v (a, b in [0,1]),
/// or the triangle a + b <= 1 when `triangle` is set. Samples inside any hole
/// box are dropped (used for parts hidden by solids).
struct SurfacePatch {
  std::string label;
  Vec3 origin = Vec3::Zero();
  Vec3 u = Vec3::UnitX();
  Vec3 v = Vec3::UnitY();
  bool triangle = false;
  std::vector<Eigen::AlignedBox3d> holes;

  double area() const { return u.cross(v).norm() * (triangle ? 0.5 : 1.0); }
};

/// One walkable surface of the ground truth. For stairs the plane runs through
/// the tread centers.
struct WalkableSurface {
  std::string label;
  PlaneKind kind = PlaneKind::Ground;
  Vec3 normal = Vec3::UnitZ();
  Vec3 point = Vec3::Zero();
  std::vector<Vec2> footprint;  // xy corners of the walkable extent
};

struct SceneSpec {
  std::string name = "planes";
  double density = 1000.0;   // points per m^2
  double noise_sigma = 0.01; // m
  std::uint64_t seed = 7;
};

struct Scene {
  SceneSpec spec;
  std::vector<SurfacePatch> patches;
  PointCloud cloud;
  std::vector<int> labels;  // source patch per point
  std::vector<WalkableSurface> walkable;
  std::vector<std::pair<int, int>> adjacency;  // walkable index pairs, i < j
  Vec3 start = Vec3::Zero();
  Vec3 goal = Vec3::Zero();
};

const std::vector<std::string>& scene_names();

/// Builds one of the named scenes. Throws ConfigError for unknown names and
/// DegenerateInput if start and goal are not connected in the ground truth.
Scene generate(const SceneSpec& spec);

/// Samples patches at `density` with isotropic Gaussian noise; labels are patch indices.
void sample_patches(const std::vector<SurfacePatch>& patches, double density, double noise_sigma,
                    std::uint64_t seed, PointCloud& cloud, std::vector<int>& labels);

}  // namespace planeway
