#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace planeway {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Rigid frame of a plane: columns of `rotation` are the local x, y, z axes in
/// world coordinates, `translation` is the local origin (the point centroid).
struct Transform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 to_local(const Vec3& world) const { return rotation.transpose() * (world - translation); }
  Vec3 to_world(const Vec3& local) const { return rotation * local + translation; }
  Vec3 to_world(const Vec2& local) const { return to_world(Vec3(local.x(), local.y(), 0.0)); }
  Vec2 project(const Vec3& world) const { return to_local(world).head<2>(); }

  Vec3 normal() const { return rotation.col(2); }
  Vec3 x_axis() const { return rotation.col(0); }

  /// Heading of the local x-axis projected onto the world xy-plane.
  double yaw_offset() const;
  /// Signed distance of a world point above the plane.
  double height(const Vec3& world) const { return normal().dot(world - translation); }
};

/// Nearest value with `decimals` fractional digits; -0 becomes +0.
double round_decimals(double v, int decimals);

/// Gram-Schmidt keeping the z column's direction, then x; y = z cross x.
Mat3 orthonormalize(const Mat3& r);

/// Frame that survives printing at `decimals` digits: re-orthonormalizing the
/// rounded rotation reproduces the same digits. Translation is rounded.
Transform canonical_frame(const Transform& frame, int decimals = 6);

struct PlaneFit {
  Transform frame;
  double inclination = 0.0;  // radians, angle between plane normal and world z
  double thickness = 0.0;    // meters, sqrt of the smallest covariance eigenvalue
};

/// Running first and second moments of a point set, for incremental refits.
class PlaneMoments {
 public:
  void add(const Vec3& p);
  void merge(const PlaneMoments& other);
  std::size_t count() const { return count_; }
  Vec3 mean() const { return sum_ / static_cast<double>(count_); }
  Mat3 covariance() const;
  PlaneFit fit() const;

 private:
  std::size_t count_ = 0;
  Vec3 sum_ = Vec3::Zero();
  Mat3 outer_ = Mat3::Zero();
};

/// PCA plane fit. The z-axis is the smallest-eigenvalue eigenvector flipped to
/// the upper hemisphere; the x-axis is the ascent direction, or the world x
/// projection on planes within 1 degree of horizontal.
/// Throws DegenerateInput for fewer than 3 points or collinear input.
PlaneFit fit_plane(std::span<const Vec3> points);
PlaneFit fit_plane_from_covariance(const Vec3& centroid, const Mat3& covariance);

/// Counter-clockwise, strictly convex polygon with at least three vertices.
class ConvexPolygon2D {
 public:
  ConvexPolygon2D() = default;
  /// Takes vertices that are already CCW and strictly convex.
  explicit ConvexPolygon2D(std::vector<Vec2> vertices);

  const std::vector<Vec2>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  bool empty() const { return vertices_.empty(); }

  double area() const;
  Vec2 centroid() const;
  bool contains(const Vec2& p, double tol = 1e-9) const;
  Eigen::AlignedBox2d bounds() const;

 private:
  std::vector<Vec2> vertices_;
};

struct Segment3D {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();

  double length() const { return (b - a).norm(); }
  Vec3 at(double t) const { return a + t * (b - a); }
};

/// Frame plus boundary; the part of a traversable plane the intersection test needs.
struct PlanarRegion {
  Transform frame;
  ConvexPolygon2D boundary;
};

/// Andrew's monotone chain. Throws DegenerateInput when the input spans no area.
ConvexPolygon2D convex_hull(std::span<const Vec2> points);

/// Pushes every vertex `margin` meters outward along the ray from the area centroid.
ConvexPolygon2D expand_polygon(const ConvexPolygon2D& poly, double margin);

/// Common sub-segment of the two planes' intersection line that lies inside both
/// margin-expanded boundaries. Endpoints are returned in lexicographic order so
/// the result does not depend on argument order.
std::optional<Segment3D> plane_polygon_intersection(const PlanarRegion& a, const PlanarRegion& b,
                                                    double margin, double min_length);

/// Indices of the points incident to a boundary edge of the alpha complex
/// (Delaunay triangles kept when their circumradius is below `alpha`).
std::vector<std::size_t> alpha_shape_boundary(std::span<const Vec2> points, double alpha);

/// Separating-axis overlap test for two convex polygons.
bool polygons_overlap(const ConvexPolygon2D& a, const ConvexPolygon2D& b);

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);

}  // namespace planeway
