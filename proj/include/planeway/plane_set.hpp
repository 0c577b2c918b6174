#pragma once

#include "planeway/geometry.hpp"
#include "planeway/grid_map.hpp"

#include <string>
#include <vector>

namespace planeway {

enum class PlaneKind { Ground, Slope, Stairs, Vertical };

const char* kind_name(PlaneKind k);
PlaneKind kind_from_name(const std::string& name);

struct PlaneLink {
  int plane = -1;       // index of the neighboring traversable plane
  Segment3D segment;    // shared crossing segment, identical on both sides
};

struct TraversablePlane {
  int id = 0;
  PlaneKind kind = PlaneKind::Ground;
  Transform frame;
  double inclination = 0.0;
  double thickness = 0.0;
  std::size_t point_count = 0;
  ConvexPolygon2D hull;      // convex hull of the in-plane projections
  ConvexPolygon2D boundary;  // hull expanded by the configured margin
  std::vector<PlaneLink> neighbors;
  GridMap grid;
  // Projected support points; only needed while gridding, never serialized.
  std::vector<Vec2> support;

  const PlaneLink* link_to(int other) const;
  /// Height of the plane surface along world z at world (x, y).
  double surface_z(double x, double y) const;
};

struct VerticalPlane {
  Transform frame;
  double inclination = 0.0;
  std::vector<Vec3> boundary_points;  // alpha-shape boundary, world frame
};

struct PlaneSet {
  std::vector<TraversablePlane> traversable;
  std::vector<VerticalPlane> vertical;
};

}  // namespace planeway
