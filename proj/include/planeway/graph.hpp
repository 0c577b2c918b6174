#pragma once

#include "planeway/config.hpp"
#include "planeway/plane_set.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace planeway {

/// Feasible crossing point on the intersection segment of planes (plane_a, plane_b).
struct GraphVertex {
  int plane_a = -1;  // plane_a < plane_b
  int plane_b = -1;
  Vec3 world_point = Vec3::Zero();
  Vec2 local_a = Vec2::Zero();
  Vec2 local_b = Vec2::Zero();
  double line_param = 0.5;  // position along the link segment a -> b

  int other(int plane) const { return plane == plane_a ? plane_b : plane_a; }
  bool touches(int plane) const { return plane == plane_a || plane == plane_b; }
  const Vec2& local_in(int plane) const { return plane == plane_a ? local_a : local_b; }
};

struct GraphEdge {
  int u = -1;
  int v = -1;
  int plane = -1;
  std::vector<Vec2> polyline;  // from u to v, plane coordinates
  double cost = 0.0;           // polyline arc length
};

struct PlaneGraph {
  std::vector<GraphVertex> vertices;
  std::vector<GraphEdge> edges;

  /// Edge ids touching each vertex, ascending.
  std::vector<std::vector<int>> adjacency() const;
};

struct GridPath {
  std::vector<Vec2> polyline;  // simplified, first and last points are the query points
  double cost = 0.0;           // arc length of the simplified polyline
  double raw_cost = 0.0;       // cell path length before shortcutting
  int orthogonal_steps = 0;
  int diagonal_steps = 0;
};

/// Cell predicate shared by the search and the shortcut check.
bool cell_traversable(const GridMap& grid, int ix, int iy, double clearance);
bool point_traversable(const GridMap& grid, const Vec2& p, double clearance);

/// Exact cost of a cell path with the given step counts.
inline double step_cost(double resolution, int orthogonal, int diagonal) {
  return resolution * (orthogonal + std::sqrt(2.0) * diagonal);
}

/// A* over 8-connected cells (no corner cutting) followed by greedy
/// line-of-sight shortcutting. nullopt when either end is blocked or no path exists.
std::optional<GridPath> in_plane_path(const GridMap& grid, const Vec2& a, const Vec2& b, double clearance);

/// Midpoint of every link, or the nearest feasible sample to it scanning
/// outward one cell at a time. Links without any feasible sample get no vertex.
std::vector<GraphVertex> place_vertices(const std::vector<TraversablePlane>& planes, double clearance);

PlaneGraph build_graph(const std::vector<TraversablePlane>& planes, double clearance);

struct WeightedEdge {
  int u = -1;
  int v = -1;
  double cost = 0.0;
};

struct NodePath {
  std::vector<int> nodes;
  std::vector<int> edges;  // index into the input edge list
  double cost = 0.0;
};

/// Uniform-cost search on an undirected graph. Ties are broken by node id.
std::optional<NodePath> shortest_path(int node_count, const std::vector<WeightedEdge>& edges, int source,
                                      int target);

struct Crossing {
  int vertex = -1;
  int from_plane = -1;
  int to_plane = -1;
  Segment3D segment;       // the link segment, as stored on the planes
  double line_param = 0.5;
  Vec3 world_point = Vec3::Zero();
};

struct PathResult {
  std::vector<int> planes;                      // visited plane sequence
  std::vector<std::vector<Vec2>> polylines;     // one per visited plane, local coordinates
  std::vector<Crossing> crossings;              // planes.size() - 1 entries
  Vec3 start = Vec3::Zero();                    // projections onto the first/last plane
  Vec3 goal = Vec3::Zero();
  double cost = 0.0;
};

struct Projection {
  int plane = -1;
  Vec2 local = Vec2::Zero();
  Vec3 world = Vec3::Zero();
  double distance = 0.0;
};

/// Nearest plane whose expanded boundary contains the point's projection.
std::optional<Projection> project_to_planes(const std::vector<TraversablePlane>& planes, const Vec3& p,
                                            double max_distance);

/// Throws NoPlaneNearStart / NoPlaneNearGoal, InfeasibleInit when an end point
/// is too close to an obstacle, and Unreachable.
PathResult search_path(const PlaneGraph& graph, const std::vector<TraversablePlane>& planes, const Vec3& start,
                       const Vec3& goal, const GraphConfig& config, double clearance);

}  // namespace planeway
