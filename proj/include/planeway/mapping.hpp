#pragma once

#include "planeway/config.hpp"
#include "planeway/plane_set.hpp"

namespace planeway {

/// Grid of one traversable plane with the six cell states. `safety_distance`
/// is the stamp radius around vertical boundary points (the robot's d_s).
/// Throws EmptyGrid when no cell receives a support point.
GridMap build_grid(const TraversablePlane& plane, const std::vector<TraversablePlane>& all_traversable,
                   const std::vector<VerticalPlane>& all_vertical, const MappingConfig& config,
                   double safety_distance);

/// Cells a segment passes through (supercover: both cells at exact corner crossings).
std::vector<std::pair<int, int>> supercover_cells(const GridMap& grid, const Vec2& a, const Vec2& b);

}  // namespace planeway
