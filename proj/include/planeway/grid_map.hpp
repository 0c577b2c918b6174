#pragma once

#include "planeway/geometry.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace planeway {

enum class CellState : std::uint8_t { Unknown, Safe, Interline, Overlap, Boundary, Occupied };

char state_code(CellState s);
std::optional<CellState> state_from_code(char c);

/// Obstacles for the distance field are exactly Unknown, Occupied and Boundary.
inline bool is_obstacle(CellState s) {
  return s == CellState::Unknown || s == CellState::Occupied || s == CellState::Boundary;
}

struct EsdfSample {
  double value = 0.0;
  Vec2 gradient = Vec2::Zero();
};

/// Row-major grid in plane coordinates. Cell (ix, iy) has its center at
/// origin + (ix + 0.5, iy + 0.5) * resolution.
class GridMap {
 public:
  GridMap() = default;
  GridMap(double resolution, Vec2 origin, int width, int height);

  double resolution() const { return resolution_; }
  const Vec2& origin() const { return origin_; }
  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t cell_count() const { return states_.size(); }

  std::size_t index(int ix, int iy) const { return static_cast<std::size_t>(iy) * width_ + ix; }
  bool in_bounds(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < width_ && iy < height_; }
  Vec2 cell_center(int ix, int iy) const;
  /// Cell containing a point, or nullopt when outside the grid.
  std::optional<std::pair<int, int>> cell_of(const Vec2& p) const;

  CellState state(int ix, int iy) const { return states_[index(ix, iy)]; }
  void set_state(int ix, int iy, CellState s) { states_[index(ix, iy)] = s; }
  double esdf(int ix, int iy) const { return esdf_[index(ix, iy)]; }

  std::vector<CellState>& states() { return states_; }
  const std::vector<CellState>& states() const { return states_; }
  std::vector<double>& esdf_values() { return esdf_; }
  const std::vector<double>& esdf_values() const { return esdf_; }

  std::string states_string() const;

 private:
  double resolution_ = 0.1;
  Vec2 origin_ = Vec2::Zero();
  int width_ = 0;
  int height_ = 0;
  std::vector<CellState> states_;
  std::vector<double> esdf_;
};

/// Exact signed Euclidean distance transform (separable parabola-envelope method).
/// Free cells get +distance to the nearest obstacle cell center, obstacle cells
/// get -distance to the nearest free cell center. When one of the two sets is
/// empty the field saturates at +/- the grid diagonal.
void compute_esdf(GridMap& grid);

/// Bilinear interpolation between the four surrounding cell centers. Outside the
/// span of cell centers the border value is continued with slope -1 away from the grid.
EsdfSample query_esdf(const GridMap& grid, const Vec2& p);

}  // namespace planeway
