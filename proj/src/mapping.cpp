#include "planeway/mapping.hpp"

#include "planeway/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace planeway {

const char* kind_name(PlaneKind k) {
  switch (k) {
    case PlaneKind::Ground: return "ground";
    case PlaneKind::Slope: return "slope";
    case PlaneKind::Stairs: return "stairs";
    case PlaneKind::Vertical: return "vertical";
  }
  return "ground";
}

PlaneKind kind_from_name(const std::string& name) {
  if (name == "ground") return PlaneKind::Ground;
  if (name == "slope") return PlaneKind::Slope;
  if (name == "stairs") return PlaneKind::Stairs;
  if (name == "vertical") return PlaneKind::Vertical;
  throw Error(ErrorCode::ParseError, "unknown plane kind '" + name + "'");
}

const PlaneLink* TraversablePlane::link_to(int other) const {
  for (const auto& l : neighbors) {
    if (l.plane == other) return &l;
  }
  return nullptr;
}

double TraversablePlane::surface_z(double x, double y) const {
  const Vec3 n = frame.normal();
  const Vec3& c = frame.translation;
  return c.z() - (n.x() * (x - c.x()) + n.y() * (y - c.y())) / n.z();
}

std::vector<std::pair<int, int>> supercover_cells(const GridMap& grid, const Vec2& a, const Vec2& b) {
  // Amanatides-Woo traversal; on exact corner hits both side cells are added.
  std::vector<std::pair<int, int>> cells;
  const double res = grid.resolution();
  const Vec2 pa = (a - grid.origin()) / res;
  const Vec2 pb = (b - grid.origin()) / res;
  int ix = static_cast<int>(std::floor(pa.x()));
  int iy = static_cast<int>(std::floor(pa.y()));
  const int ex = static_cast<int>(std::floor(pb.x()));
  const int ey = static_cast<int>(std::floor(pb.y()));
  const Vec2 d = pb - pa;
  const int sx = d.x() > 0 ? 1 : -1;
  const int sy = d.y() > 0 ? 1 : -1;
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double dtx = d.x() != 0.0 ? std::abs(1.0 / d.x()) : inf;
  const double dty = d.y() != 0.0 ? std::abs(1.0 / d.y()) : inf;
  double tx = d.x() != 0.0 ? ((sx > 0 ? ix + 1 - pa.x() : pa.x() - ix) * dtx) : inf;
  double ty = d.y() != 0.0 ? ((sy > 0 ? iy + 1 - pa.y() : pa.y() - iy) * dty) : inf;

  auto push = [&](int x, int y) {
    if (grid.in_bounds(x, y)) cells.emplace_back(x, y);
  };
  push(ix, iy);
  const int steps = std::abs(ex - ix) + std::abs(ey - iy);
  for (int k = 0; k < steps; ++k) {
    if (std::abs(tx - ty) < 1e-12) {
      push(ix + sx, iy);
      push(ix, iy + sy);
      ix += sx;
      iy += sy;
      tx += dtx;
      ty += dty;
      ++k;
    } else if (tx < ty) {
      ix += sx;
      tx += dtx;
    } else {
      iy += sy;
      ty += dty;
    }
    push(ix, iy);
  }
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  return cells;
}

namespace {

constexpr double kOverlapMinHeight = 0.02;   // m a neighbor must rise above a cell to overlap it
constexpr double kBelowTolerance = 0.1;      // m below the surface still counted as on it

GridMap allocate(const TraversablePlane& plane, double res) {
  const auto box = plane.boundary.bounds();
  const int pad = 2;
  const Vec2 origin(round_decimals((std::floor(box.min().x() / res) - pad) * res, 6),
                    round_decimals((std::floor(box.min().y() / res) - pad) * res, 6));
  const int w = static_cast<int>(std::ceil((box.max().x() - origin.x()) / res)) + pad;
  const int h = static_cast<int>(std::ceil((box.max().y() - origin.y()) / res)) + pad;
  return GridMap(res, origin, w, h);
}

}  // namespace

GridMap build_grid(const TraversablePlane& plane, const std::vector<TraversablePlane>& all_traversable,
                   const std::vector<VerticalPlane>& all_vertical, const MappingConfig& config,
                   double safety_distance) {
  GridMap grid = allocate(plane, config.resolution);
  const int w = grid.width();
  const int h = grid.height();
  const std::size_t n = grid.cell_count();
  std::vector<char> safe(n, 0), interline(n, 0), overlap(n, 0), occupied(n, 0);

  for (const Vec2& p : plane.support) {
    if (auto c = grid.cell_of(p)) safe[grid.index(c->first, c->second)] = 1;
  }
  if (std::none_of(safe.begin(), safe.end(), [](char c) { return c != 0; })) {
    throw Error(ErrorCode::EmptyGrid, "plane " + std::to_string(plane.id) + " has no support cell");
  }

  for (const PlaneLink& link : plane.neighbors) {
    const Vec2 a = plane.frame.project(link.segment.a);
    const Vec2 b = plane.frame.project(link.segment.b);
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    for (int iy = 0; iy < h; ++iy) {
      for (int ix = 0; ix < w; ++ix) {
        const Vec2 c = grid.cell_center(ix, iy);
        const double t = (c - a).dot(ab) / len2;
        if (t < 0.0 || t > 1.0) continue;
        if ((a + t * ab - c).norm() <= config.interline_halfwidth) interline[grid.index(ix, iy)] = 1;
      }
    }
    for (auto [ix, iy] : supercover_cells(grid, a, b)) interline[grid.index(ix, iy)] = 1;

    const TraversablePlane& other = all_traversable.at(link.plane);
    for (int iy = 0; iy < h; ++iy) {
      for (int ix = 0; ix < w; ++ix) {
        const Vec3 world = plane.frame.to_world(grid.cell_center(ix, iy));
        const double z_other = other.surface_z(world.x(), world.y());
        if (z_other - world.z() <= kOverlapMinHeight) continue;
        const Vec2 in_other = other.frame.project(Vec3(world.x(), world.y(), z_other));
        if (other.hull.contains(in_other)) overlap[grid.index(ix, iy)] = 1;
      }
    }
  }

  const int reach = static_cast<int>(std::ceil(safety_distance / config.resolution));
  for (const VerticalPlane& vp : all_vertical) {
    for (const Vec3& p : vp.boundary_points) {
      const double height = plane.frame.height(p);
      if (height <= -kBelowTolerance || height >= config.clearance_height) continue;
      const Vec2 q = plane.frame.project(p);
      const Vec2 rel = (q - grid.origin()) / config.resolution;
      const int cx = static_cast<int>(std::floor(rel.x()));
      const int cy = static_cast<int>(std::floor(rel.y()));
      for (int iy = cy - reach; iy <= cy + reach; ++iy) {
        for (int ix = cx - reach; ix <= cx + reach; ++ix) {
          if (!grid.in_bounds(ix, iy)) continue;
          if ((grid.cell_center(ix, iy) - q).norm() <= safety_distance) occupied[grid.index(ix, iy)] = 1;
        }
      }
    }
  }

  auto plain_safe = [&](std::size_t i) { return safe[i] && !overlap[i] && !interline[i] && !occupied[i]; };
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      const std::size_t i = grid.index(ix, iy);
      CellState s = CellState::Unknown;
      if (occupied[i]) {
        s = CellState::Occupied;
      } else if (interline[i]) {
        s = CellState::Interline;
      } else if (overlap[i]) {
        s = CellState::Overlap;
        for (int dy = -1; dy <= 1 && s == CellState::Overlap; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if ((dx || dy) && grid.in_bounds(ix + dx, iy + dy) && plain_safe(grid.index(ix + dx, iy + dy))) {
              s = CellState::Boundary;
              break;
            }
          }
        }
      } else if (safe[i]) {
        s = CellState::Safe;
      }
      grid.set_state(ix, iy, s);
    }
  }
  compute_esdf(grid);
  return grid;
}

}  // namespace planeway
