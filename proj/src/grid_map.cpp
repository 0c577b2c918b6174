#include "planeway/grid_map.hpp"

#include "planeway/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace planeway {
namespace {

// 1-D squared distance transform of f (Felzenszwalb & Huttenlocher).
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
            std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  int k = 0;
  // Leading infinities would poison the envelope; start at the first finite sample.
  int first = 0;
  while (first < n && !std::isfinite(f[first])) ++first;
  if (first == n) {
    std::fill(d.begin(), d.end(), inf);
    return;
  }
  v[0] = first;
  z[0] = -inf;
  z[1] = inf;
  for (int q = first + 1; q < n; ++q) {
    if (!std::isfinite(f[q])) continue;
    double s = 0.0;
    while (true) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (s <= z[k]) {
      // k == 0 and the new parabola dominates everywhere.
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = double(q) - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

// Squared distance (in cells) from every cell to the nearest cell where `target` holds.
std::vector<double> squared_edt(const std::vector<char>& target, int width, int height) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> grid(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) grid[i] = target[i] ? 0.0 : inf;

  const int longest = std::max(width, height);
  std::vector<double> f(longest), d(longest), z(longest + 1);
  std::vector<int> v(longest);

  f.resize(height);
  d.resize(height);
  for (int x = 0; x < width; ++x) {
    for (int y = 0; y < height; ++y) f[y] = grid[static_cast<std::size_t>(y) * width + x];
    edt_1d(f, d, v, z);
    for (int y = 0; y < height; ++y) grid[static_cast<std::size_t>(y) * width + x] = d[y];
  }
  f.resize(width);
  d.resize(width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) f[x] = grid[static_cast<std::size_t>(y) * width + x];
    edt_1d(f, d, v, z);
    for (int x = 0; x < width; ++x) grid[static_cast<std::size_t>(y) * width + x] = d[x];
  }
  return grid;
}

}  // namespace

char state_code(CellState s) {
  switch (s) {
    case CellState::Unknown: return 'U';
    case CellState::Safe: return 'S';
    case CellState::Interline: return 'I';
    case CellState::Overlap: return 'O';
    case CellState::Boundary: return 'B';
    case CellState::Occupied: return 'X';
  }
  return 'U';
}

std::optional<CellState> state_from_code(char c) {
  switch (c) {
    case 'U': return CellState::Unknown;
    case 'S': return CellState::Safe;
    case 'I': return CellState::Interline;
    case 'O': return CellState::Overlap;
    case 'B': return CellState::Boundary;
    case 'X': return CellState::Occupied;
    default: return std::nullopt;
  }
}

GridMap::GridMap(double resolution, Vec2 origin, int width, int height)
    : resolution_(resolution), origin_(std::move(origin)), width_(width), height_(height) {
  if (!(resolution > 0.0) || width < 2 || height < 2) {
    throw Error(ErrorCode::DegenerateInput, "grid needs a positive resolution and at least 2x2 cells");
  }
  states_.assign(static_cast<std::size_t>(width) * height, CellState::Unknown);
  esdf_.assign(states_.size(), 0.0);
}

Vec2 GridMap::cell_center(int ix, int iy) const {
  return origin_ + Vec2(ix + 0.5, iy + 0.5) * resolution_;
}

std::optional<std::pair<int, int>> GridMap::cell_of(const Vec2& p) const {
  const Vec2 rel = (p - origin_) / resolution_;
  const int ix = static_cast<int>(std::floor(rel.x()));
  const int iy = static_cast<int>(std::floor(rel.y()));
  if (!in_bounds(ix, iy)) return std::nullopt;
  return std::make_pair(ix, iy);
}

std::string GridMap::states_string() const {
  std::string out(states_.size(), 'U');
  for (std::size_t i = 0; i < states_.size(); ++i) out[i] = state_code(states_[i]);
  return out;
}

void compute_esdf(GridMap& grid) {
  const int w = grid.width();
  const int h = grid.height();
  std::vector<char> obstacle(grid.cell_count()), free(grid.cell_count());
  bool any_obstacle = false, any_free = false;
  for (std::size_t i = 0; i < grid.cell_count(); ++i) {
    obstacle[i] = is_obstacle(grid.states()[i]) ? 1 : 0;
    free[i] = obstacle[i] ? 0 : 1;
    any_obstacle = any_obstacle || obstacle[i];
    any_free = any_free || free[i];
  }
  const double saturation = std::hypot(double(w), double(h)) * grid.resolution();
  const std::vector<double> to_obstacle = any_obstacle ? squared_edt(obstacle, w, h) : std::vector<double>();
  const std::vector<double> to_free = any_free ? squared_edt(free, w, h) : std::vector<double>();

  auto& esdf = grid.esdf_values();
  for (std::size_t i = 0; i < grid.cell_count(); ++i) {
    if (obstacle[i]) {
      esdf[i] = any_free ? -std::sqrt(to_free[i]) * grid.resolution() : -saturation;
    } else {
      esdf[i] = any_obstacle ? std::sqrt(to_obstacle[i]) * grid.resolution() : saturation;
    }
  }
}

EsdfSample query_esdf(const GridMap& grid, const Vec2& p) {
  const double res = grid.resolution();
  const Vec2 lo = grid.cell_center(0, 0);
  const Vec2 hi = grid.cell_center(grid.width() - 1, grid.height() - 1);
  const Vec2 clamped = p.cwiseMax(lo).cwiseMin(hi);
  const Vec2 outside = p - clamped;

  const Vec2 rel = (clamped - lo) / res;
  int ix = std::min(static_cast<int>(std::floor(rel.x())), grid.width() - 2);
  int iy = std::min(static_cast<int>(std::floor(rel.y())), grid.height() - 2);
  ix = std::max(ix, 0);
  iy = std::max(iy, 0);
  const double tx = rel.x() - ix;
  const double ty = rel.y() - iy;

  const double v00 = grid.esdf(ix, iy);
  const double v10 = grid.esdf(ix + 1, iy);
  const double v01 = grid.esdf(ix, iy + 1);
  const double v11 = grid.esdf(ix + 1, iy + 1);

  EsdfSample out;
  out.value = (1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v10 + (1 - tx) * ty * v01 + tx * ty * v11;
  out.gradient.x() = ((1 - ty) * (v10 - v00) + ty * (v11 - v01)) / res;
  out.gradient.y() = ((1 - tx) * (v01 - v00) + tx * (v11 - v10)) / res;

  const double dist = outside.norm();
  if (dist > 0.0) {
    out.value -= dist;
    const Vec2 away = outside / dist;
    for (int k = 0; k < 2; ++k) {
      if (outside(k) != 0.0) out.gradient(k) = -away(k);
    }
  }
  return out;
}

}  // namespace planeway
