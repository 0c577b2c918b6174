#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <tuple>

namespace pwtest {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::vector<double> brute_force_esdf(const GridMap& grid) {
  const int w = grid.width(), h = grid.height();
  std::vector<double> out(grid.cell_count(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool obstacle = is_obstacle(grid.state(x, y));
      double best = kInf;
      for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
          if (is_obstacle(grid.state(u, v)) == obstacle) continue;
          best = std::min(best, std::hypot(double(u - x), double(v - y)));
        }
      }
      out[grid.index(x, y)] = (obstacle ? -1.0 : 1.0) * best * grid.resolution();
    }
  }
  return out;
}

GridMap random_state_grid(std::mt19937_64& rng, int width, int height, double obstacle_ratio, double resolution) {
  GridMap grid(resolution, Vec2(-0.5 * width * resolution, -0.5 * height * resolution), width, height);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // Overlap cells are not walkable, so keep them rare or the free space stops percolating.
  const CellState free_states[] = {CellState::Safe, CellState::Safe, CellState::Safe, CellState::Safe,
                                   CellState::Safe, CellState::Safe, CellState::Interline, CellState::Overlap};
  const CellState blocked[] = {CellState::Unknown, CellState::Occupied, CellState::Boundary};
  for (auto& s : grid.states()) {
    s = u(rng) < obstacle_ratio ? blocked[rng() % 3] : free_states[rng() % 8];
  }
  return grid;
}

std::optional<StepCounts> grid_dijkstra(const GridMap& grid, std::pair<int, int> from, std::pair<int, int> to,
                                        double clearance) {
  const int w = grid.width(), h = grid.height();
  const std::size_t n = grid.cell_count();
  auto ok = [&](int x, int y) { return cell_traversable(grid, x, y, clearance); };
  if (!ok(from.first, from.second) || !ok(to.first, to.second)) return std::nullopt;

  std::vector<double> dist(n, kInf);
  std::vector<StepCounts> counts(n);
  std::vector<char> done(n, 0);
  dist[grid.index(from.first, from.second)] = 0.0;
  for (;;) {
    std::size_t cur = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!done[i] && dist[i] < kInf && (cur == n || dist[i] < dist[cur])) cur = i;
    }
    if (cur == n) break;
    done[cur] = 1;
    const int x = static_cast<int>(cur % w), y = static_cast<int>(cur / w);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h || !ok(nx, ny)) continue;
        const bool diagonal = dx != 0 && dy != 0;
        if (diagonal && (!ok(nx, y) || !ok(x, ny))) continue;
        StepCounts c = counts[cur];
        (diagonal ? c.diagonal : c.orthogonal) += 1;
        const std::size_t nb = grid.index(nx, ny);
        const double d = c.cost(grid.resolution());
        if (d < dist[nb]) {
          dist[nb] = d;
          counts[nb] = c;
        }
      }
    }
  }
  const std::size_t t = grid.index(to.first, to.second);
  if (dist[t] == kInf) return std::nullopt;
  return counts[t];
}

std::vector<std::vector<double>> floyd_warshall(int n, const std::vector<WeightedEdge>& edges) {
  std::vector<std::vector<double>> d(n, std::vector<double>(n, kInf));
  for (int i = 0; i < n; ++i) d[i][i] = 0.0;
  for (const auto& e : edges) {
    d[e.u][e.v] = std::min(d[e.u][e.v], e.cost);
    d[e.v][e.u] = std::min(d[e.v][e.u], e.cost);
  }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  return d;
}

SegmentCoeffs quintic_hermite(const SigmaState& a, const SigmaState& b, double T) {
  Eigen::Matrix<double, 6, 6> A = Eigen::Matrix<double, 6, 6>::Zero();
  for (int k = 0; k < 6; ++k) {
    A(0, k) = k == 0 ? 1.0 : 0.0;
    A(1, k) = k == 1 ? 1.0 : 0.0;
    A(2, k) = k == 2 ? 2.0 : 0.0;
    A(3, k) = std::pow(T, k);
    A(4, k) = k >= 1 ? k * std::pow(T, k - 1) : 0.0;
    A(5, k) = k >= 2 ? k * (k - 1) * std::pow(T, k - 2) : 0.0;
  }
  Eigen::Matrix<double, 6, 2> rhs;
  rhs << a.pos.transpose(), a.vel.transpose(), a.acc.transpose(), b.pos.transpose(), b.vel.transpose(),
      b.acc.transpose();
  return A.fullPivLu().solve(rhs);
}

double jerk_integral(const SegmentCoeffs& c, double T) {
  // Jerk is quadratic, its square quartic: 3-point Gauss-Legendre is exact per panel.
  const double nodes[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  const double weights[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  const int panels = 64;
  const double hp = T / panels;
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    for (int q = 0; q < 3; ++q) {
      const double t = (p + 0.5) * hp + 0.5 * hp * nodes[q];
      double j0 = 0.0, j1 = 0.0;
      for (int k = 3; k < 6; ++k) {
        const double f = k * (k - 1) * (k - 2) * std::pow(t, k - 3);
        j0 += f * c(k, 0);
        j1 += f * c(k, 1);
      }
      sum += 0.5 * hp * weights[q] * (j0 * j0 + j1 * j1);
    }
  }
  return sum;
}

CrossPlaneTrajectory single_part(const std::vector<SegmentCoeffs>& coeffs, const std::vector<double>& durations,
                                 const Transform& frame, const Vec2& start_local, int n_quad) {
  CrossPlaneTrajectory traj;
  traj.spline.coeffs = coeffs;
  traj.spline.durations = durations;
  TrajectoryPart part;
  part.plane = 0;
  part.frame = frame;
  part.delta_theta = frame.yaw_offset();
  part.start_local = start_local;
  part.first_segment = 0;
  part.segment_count = static_cast<int>(coeffs.size());
  traj.parts.push_back(part);
  traj.n_quad = n_quad;
  return traj;
}

std::vector<SurfacePatch> ramp_patches(double ramp_deg, bool upper_floor) {
  const double rise = 2.0 * std::tan(ramp_deg * std::numbers::pi / 180.0);
  std::vector<SurfacePatch> patches;
  patches.push_back({"floor", Vec3(0, 0, 0), Vec3(4, 0, 0), Vec3(0, 3, 0), false, {}});
  patches.push_back({"ramp", Vec3(4, 0, 0), Vec3(2, 0, rise), Vec3(0, 3, 0), false, {}});
  if (upper_floor) patches.push_back({"upper", Vec3(6, 0, rise), Vec3(3, 0, 0), Vec3(0, 3, 0), false, {}});
  return patches;
}

PlaneSet extract_patches(const std::vector<SurfacePatch>& patches, double density, double noise, std::uint64_t seed) {
  PointCloud cloud;
  std::vector<int> labels;
  sample_patches(patches, density, noise, seed, cloud, labels);
  return extract_traversable_planes(cloud, RunConfig());
}

ToyProblem two_plane_problem() {
  ToyProblem toy;
  toy.set = extract_patches(ramp_patches(15.0, false));
  const PlaneGraph graph = build_graph(toy.set.traversable, toy.config.robot.d_s);
  toy.path = search_path(graph, toy.set.traversable, Vec3(1.0, 1.0, 0.0), Vec3(5.2, 2.0, 0.4), toy.config.graph,
                         toy.config.robot.d_s);
  std::tie(toy.problem, toy.x0) = initial_guess(toy.path, toy.set.traversable, toy.config.robot, toy.config.optimizer);
  return toy;
}

MatchReport match_ground_truth(const Scene& scene, const PlaneSet& planes, double max_normal_deg, double max_height) {
  MatchReport rep;
  std::ostringstream msg;
  const auto& tp = planes.traversable;
  const double cos_tol = std::cos(max_normal_deg * std::numbers::pi / 180.0);
  std::vector<int> used(tp.size(), 0);

  for (std::size_t s = 0; s < scene.walkable.size(); ++s) {
    const WalkableSurface& w = scene.walkable[s];
    Vec2 c = Vec2::Zero();
    for (const Vec2& p : w.footprint) c += p;
    c /= static_cast<double>(w.footprint.size());
    const Vec3& n = w.normal;
    const double z = w.point.z() - (n.x() * (c.x() - w.point.x()) + n.y() * (c.y() - w.point.y())) / n.z();
    const Vec3 center(c.x(), c.y(), z);

    std::vector<int> candidates;
    for (std::size_t p = 0; p < tp.size(); ++p) {
      if (tp[p].frame.normal().dot(n) < cos_tol) continue;
      if (std::abs(tp[p].frame.height(center)) > max_height) continue;
      if (!tp[p].boundary.contains(tp[p].frame.project(center))) continue;
      candidates.push_back(static_cast<int>(p));
    }
    int match = -1;
    if (candidates.size() == 1) {
      match = candidates[0];
      if (w.kind == PlaneKind::Stairs && tp[match].kind != PlaneKind::Stairs) {
        msg << w.label << ": matched plane " << match << " is " << kind_name(tp[match].kind) << "; ";
        match = -1;
      } else {
        ++used[match];
      }
    } else {
      msg << w.label << ": " << candidates.size() << " candidate planes; ";
    }
    rep.plane_of_surface.push_back(match);
    rep.ok = rep.ok && match >= 0;
  }
  for (std::size_t p = 0; p < tp.size(); ++p) {
    if (used[p] != 1) {
      msg << "plane " << p << " matched " << used[p] << " surfaces; ";
      rep.ok = false;
    }
  }

  if (rep.ok) {
    std::set<std::pair<int, int>> truth, found;
    for (const auto& [a, b] : scene.adjacency) {
      const int pa = rep.plane_of_surface[a], pb = rep.plane_of_surface[b];
      truth.insert({std::min(pa, pb), std::max(pa, pb)});
    }
    for (std::size_t p = 0; p < tp.size(); ++p) {
      for (const auto& link : tp[p].neighbors) {
        found.insert({std::min<int>(p, link.plane), std::max<int>(p, link.plane)});
      }
    }
    if (truth != found) {
      rep.ok = false;
      msg << "links:";
      for (const auto& [a, b] : found) msg << " " << a << "-" << b;
      msg << " truth:";
      for (const auto& [a, b] : truth) msg << " " << a << "-" << b;
    }
  }
  rep.detail = msg.str();
  return rep;
}

std::string temp_dir(const std::string& tag) {
  namespace fs = std::filesystem;
  std::random_device rd;
  const fs::path dir = fs::temp_directory_path() / ("planeway_" + tag + "_" + std::to_string(rd()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

}  // namespace pwtest
