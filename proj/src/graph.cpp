#include "planeway/graph.hpp"

#include "planeway/error.hpp"
#include "planeway/mapping.hpp"
#include "planeway/parallel.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <tuple>

namespace planeway {
namespace {

constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};

// Every cell the segment touches must be traversable; the point samples also
// reject segments that leave the grid.
bool segment_clear(const GridMap& grid, const Vec2& a, const Vec2& b, double clearance) {
  for (auto [x, y] : supercover_cells(grid, a, b)) {
    if (!cell_traversable(grid, x, y, clearance)) return false;
  }
  const double step = 0.25 * grid.resolution();
  const int n = std::max(1, static_cast<int>(std::ceil((b - a).norm() / step)));
  for (int k = 0; k <= n; ++k) {
    if (!point_traversable(grid, a + (b - a) * (double(k) / n), clearance)) return false;
  }
  return true;
}

double polyline_length(const std::vector<Vec2>& pts) {
  double len = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) len += (pts[i] - pts[i - 1]).norm();
  return len;
}

}  // namespace

std::vector<std::vector<int>> PlaneGraph::adjacency() const {
  std::vector<std::vector<int>> adj(vertices.size());
  for (int e = 0; e < static_cast<int>(edges.size()); ++e) {
    adj[edges[e].u].push_back(e);
    adj[edges[e].v].push_back(e);
  }
  return adj;
}

bool cell_traversable(const GridMap& grid, int ix, int iy, double clearance) {
  if (!grid.in_bounds(ix, iy)) return false;
  const CellState s = grid.state(ix, iy);
  return (s == CellState::Safe || s == CellState::Interline) && grid.esdf(ix, iy) >= clearance;
}

bool point_traversable(const GridMap& grid, const Vec2& p, double clearance) {
  const auto cell = grid.cell_of(p);
  return cell && cell_traversable(grid, cell->first, cell->second, clearance);
}

std::optional<GridPath> in_plane_path(const GridMap& grid, const Vec2& a, const Vec2& b, double clearance) {
  const auto ca = grid.cell_of(a);
  const auto cb = grid.cell_of(b);
  if (!ca || !cb) return std::nullopt;
  if (!cell_traversable(grid, ca->first, ca->second, clearance) ||
      !cell_traversable(grid, cb->first, cb->second, clearance)) {
    return std::nullopt;
  }

  const int w = grid.width();
  const std::size_t n = grid.cell_count();
  const int source = static_cast<int>(grid.index(ca->first, ca->second));
  const int target = static_cast<int>(grid.index(cb->first, cb->second));
  const double res = grid.resolution();
  constexpr double inf = std::numeric_limits<double>::infinity();

  // Step counts rather than running sums keep g exact and order independent.
  std::vector<int> orth(n, 0), diag(n, 0), parent(n, -1);
  std::vector<double> g(n, inf);
  std::vector<char> closed(n, 0);
  auto heuristic = [&](int idx) {
    return (grid.cell_center(idx % w, idx / w) - grid.cell_center(cb->first, cb->second)).norm();
  };

  using Entry = std::tuple<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  g[source] = 0.0;
  open.emplace(heuristic(source), source);
  while (!open.empty()) {
    const auto [f, cur] = open.top();
    open.pop();
    if (closed[cur]) continue;
    closed[cur] = 1;
    if (cur == target) break;
    const int x = cur % w, y = cur / w;
    for (int k = 0; k < 8; ++k) {
      const int nx = x + kDx[k], ny = y + kDy[k];
      if (!cell_traversable(grid, nx, ny, clearance)) continue;
      const bool diagonal = k >= 4;
      if (diagonal && (!cell_traversable(grid, nx, y, clearance) || !cell_traversable(grid, x, ny, clearance))) {
        continue;
      }
      const int nb = static_cast<int>(grid.index(nx, ny));
      if (closed[nb]) continue;
      const int no = orth[cur] + (diagonal ? 0 : 1);
      const int nd = diag[cur] + (diagonal ? 1 : 0);
      const double ng = step_cost(res, no, nd);
      if (ng < g[nb]) {
        g[nb] = ng;
        orth[nb] = no;
        diag[nb] = nd;
        parent[nb] = cur;
        open.emplace(ng + heuristic(nb), nb);
      }
    }
  }
  if (!closed[target]) return std::nullopt;

  std::vector<int> cells;
  for (int c = target; c != -1; c = parent[c]) cells.push_back(c);
  std::reverse(cells.begin(), cells.end());

  std::vector<Vec2> raw;
  raw.reserve(cells.size() + 1);
  raw.push_back(a);
  for (std::size_t i = 1; i + 1 < cells.size(); ++i) raw.push_back(grid.cell_center(cells[i] % w, cells[i] / w));
  raw.push_back(b);

  GridPath out;
  out.orthogonal_steps = orth[target];
  out.diagonal_steps = diag[target];
  out.raw_cost = g[target];
  out.polyline.push_back(raw.front());
  std::size_t i = 0;
  while (i + 1 < raw.size()) {
    std::size_t j = i + 1;
    while (j + 1 < raw.size() && segment_clear(grid, raw[i], raw[j + 1], clearance)) ++j;
    out.polyline.push_back(raw[j]);
    i = j;
  }
  if (out.polyline.size() == 1) out.polyline.push_back(b);  // a and b share a cell
  out.cost = polyline_length(out.polyline);
  return out;
}

std::vector<GraphVertex> place_vertices(const std::vector<TraversablePlane>& planes, double clearance) {
  std::vector<GraphVertex> out;
  for (int i = 0; i < static_cast<int>(planes.size()); ++i) {
    for (const PlaneLink& link : planes[i].neighbors) {
      const int j = link.plane;
      if (j <= i) continue;
      const TraversablePlane& pa = planes[i];
      const TraversablePlane& pb = planes[j];
      const double len = link.segment.length();
      const double step = std::min(pa.grid.resolution(), pb.grid.resolution()) / len;
      auto feasible = [&](const Vec3& p) {
        for (const TraversablePlane* pl : {&pa, &pb}) {
          const Vec2 local = pl->frame.project(p);
          if (!point_traversable(pl->grid, local, clearance)) return false;
          if (query_esdf(pl->grid, local).value < clearance) return false;
        }
        return true;
      };
      for (int k = 0; 0.5 - k * step > 0.0; ++k) {
        bool found = false;
        for (double t : {0.5 - k * step, 0.5 + k * step}) {
          const Vec3 p = link.segment.at(t);
          if (feasible(p)) {
            GraphVertex v;
            v.plane_a = i;
            v.plane_b = j;
            v.world_point = p;
            v.local_a = pa.frame.project(p);
            v.local_b = pb.frame.project(p);
            v.line_param = t;
            out.push_back(v);
            found = true;
            break;
          }
          if (k == 0) break;
        }
        if (found) break;
      }
    }
  }
  return out;
}

PlaneGraph build_graph(const std::vector<TraversablePlane>& planes, double clearance) {
  PlaneGraph graph;
  graph.vertices = place_vertices(planes, clearance);
  std::vector<std::vector<GraphEdge>> per_plane(planes.size());
  parallel_for(planes.size(), [&](std::size_t p) {
    const int plane = static_cast<int>(p);
    std::vector<int> ids;
    for (int v = 0; v < static_cast<int>(graph.vertices.size()); ++v) {
      if (graph.vertices[v].touches(plane)) ids.push_back(v);
    }
    for (std::size_t a = 0; a < ids.size(); ++a) {
      for (std::size_t b = a + 1; b < ids.size(); ++b) {
        const auto path = in_plane_path(planes[p].grid, graph.vertices[ids[a]].local_in(plane),
                                        graph.vertices[ids[b]].local_in(plane), clearance);
        if (!path) continue;
        per_plane[p].push_back(GraphEdge{ids[a], ids[b], plane, path->polyline, path->cost});
      }
    }
  });
  for (auto& edges : per_plane) {
    for (auto& e : edges) graph.edges.push_back(std::move(e));
  }
  return graph;
}

std::optional<NodePath> shortest_path(int node_count, const std::vector<WeightedEdge>& edges, int source,
                                      int target) {
  std::vector<std::vector<std::pair<int, int>>> adj(node_count);  // (neighbor, edge id)
  for (int e = 0; e < static_cast<int>(edges.size()); ++e) {
    adj[edges[e].u].emplace_back(edges[e].v, e);
    adj[edges[e].v].emplace_back(edges[e].u, e);
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(node_count, inf);
  std::vector<int> via(node_count, -1);
  std::vector<char> done(node_count, 0);
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  dist[source] = 0.0;
  open.emplace(0.0, source);
  while (!open.empty()) {
    const auto [d, u] = open.top();
    open.pop();
    if (done[u]) continue;
    done[u] = 1;
    if (u == target) break;
    for (const auto& [v, e] : adj[u]) {
      const double nd = d + edges[e].cost;
      if (nd < dist[v]) {
        dist[v] = nd;
        via[v] = e;
        open.emplace(nd, v);
      }
    }
  }
  if (!done[target]) return std::nullopt;
  NodePath out;
  out.cost = dist[target];
  for (int v = target; v != source;) {
    out.nodes.push_back(v);
    out.edges.push_back(via[v]);
    const WeightedEdge& e = edges[via[v]];
    v = e.u == v ? e.v : e.u;
  }
  out.nodes.push_back(source);
  std::reverse(out.nodes.begin(), out.nodes.end());
  std::reverse(out.edges.begin(), out.edges.end());
  return out;
}

std::optional<Projection> project_to_planes(const std::vector<TraversablePlane>& planes, const Vec3& p,
                                            double max_distance) {
  std::optional<Projection> best;
  for (int i = 0; i < static_cast<int>(planes.size()); ++i) {
    const Vec3 local = planes[i].frame.to_local(p);
    const double d = std::abs(local.z());
    if (d > max_distance || !planes[i].boundary.contains(local.head<2>())) continue;
    if (!best || d < best->distance) {
      best = Projection{i, local.head<2>(), planes[i].frame.to_world(Vec2(local.head<2>())), d};
    }
  }
  return best;
}

PathResult search_path(const PlaneGraph& graph, const std::vector<TraversablePlane>& planes, const Vec3& start,
                       const Vec3& goal, const GraphConfig& config, double clearance) {
  const auto ps = project_to_planes(planes, start, config.projection_max_dist);
  if (!ps) throw Error(ErrorCode::NoPlaneNearStart, "no traversable plane under the start point");
  const auto pg = project_to_planes(planes, goal, config.projection_max_dist);
  if (!pg) throw Error(ErrorCode::NoPlaneNearGoal, "no traversable plane under the goal point");
  if (!point_traversable(planes[ps->plane].grid, ps->local, clearance)) {
    throw Error(ErrorCode::InfeasibleInit, "start point is not in free space on plane " + std::to_string(ps->plane));
  }
  if (!point_traversable(planes[pg->plane].grid, pg->local, clearance)) {
    throw Error(ErrorCode::Unreachable, "goal point is not in free space on plane " + std::to_string(pg->plane));
  }

  const int nv = static_cast<int>(graph.vertices.size());
  const int s_node = nv, g_node = nv + 1;
  std::vector<WeightedEdge> edges;
  std::vector<GraphEdge> extra;  // virtual edges, ids continue after the graph edges
  for (const GraphEdge& e : graph.edges) edges.push_back({e.u, e.v, e.cost});
  auto connect = [&](int node, const Projection& proj) {
    for (int v = 0; v < nv; ++v) {
      if (!graph.vertices[v].touches(proj.plane)) continue;
      auto path = in_plane_path(planes[proj.plane].grid, proj.local, graph.vertices[v].local_in(proj.plane), clearance);
      if (!path) continue;
      edges.push_back({node, v, path->cost});
      extra.push_back(GraphEdge{node, v, proj.plane, std::move(path->polyline), path->cost});
    }
  };
  connect(s_node, *ps);
  connect(g_node, *pg);
  if (ps->plane == pg->plane) {
    if (auto path = in_plane_path(planes[ps->plane].grid, ps->local, pg->local, clearance)) {
      edges.push_back({s_node, g_node, path->cost});
      extra.push_back(GraphEdge{s_node, g_node, ps->plane, std::move(path->polyline), path->cost});
    }
  }

  const auto found = shortest_path(nv + 2, edges, s_node, g_node);
  if (!found) throw Error(ErrorCode::Unreachable, "no path between start and goal in the plane graph");

  PathResult out;
  out.start = ps->world;
  out.goal = pg->world;
  out.cost = found->cost;
  const int ng = static_cast<int>(graph.edges.size());
  for (std::size_t k = 0; k < found->edges.size(); ++k) {
    const int id = found->edges[k];
    const GraphEdge& e = id < ng ? graph.edges[id] : extra[id - ng];
    std::vector<Vec2> poly = e.polyline;
    if (e.u != found->nodes[k]) std::reverse(poly.begin(), poly.end());
    if (!out.planes.empty() && out.planes.back() == e.plane) {
      auto& dst = out.polylines.back();
      dst.insert(dst.end(), poly.begin() + 1, poly.end());
      continue;
    }
    if (!out.planes.empty()) {
      const int vid = found->nodes[k];
      const GraphVertex& v = graph.vertices[vid];
      Crossing c;
      c.vertex = vid;
      c.from_plane = out.planes.back();
      c.to_plane = e.plane;
      c.segment = planes[c.from_plane].link_to(c.to_plane)->segment;
      c.line_param = v.line_param;
      c.world_point = v.world_point;
      out.crossings.push_back(c);
    }
    out.planes.push_back(e.plane);
    out.polylines.push_back(std::move(poly));
  }
  return out;
}

}  // namespace planeway
