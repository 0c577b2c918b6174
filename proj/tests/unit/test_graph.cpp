#include "oracles.hpp"
#include "planeway/error.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace planeway;

namespace {

constexpr double kClear = 0.15;

GridMap open_grid(int w, int h) {
  GridMap g(0.1, Vec2(0, 0), w, h);
  for (auto& s : g.states()) s = CellState::Safe;
  compute_esdf(g);
  return g;
}

bool segment_clear(const GridMap& g, const Vec2& a, const Vec2& b, double clearance) {
  const int n = std::max(2, static_cast<int>(std::ceil((b - a).norm() / (0.1 * g.resolution()))));
  for (int k = 0; k <= n; ++k) {
    if (!point_traversable(g, a + (b - a) * (double(k) / n), clearance)) return false;
  }
  return true;
}

double polyline_length(const std::vector<Vec2>& pts) {
  double len = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) len += (pts[i] - pts[i - 1]).norm();
  return len;
}

// Blocks every cell of `plane` whose center lies within `radius` of the link
// segment between parameters t0 and t1.
void block_link(TraversablePlane& plane, const Segment3D& seg, double t0, double t1, double radius) {
  GridMap& g = plane.grid;
  const Vec2 a = plane.frame.project(seg.at(t0)), b = plane.frame.project(seg.at(t1));
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x)
      if (point_segment_distance(g.cell_center(x, y), a, b) <= radius) g.set_state(x, y, CellState::Occupied);
  compute_esdf(g);
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

TEST(PlaceVertices, UnobstructedCrossingAtMidpoint) {
  const PlaneSet set = pwtest::extract_patches(pwtest::ramp_patches(15.0, false));
  const auto verts = place_vertices(set.traversable, kClear);
  ASSERT_EQ(verts.size(), 1u);
  EXPECT_EQ(verts[0].line_param, 0.5);
  EXPECT_LT(verts[0].plane_a, verts[0].plane_b);
  for (int p : {verts[0].plane_a, verts[0].plane_b}) {
    EXPECT_GE(query_esdf(set.traversable[p].grid, verts[0].local_in(p)).value, kClear);
  }
}

TEST(PlaceVertices, BlockedMiddleUsesNearestFeasibleSample) {
  PlaneSet set = pwtest::extract_patches(pwtest::ramp_patches(15.0, false));
  auto& planes = set.traversable;
  const Segment3D seg = planes[0].neighbors[0].segment;
  block_link(planes[0], seg, 0.3, 0.7, 0.05);
  const auto verts = place_vertices(planes, kClear);
  ASSERT_EQ(verts.size(), 1u);

  // Oracle: scan every sample of the segment and keep the feasible one closest to the middle.
  const double step = 0.1 / seg.length();
  double best = -1.0;
  for (int k = -static_cast<int>(0.5 / step); k <= static_cast<int>(0.5 / step); ++k) {
    const double t = 0.5 + k * step;
    bool ok = true;
    for (const auto& p : planes) {
      const Vec2 local = p.frame.project(seg.at(t));
      ok = ok && point_traversable(p.grid, local, kClear) && query_esdf(p.grid, local).value >= kClear;
    }
    if (ok && (best < 0 || std::abs(t - 0.5) < std::abs(best - 0.5) - 1e-12)) best = t;
  }
  ASSERT_GE(best, 0.0);
  EXPECT_NEAR(std::abs(verts[0].line_param - 0.5), std::abs(best - 0.5), 1e-12);
  EXPECT_TRUE(verts[0].line_param < 0.3 || verts[0].line_param > 0.7);
}

TEST(PlaceVertices, FullyBlockedLineHasNoVertex) {
  PlaneSet set = pwtest::extract_patches(pwtest::ramp_patches(15.0, false));
  const Segment3D seg = set.traversable[0].neighbors[0].segment;
  block_link(set.traversable[0], seg, -0.1, 1.1, 0.05);
  EXPECT_TRUE(place_vertices(set.traversable, kClear).empty());
}

TEST(InPlanePath, OpenGridCornerToCorner) {
  const GridMap g = open_grid(20, 20);
  const Vec2 a = g.cell_center(0, 0), b = g.cell_center(19, 19);
  const auto path = in_plane_path(g, a, b, 0.0);
  ASSERT_TRUE(path.has_value());
  const auto oracle = pwtest::grid_dijkstra(g, {0, 0}, {19, 19}, 0.0);
  ASSERT_TRUE(oracle.has_value());
  EXPECT_EQ(path->raw_cost, oracle->cost(g.resolution()));
  EXPECT_NEAR(path->cost, (b - a).norm(), g.resolution());
  EXPECT_NEAR(path->cost, polyline_length(path->polyline), 1e-12);
}

TEST(InPlanePath, WallSplitsGrid) {
  GridMap g = open_grid(20, 20);
  for (int y = 0; y < 20; ++y) g.set_state(10, y, CellState::Occupied);
  compute_esdf(g);
  EXPECT_FALSE(in_plane_path(g, g.cell_center(2, 2), g.cell_center(17, 17), 0.0).has_value());
}

TEST(InPlanePath, RandomGridsMatchDijkstra) {
  std::mt19937_64 rng(21);
  int found = 0;
  for (int trial = 0; trial < 100; ++trial) {
    GridMap g = pwtest::random_state_grid(rng, 20 + trial % 11, 18 + trial % 7, 0.1 + 0.002 * trial);
    compute_esdf(g);
    const double clearance = trial % 2 ? 0.0 : 0.1;
    const std::pair<int, int> a{static_cast<int>(rng() % g.width()), static_cast<int>(rng() % g.height())};
    const std::pair<int, int> b{static_cast<int>(rng() % g.width()), static_cast<int>(rng() % g.height())};
    const auto path = in_plane_path(g, g.cell_center(a.first, a.second), g.cell_center(b.first, b.second), clearance);
    const auto oracle = pwtest::grid_dijkstra(g, a, b, clearance);
    ASSERT_EQ(path.has_value(), oracle.has_value()) << "trial " << trial;
    if (!path) continue;
    ++found;
    EXPECT_EQ(path->raw_cost, oracle->cost(g.resolution())) << "trial " << trial;
    EXPECT_LE(path->cost, path->raw_cost + 1e-9);
    EXPECT_NEAR(path->cost, polyline_length(path->polyline), 1e-9);
    for (std::size_t i = 1; i < path->polyline.size(); ++i) {
      EXPECT_TRUE(segment_clear(g, path->polyline[i - 1], path->polyline[i], clearance));
    }
    // Undirected: the reverse query costs the same.
    const auto back = in_plane_path(g, g.cell_center(b.first, b.second), g.cell_center(a.first, a.second), clearance);
    ASSERT_TRUE(back.has_value());
    EXPECT_EQ(back->raw_cost, path->raw_cost);
  }
  EXPECT_GT(found, 30);
}

TEST(ShortestPath, MatchesFloydWarshall) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 19);
    std::vector<WeightedEdge> edges;
    const int m = static_cast<int>(rng() % (2 * n + 1));
    for (int e = 0; e < m; ++e) {
      edges.push_back({static_cast<int>(rng() % n), static_cast<int>(rng() % n), double(1 + rng() % 20)});
    }
    const auto d = pwtest::floyd_warshall(n, edges);
    for (int s = 0; s < n; ++s) {
      for (int t = 0; t < n; ++t) {
        const auto p = shortest_path(n, edges, s, t);
        if (std::isinf(d[s][t])) {
          EXPECT_FALSE(p.has_value());
          continue;
        }
        ASSERT_TRUE(p.has_value());
        EXPECT_EQ(p->cost, d[s][t]);
        ASSERT_EQ(p->nodes.front(), s);
        ASSERT_EQ(p->nodes.back(), t);
        double sum = 0.0;
        for (std::size_t k = 0; k < p->edges.size(); ++k) {
          const auto& e = edges[p->edges[k]];
          EXPECT_TRUE((e.u == p->nodes[k] && e.v == p->nodes[k + 1]) || (e.v == p->nodes[k] && e.u == p->nodes[k + 1]));
          sum += e.cost;
        }
        EXPECT_EQ(sum, p->cost);
      }
    }
  }
}

TEST(BuildGraph, TwoFloorsJoinedByRamp) {
  auto patches = pwtest::ramp_patches(15.0, true);
  patches.push_back({"island", Vec3(20, 20, 0), Vec3(3, 0, 0), Vec3(0, 3, 0), false, {}});
  const PlaneSet set = pwtest::extract_patches(patches);
  ASSERT_EQ(set.traversable.size(), 4u);
  const PlaneGraph g = build_graph(set.traversable, kClear);
  ASSERT_EQ(g.vertices.size(), 2u);
  int ramp = -1, island = -1;
  for (const auto& p : set.traversable) {
    if (p.kind == PlaneKind::Slope) ramp = p.id;
    if (p.frame.translation.x() > 15) island = p.id;
  }
  ASSERT_GE(ramp, 0);
  ASSERT_GE(island, 0);
  int ramp_edges = 0;
  for (const auto& e : g.edges) {
    EXPECT_NE(e.plane, island);
    EXPECT_NEAR(e.cost, polyline_length(e.polyline), 1e-9);
    if (e.plane == ramp) {
      ++ramp_edges;
      EXPECT_NE(e.u, e.v);
    }
  }
  EXPECT_EQ(ramp_edges, 1);
  const auto adj = g.adjacency();
  ASSERT_EQ(adj.size(), 2u);
  EXPECT_EQ(adj[0].size(), 1u);
}

TEST(SearchPath, SameFloorIsStraight) {
  const PlaneSet set = pwtest::extract_patches({{"floor", Vec3(0, 0, 0), Vec3(5, 0, 0), Vec3(0, 3, 0), false, {}}});
  const PlaneGraph g = build_graph(set.traversable, kClear);
  const auto r = search_path(g, set.traversable, Vec3(0.5, 1.5, 0.3), Vec3(4.5, 1.5, 0.0), GraphConfig(), kClear);
  ASSERT_EQ(r.planes.size(), 1u);
  EXPECT_TRUE(r.crossings.empty());
  ASSERT_EQ(r.polylines[0].size(), 2u);
  EXPECT_NEAR(r.cost, 4.0, 1e-2);
  EXPECT_NEAR(r.start.z(), 0.0, 0.02);  // projected onto the floor
}

TEST(SearchPath, UnreachableIslandAndOffMap) {
  const PlaneSet set = pwtest::extract_patches({{"floor", Vec3(0, 0, 0), Vec3(4, 0, 0), Vec3(0, 3, 0), false, {}},
                                                {"island", Vec3(10, 0, 0.5), Vec3(3, 0, 0), Vec3(0, 3, 0), false, {}}});
  const PlaneGraph g = build_graph(set.traversable, kClear);
  auto code = [&](const Vec3& s, const Vec3& t) {
    try {
      search_path(g, set.traversable, s, t, GraphConfig(), kClear);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::DegenerateInput;
  };
  EXPECT_EQ(code(Vec3(1, 1.5, 0), Vec3(11, 1.5, 0.5)), ErrorCode::Unreachable);
  EXPECT_EQ(code(Vec3(1, 1.5, 0), Vec3(50, 50, 0)), ErrorCode::NoPlaneNearGoal);
  EXPECT_EQ(code(Vec3(1, 1.5, 9), Vec3(2, 1.5, 0)), ErrorCode::NoPlaneNearStart);
}

TEST(SearchPath, PlatformRouteClimbsAndDescends) {
  SceneSpec spec;
  spec.name = "platform";
  const Scene scene = generate(spec);
  const PlaneSet set = extract_traversable_planes(scene.cloud, RunConfig());
  const PlaneGraph g = build_graph(set.traversable, kClear);
  const PathResult r = search_path(g, set.traversable, scene.start, scene.goal, GraphConfig(), kClear);
  EXPECT_GE(r.planes.size(), 3u);
  ASSERT_EQ(r.crossings.size() + 1, r.planes.size());
  for (std::size_t i = 0; i + 1 < r.planes.size(); ++i) {
    EXPECT_NE(set.traversable[r.planes[i]].link_to(r.planes[i + 1]), nullptr);
    // Polylines chain through the crossing points.
    const Vec3 end = set.traversable[r.planes[i]].frame.to_world(r.polylines[i].back());
    const Vec3 begin = set.traversable[r.planes[i + 1]].frame.to_world(r.polylines[i + 1].front());
    EXPECT_LT((end - r.crossings[i].world_point).norm(), 1e-6);
    EXPECT_LT((begin - r.crossings[i].world_point).norm(), 1e-6);
  }
  for (std::size_t i = 0; i < r.planes.size(); ++i) {
    for (const Vec2& p : r.polylines[i]) {
      EXPECT_GE(query_esdf(set.traversable[r.planes[i]].grid, p).value, kClear - 0.1);
    }
  }
}

TEST(BuildGraph, MultilayerGoalLayerReachable) {
  SceneSpec spec;
  spec.name = "multilayer";
  const Scene scene = generate(spec);
  const PlaneSet set = extract_traversable_planes(scene.cloud, RunConfig());
  const PlaneGraph g = build_graph(set.traversable, kClear);
  UnionFind uf(static_cast<int>(g.vertices.size()));
  for (const auto& e : g.edges) uf.unite(e.u, e.v);
  const auto low = project_to_planes(set.traversable, scene.start, 1.5);
  const auto high = project_to_planes(set.traversable, scene.goal, 1.5);
  ASSERT_TRUE(low && high);
  ASSERT_NE(low->plane, high->plane);
  bool reachable = false;
  for (std::size_t a = 0; a < g.vertices.size(); ++a)
    for (std::size_t b = 0; b < g.vertices.size(); ++b)
      reachable = reachable || (g.vertices[a].touches(low->plane) && g.vertices[b].touches(high->plane) &&
                                uf.find(static_cast<int>(a)) == uf.find(static_cast<int>(b)));
  EXPECT_TRUE(reachable);
}
