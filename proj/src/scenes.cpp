#include "planeway/scenes.hpp"

#include "planeway/error.hpp"

#include <cmath>
#include <numbers>
#include <queue>
#include <random>

namespace planeway {
namespace {

constexpr double kRise = 0.17;
constexpr double kRun = 0.28;

using Box = Eigen::AlignedBox3d;

Box box(double x0, double x1, double y0, double y1, double z0, double z1) {
  return Box(Vec3(std::min(x0, x1), std::min(y0, y1), z0), Vec3(std::max(x0, x1), std::max(y0, y1), z1));
}

SurfacePatch horizontal(std::string label, double x0, double x1, double y0, double y1, double z,
                        std::vector<Box> holes = {}) {
  return {std::move(label), Vec3(x0, y0, z), Vec3(x1 - x0, 0, 0), Vec3(0, y1 - y0, 0), false, std::move(holes)};
}

// Wall in the plane x = const.
SurfacePatch face_x(std::string label, double x, double y0, double y1, double z0, double z1,
                    std::vector<Box> holes = {}) {
  return {std::move(label), Vec3(x, y0, z0), Vec3(0, y1 - y0, 0), Vec3(0, 0, z1 - z0), false, std::move(holes)};
}

// Wall in the plane y = const.
SurfacePatch face_y(std::string label, double y, double x0, double x1, double z0, double z1,
                    std::vector<Box> holes = {}) {
  return {std::move(label), Vec3(x0, y, z0), Vec3(x1 - x0, 0, 0), Vec3(0, 0, z1 - z0), false, std::move(holes)};
}

// Maps (along, lateral, z) to world for a flight running along x or y.
struct Axis {
  bool along_x;
  Vec3 at(double along, double lateral, double z) const {
    return along_x ? Vec3(along, lateral, z) : Vec3(lateral, along, z);
  }
  Vec2 xy(double along, double lateral) const { return at(along, lateral, 0).head<2>(); }
};

WalkableSurface inclined_surface(std::string label, PlaneKind kind, const Axis& ax, double dir, double a0,
                                 double a1, double lat0, double lat1, double z0, double z1) {
  WalkableSurface w;
  w.label = std::move(label);
  w.kind = kind;
  const Vec3 p0 = ax.at(a0, lat0, z0);
  const Vec3 slope = ax.at(a1, lat0, z1) - p0;
  const Vec3 lateral = ax.at(a0, lat1, z0) - p0;
  Vec3 n = slope.cross(lateral).normalized();
  if (n.z() < 0) n = -n;
  w.normal = n;
  w.point = 0.5 * (p0 + ax.at(a1, lat1, z1));
  w.footprint = {ax.xy(a0, lat0), ax.xy(a1, lat0), ax.xy(a1, lat1), ax.xy(a0, lat1)};
  (void)dir;
  return w;
}

struct Flight {
  WalkableSurface surface;
  Box solid;  // hides whatever it covers
};

// Steps starting with the first riser at `a0`, climbing in direction `dir`
// along the axis. The top riser is left to the structure above.
Flight add_stairs(std::vector<SurfacePatch>& out, const std::string& label, const Axis& ax, double dir, double a0,
                  double lat0, double lat1, double base, int treads) {
  for (int k = 0; k < treads; ++k) {
    const double front = a0 + dir * kRun * k;
    const double back = front + dir * kRun;
    const double z = base + kRise * (k + 1);
    const Vec3 o = ax.at(std::min(front, back), lat0, z);
    out.push_back({label + "_tread" + std::to_string(k), o, ax.at(kRun, 0, 0), ax.at(0, lat1 - lat0, 0), false, {}});
    out.push_back({label + "_riser" + std::to_string(k), ax.at(front, lat0, base + kRise * k), ax.at(0, lat1 - lat0, 0),
                   Vec3(0, 0, kRise), false, {}});
    for (double lat : {lat0, lat1}) {
      out.push_back({label + "_side" + std::to_string(k), ax.at(std::min(front, back), lat, base), ax.at(kRun, 0, 0),
                     Vec3(0, 0, z - base), false, {}});
    }
  }
  const double a1 = a0 + dir * kRun * treads;
  // Tread-center plane: first center one half run in at base + rise.
  const double c0 = a0 + dir * 0.5 * kRun;
  const double c1 = a0 + dir * (treads - 0.5) * kRun;
  WalkableSurface w = inclined_surface(label, PlaneKind::Stairs, ax, dir, c0, c1, lat0, lat1, base + kRise,
                                       base + kRise * treads);
  w.footprint = {ax.xy(a0, lat0), ax.xy(a1, lat0), ax.xy(a1, lat1), ax.xy(a0, lat1)};
  const Vec3 lo = ax.at(a0, lat0, base - 1.0);
  const Vec3 hi = ax.at(a1, lat1, base + kRise * treads);
  return {w, box(lo.x(), hi.x(), lo.y(), hi.y(), lo.z(), hi.z())};
}

// Solid wedge ramp from (a0, base) up to (a1, top).
Flight add_ramp(std::vector<SurfacePatch>& out, const std::string& label, const Axis& ax, double a0, double a1,
                double lat0, double lat1, double base, double top) {
  out.push_back({label, ax.at(a0, lat0, base), ax.at(a1 - a0, 0, top - base), ax.at(0, lat1 - lat0, 0), false, {}});
  for (double lat : {lat0, lat1}) {
    out.push_back({label + "_side", ax.at(a1, lat, base), ax.at(a0 - a1, 0, 0), Vec3(0, 0, top - base), true, {}});
  }
  const double dir = a1 > a0 ? 1.0 : -1.0;
  WalkableSurface w = inclined_surface(label, PlaneKind::Slope, ax, dir, a0, a1, lat0, lat1, base, top);
  const Vec3 lo = ax.at(a0, lat0, base - 1.0);
  const Vec3 hi = ax.at(a1, lat1, top);
  return {w, box(lo.x(), hi.x(), lo.y(), hi.y(), lo.z(), hi.z())};
}

WalkableSurface flat(std::string label, double x0, double x1, double y0, double y1, double z) {
  WalkableSurface w;
  w.label = std::move(label);
  w.kind = PlaneKind::Ground;
  w.normal = Vec3::UnitZ();
  w.point = Vec3(0.5 * (x0 + x1), 0.5 * (y0 + y1), z);
  w.footprint = {Vec2(x0, y0), Vec2(x1, y0), Vec2(x1, y1), Vec2(x0, y1)};
  return w;
}

constexpr double kTop1 = 6 * kRise;   // 1.02 m, one flight of six risers
constexpr double kTop2 = 12 * kRise;  // 2.04 m
const double kTan15 = std::tan(15.0 * std::numbers::pi / 180.0);
const double kTan20 = std::tan(20.0 * std::numbers::pi / 180.0);

void build_planes(Scene& s) {
  auto& p = s.patches;
  const Axis ax{true};
  const double ramp_start = 6.0 - kTop1 / kTan15;
  Flight ramp = add_ramp(p, "ramp", ax, ramp_start, 6.0, 0.6, 1.8, 0.0, kTop1);
  Flight st_a = add_stairs(p, "stairs_a", ax, 1.0, 4.6, 2.4, 3.6, 0.0, 5);
  Flight st_b = add_stairs(p, "stairs_b", ax, 1.0, 4.6, 4.4, 5.6, 0.0, 5);
  const Box platform = box(6.0, 10.0, 0.0, 6.0, -1.0, kTop1);
  p.push_back(horizontal("floor", 0, 10, 0, 6, 0, {platform, ramp.solid, st_a.solid, st_b.solid}));
  p.push_back(horizontal("platform", 6, 10, 0, 6, kTop1));
  p.push_back(face_x("platform_face", 6.0, 0, 6, 0, kTop1, {ramp.solid, st_a.solid, st_b.solid}));

  s.walkable = {flat("floor", 0, 6, 0, 6, 0), flat("platform", 6, 10, 0, 6, kTop1), ramp.surface, st_a.surface,
                st_b.surface};
  s.adjacency = {{0, 2}, {0, 3}, {0, 4}, {1, 2}, {1, 3}, {1, 4}};
  s.start = Vec3(1.0, 4.0, 0.0);
  s.goal = Vec3(8.5, 3.0, kTop1);
}

void build_platform(Scene& s) {
  auto& p = s.patches;
  const Axis ax{true};
  const double ramp_start = 3.6 - kTop1 / kTan20;
  Flight ramp = add_ramp(p, "ramp", ax, ramp_start, 3.6, 3.4, 4.6, 0.0, kTop1);
  // Descending east: the first riser of the climb (from the east floor) is at x = 7.8.
  Flight stairs = add_stairs(p, "stairs", ax, -1.0, 7.8, 3.4, 4.6, 0.0, 5);
  const Box block = box(3.6, 6.4, 3.0, 5.0, -1.0, kTop1);
  const double wall_h = 2.0;
  const Box wall_s = box(4.8, 5.2, 0.0, 3.0, -1.0, wall_h);
  const Box wall_n = box(4.8, 5.2, 5.0, 8.0, -1.0, wall_h);

  p.push_back(horizontal("floor_west", 0, 4.8, 0, 8, 0, {block, ramp.solid}));
  p.push_back(horizontal("floor_east", 5.2, 10, 0, 8, 0, {block, stairs.solid}));
  p.push_back(horizontal("platform", 3.6, 6.4, 3.0, 5.0, kTop1));
  p.push_back(face_x("block_west", 3.6, 3.0, 5.0, 0, kTop1, {ramp.solid}));
  p.push_back(face_x("block_east", 6.4, 3.0, 5.0, 0, kTop1, {stairs.solid}));
  p.push_back(face_y("block_south", 3.0, 3.6, 6.4, 0, kTop1, {wall_s}));
  p.push_back(face_y("block_north", 5.0, 3.6, 6.4, 0, kTop1, {wall_n}));
  for (double x : {4.8, 5.2}) {
    p.push_back(face_x("wall_s", x, 0.0, 3.0, 0, wall_h, {block}));
    p.push_back(face_x("wall_n", x, 5.0, 8.0, 0, wall_h, {block}));
  }
  p.push_back(face_y("wall_s_end", 3.0, 4.8, 5.2, kTop1, wall_h));
  p.push_back(face_y("wall_n_end", 5.0, 4.8, 5.2, kTop1, wall_h));

  s.walkable = {flat("floor_west", 0, 4.8, 0, 8, 0), flat("floor_east", 5.2, 10, 0, 8, 0),
                flat("platform", 3.6, 6.4, 3.0, 5.0, kTop1), ramp.surface, stairs.surface};
  s.adjacency = {{0, 3}, {2, 3}, {2, 4}, {1, 4}};
  s.start = Vec3(1.5, 1.5, 0.0);
  s.goal = Vec3(8.5, 6.5, 0.0);
}

void build_multilayer(Scene& s) {
  auto& p = s.patches;
  const Axis ay{false};
  const double ramp_start = 5.0 - kTop1 / kTan15;
  Flight ramp = add_ramp(p, "ramp", ay, ramp_start, 5.0, 1.0, 2.2, 0.0, kTop1);
  Flight st01 = add_stairs(p, "stairs_01", ay, 1.0, 3.6, 7.0, 8.2, 0.0, 5);
  Flight st12 = add_stairs(p, "stairs_12", ay, 1.0, 6.6, 4.4, 5.6, kTop1, 5);
  const Box l1 = box(0, 10, 5, 10, -1.0, kTop1);
  const Box l2 = box(0, 10, 8, 10, -1.0, kTop2);

  p.push_back(horizontal("level0", 0, 10, 0, 10, 0, {l1, ramp.solid, st01.solid}));
  p.push_back(horizontal("level1", 0, 10, 5, 10, kTop1, {l2, st12.solid}));
  p.push_back(horizontal("level2", 0, 10, 8, 10, kTop2));
  p.push_back(face_y("level1_face", 5.0, 0, 10, 0, kTop1, {ramp.solid, st01.solid}));
  p.push_back(face_y("level2_face", 8.0, 0, 10, kTop1, kTop2, {st12.solid}));

  s.walkable = {flat("level0", 0, 10, 0, 5, 0),    flat("level1", 0, 10, 5, 8, kTop1),
                flat("level2", 0, 10, 8, 10, kTop2), ramp.surface,
                st01.surface,                        st12.surface};
  s.adjacency = {{0, 3}, {1, 3}, {0, 4}, {1, 4}, {1, 5}, {2, 5}};
  s.start = Vec3(5.0, 1.0, 0.0);
  s.goal = Vec3(5.0, 9.2, kTop2);
}

void build_building(Scene& s) {
  auto& p = s.patches;
  const Axis ax{true};
  const double landing_z = 8 * kRise;   // 1.36
  const double upper_z = 16 * kRise;    // 2.72
  const double slab = 0.2;
  Flight f1 = add_stairs(p, "flight1", ax, 1.0, 6.0, 0.3, 1.5, 0.0, 7);
  const double landing_x0 = 6.0 + 7 * kRun;  // 7.96
  Flight f2 = add_stairs(p, "flight2", ax, -1.0, landing_x0, 1.8, 3.0, landing_z, 7);
  // Flight two is a solid block down to the ground floor.
  const Box f2_solid = box(6.0, landing_x0, 1.8, 3.0, -1.0, landing_z + 7 * kRise);
  const Box landing = box(landing_x0, 9.5, 0.3, 3.0, -1.0, landing_z);
  const Box partition = box(3.0, 3.2, 0.0, 5.0, -1.0, upper_z - slab);

  p.push_back(horizontal("floor0", 0, 10, 0, 8, 0, {f1.solid, f2_solid, landing, partition}));
  p.push_back(horizontal("floor1", 0, 6, 0, 8, upper_z));
  p.push_back(face_x("slab_edge", 6.0, 0, 8, upper_z - slab, upper_z, {f2_solid}));
  p.push_back(horizontal("landing", landing_x0, 9.5, 0.3, 3.0, landing_z));
  p.push_back(face_x("landing_east", 9.5, 0.3, 3.0, 0, landing_z));
  p.push_back(face_y("landing_south", 0.3, landing_x0, 9.5, 0, landing_z));
  p.push_back(face_y("landing_north", 3.0, landing_x0, 9.5, 0, landing_z));
  // The flight-one top riser rises against the landing front.
  p.push_back(face_x("landing_front", landing_x0, 0.3, 1.5, 7 * kRise, landing_z));
  p.push_back(face_x("landing_gap", landing_x0, 1.5, 1.8, 0, landing_z));
  // Flight two's support block: its walls below the steps are visible from the floor.
  for (double y : {1.8, 3.0}) {
    p.push_back(face_y("flight2_wall", y, 6.0, landing_x0, 0, landing_z, {f1.solid}));
  }
  p.push_back(face_x("flight2_wall_west", 6.0, 1.8, 3.0, 0, upper_z - slab));
  for (double x : {3.0, 3.2}) p.push_back(face_x("partition", x, 0, 5, 0, upper_z - slab));
  p.push_back(face_y("partition_end", 5.0, 3.0, 3.2, 0, upper_z - slab));

  s.walkable = {flat("floor0", 0, 10, 0, 8, 0), flat("floor1", 0, 6, 0, 8, upper_z), f1.surface,
                flat("landing", landing_x0, 9.5, 0.3, 3.0, landing_z), f2.surface};
  s.adjacency = {{0, 2}, {2, 3}, {3, 4}, {1, 4}};
  s.start = Vec3(1.0, 6.5, 0.0);
  s.goal = Vec3(2.0, 4.0, upper_z);
}

int surface_at(const Scene& s, const Vec3& p) {
  for (std::size_t i = 0; i < s.walkable.size(); ++i) {
    const auto& w = s.walkable[i];
    std::vector<Vec2> fp = w.footprint;
    if (std::abs(w.normal.dot(p - w.point)) > 0.2) continue;
    if (convex_hull(fp).contains(p.head<2>(), 1e-6)) return static_cast<int>(i);
  }
  return -1;
}

void validate_connectivity(const Scene& s) {
  const int a = surface_at(s, s.start);
  const int b = surface_at(s, s.goal);
  if (a < 0 || b < 0) throw Error(ErrorCode::DegenerateInput, "scene start/goal not on a walkable surface");
  std::vector<char> seen(s.walkable.size(), 0);
  std::queue<int> q;
  q.push(a);
  seen[a] = 1;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (auto [i, j] : s.adjacency) {
      const int v = i == u ? j : (j == u ? i : -1);
      if (v >= 0 && !seen[v]) {
        seen[v] = 1;
        q.push(v);
      }
    }
  }
  if (!seen[b]) throw Error(ErrorCode::DegenerateInput, "scene goal unreachable in ground truth");
}

}  // namespace

const std::vector<std::string>& scene_names() {
  static const std::vector<std::string> names{"planes", "platform", "multilayer", "building"};
  return names;
}

void sample_patches(const std::vector<SurfacePatch>& patches, double density, double noise_sigma,
                    std::uint64_t seed, PointCloud& cloud, std::vector<int>& labels) {
  if (!(density > 0.0)) throw Error(ErrorCode::ConfigError, "density must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t k = 0; k < patches.size(); ++k) {
    const auto& patch = patches[k];
    const auto count = static_cast<std::size_t>(std::llround(density * patch.area()));
    for (std::size_t i = 0; i < count; ++i) {
      double a = unit(rng);
      double b = unit(rng);
      const double nx = noise(rng), ny = noise(rng), nz = noise(rng);
      if (patch.triangle && a + b > 1.0) {
        a = 1.0 - a;
        b = 1.0 - b;
      }
      const Vec3 p = patch.origin + a * patch.u + b * patch.v;
      bool hidden = false;
      for (const auto& h : patch.holes) hidden = hidden || h.contains(p);
      if (hidden) continue;
      cloud.points.push_back(p + noise_sigma * Vec3(nx, ny, nz));
      labels.push_back(static_cast<int>(k));
    }
  }
}

Scene generate(const SceneSpec& spec) {
  Scene s;
  s.spec = spec;
  if (spec.name == "planes") {
    build_planes(s);
  } else if (spec.name == "platform") {
    build_platform(s);
  } else if (spec.name == "multilayer") {
    build_multilayer(s);
  } else if (spec.name == "building") {
    build_building(s);
  } else {
    throw Error(ErrorCode::ConfigError, "unknown scene '" + spec.name + "'");
  }
  validate_connectivity(s);
  sample_patches(s.patches, spec.density, spec.noise_sigma, spec.seed, s.cloud, s.labels);
  return s;
}

}  // namespace planeway
