#include "planeway/pipeline.hpp"

#include "planeway/error.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace planeway {
namespace {

namespace fs = std::filesystem;

Json residual_json(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::IoError, "cannot create directory '" + dir + "'");
}

std::string join(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

PlaneSet load_planes(const std::string& path) { return plane_set_from_json(parse_json(read_file(path), path)); }

CrossPlaneTrajectory load_trajectory(const std::string& path) {
  return trajectory_from_json(parse_json(read_file(path), path));
}

// Runs a command body, turning library errors into exit codes and an error event.
template <class F>
int guarded(const EventLog& log, const char* command, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    log.event("error", 0.0, {{"command", command}, {"code", to_string(e.code())}, {"message", e.what()}});
    return exit_code(e.code());
  } catch (const std::exception& e) {
    log.event("error", 0.0, {{"command", command}, {"code", "Internal"}, {"message", e.what()}});
    return 1;
  }
}

struct PlyWriter {
  struct Vertex {
    Vec3 p;
    int r, g, b;
  };
  std::vector<Vertex> vertices;
  std::vector<std::vector<int>> faces;
  std::vector<std::pair<int, int>> edges;
  std::vector<std::string> comments;

  int add(const Vec3& p, int r, int g, int b) {
    vertices.push_back({p, r, g, b});
    return static_cast<int>(vertices.size()) - 1;
  }
  void polyline(const std::vector<Vec3>& pts, int r, int g, int b) {
    int prev = -1;
    for (const Vec3& p : pts) {
      const int id = add(p, r, g, b);
      if (prev >= 0) edges.emplace_back(prev, id);
      prev = id;
    }
  }
  std::string str() const {
    std::string out = "ply\nformat ascii 1.0\n";
    for (const auto& c : comments) out += "comment " + c + "\n";
    out += "element vertex " + std::to_string(vertices.size()) + "\n";
    out += "property float x\nproperty float y\nproperty float z\n";
    out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    out += "element face " + std::to_string(faces.size()) + "\nproperty list uchar int vertex_indices\n";
    out += "element edge " + std::to_string(edges.size()) + "\nproperty int vertex1\nproperty int vertex2\n";
    out += "end_header\n";
    char buf[160];
    for (const Vertex& v : vertices) {
      std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f %d %d %d\n", v.p.x() + 0.0, v.p.y() + 0.0, v.p.z() + 0.0, v.r,
                    v.g, v.b);
      out += buf;
    }
    for (const auto& f : faces) {
      out += std::to_string(f.size());
      for (int i : f) out += " " + std::to_string(i);
      out += "\n";
    }
    for (const auto& [a, b] : edges) out += std::to_string(a) + " " + std::to_string(b) + "\n";
    return out;
  }
};

}  // namespace

void EventLog::event(const std::string& stage, double ms, const Json& detail) const {
  if (!out_) return;
  const Json line = {{"stage", stage}, {"ms", std::round(ms * 1000.0) / 1000.0}, {"detail", detail}};
  *out_ << line.dump() << "\n";
  out_->flush();
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError:
    case ErrorCode::IoError:
      return 2;
    case ErrorCode::EmptyCloud:
    case ErrorCode::NoTraversablePlane:
    case ErrorCode::NoPlaneNearStart:
    case ErrorCode::NoPlaneNearGoal:
    case ErrorCode::Unreachable:
    case ErrorCode::InfeasibleInit:
      return 3;
    case ErrorCode::ConfigError:
      return 5;
    default:
      return 1;
  }
}

RunConfig load_config(const std::optional<std::string>& path) {
  if (!path) return RunConfig{};
  Json j;
  try {
    j = parse_json(read_file(*path), *path);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError) throw Error(ErrorCode::ConfigError, e.what());
    throw;
  }
  return config_from_json(j);
}

Vec3 parse_point(const std::string& text) {
  std::stringstream ss(text);
  std::string item;
  std::vector<double> v;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, "point '" + text + "' is not x,y,z");
    }
  }
  if (v.size() != 3) throw Error(ErrorCode::ConfigError, "point '" + text + "' is not x,y,z");
  return Vec3(v[0], v[1], v[2]);
}

Json PlanOutcome::report() const {
  const DenseReport& c = solve.check;
  return {{"path_search_ms", graph_ms + search_ms},
          {"graph_build_ms", graph_ms},
          {"search_ms", search_ms},
          {"optimize_ms", optimize_ms},
          {"traj_length_m", traj_length},
          {"path_cost_m", path.cost},
          {"final_error_m", solve.final_error},
          {"converged", solve.converged},
          {"constraints_ok", solve.constraints_ok},
          {"duration_s", solve.trajectory.duration()},
          {"planes", path.planes},
          {"outer_iterations", solve.log.size()},
          {"initial_cost", solve.initial_cost},
          {"final_cost", solve.final_cost},
          {"max_residuals",
           {{"velocity", residual_json(c.max_velocity)},
            {"moment", residual_json(c.max_moment)},
            {"orientation", residual_json(c.max_orientation)},
            {"safety", residual_json(c.max_safety)}}}};
}

PlanOutcome plan(const PlaneSet& planes, const Vec3& start, const Vec3& goal, const RunConfig& config,
                 const PlaneGraph* cached_graph, const EventLog& log) {
  PlanOutcome out;
  Stopwatch sw;
  out.graph = cached_graph ? *cached_graph : build_graph(planes.traversable, config.robot.d_s);
  out.graph_ms = sw.ms();
  log.event("graph", out.graph_ms,
            {{"vertices", out.graph.vertices.size()}, {"edges", out.graph.edges.size()}, {"cached", cached_graph != nullptr}});

  Stopwatch search;
  out.path = search_path(out.graph, planes.traversable, start, goal, config.graph, config.robot.d_s);
  out.search_ms = search.ms();
  log.event("search", out.search_ms, {{"cost", out.path.cost}, {"planes", out.path.planes}});

  Stopwatch opt;
  out.solve = solve_trajectory(out.path, planes.traversable, config.robot, config.optimizer);
  out.optimize_ms = opt.ms();
  log.event("optimize", out.optimize_ms,
            {{"converged", out.solve.converged},
             {"constraints_ok", out.solve.constraints_ok},
             {"final_error_m", out.solve.final_error},
             {"outer_iterations", out.solve.log.size()}});
  out.traj_length = trajectory_length(out.solve.trajectory, 1000.0);
  return out;
}

Json evaluate(const CrossPlaneTrajectory& traj, const PlaneSet& planes, const RunConfig& config) {
  const int n = static_cast<int>(planes.traversable.size());
  for (const TrajectoryPart& p : traj.parts) {
    if (p.plane < 0 || p.plane >= n) {
      throw Error(ErrorCode::ParseError, "trajectory uses plane " + std::to_string(p.plane) + " missing from the plane file");
    }
  }
  const OptimizerConfig& oc = config.optimizer;
  const DenseReport r = dense_check(traj, planes.traversable, config.robot, oc.check_rate);
  constexpr double kContinuityTol = 1e-6;
  constexpr double kSurfaceTol = 1e-6;
  Json failed = Json::array();
  auto flag = [&](const char* name, double value, double tol) {
    if (std::isfinite(value) && value > tol) failed.push_back(name);
  };
  flag("velocity", r.max_velocity, oc.tol_cons);
  flag("moment", r.max_moment, oc.tol_cons);
  flag("orientation", r.max_orientation, oc.tol_cons);
  flag("safety", r.max_safety, oc.tol_cons);
  flag("joint_gap", r.joint_gap, kContinuityTol);
  flag("crossing_rate_gap", r.crossing_rate_gap, kContinuityTol);
  flag("crossing_gap", r.crossing_gap, oc.e_max);
  flag("surface_deviation", r.surface_deviation, kSurfaceTol);
  Json j = to_json(r);
  j["failed"] = failed;
  j["ok"] = failed.empty();
  j["duration_s"] = traj.duration();
  j["length_m"] = trajectory_length(traj, oc.check_rate);
  j["rate_hz"] = oc.check_rate;
  j["tolerances"] = {{"residual", oc.tol_cons},
                     {"continuity", kContinuityTol},
                     {"crossing_gap", oc.e_max},
                     {"surface_deviation", kSurfaceTol}};
  return j;
}

std::string viz_ply(const PlaneSet& planes, const PlaneGraph& graph, const CrossPlaneTrajectory* traj) {
  PlyWriter w;
  int links = 0;
  for (const TraversablePlane& p : planes.traversable) {
    int r = 170, g = 170, b = 170;
    if (p.kind == PlaneKind::Slope) r = 230, g = 150, b = 60;
    if (p.kind == PlaneKind::Stairs) r = 70, g = 120, b = 220;
    std::vector<int> face;
    for (const Vec2& v : p.boundary.vertices()) face.push_back(w.add(p.frame.to_world(v), r, g, b));
    w.faces.push_back(face);
    for (const PlaneLink& l : p.neighbors) {
      if (l.plane < p.id) continue;
      w.polyline({l.segment.a, l.segment.b}, 220, 40, 40);
      ++links;
    }
  }
  for (const GraphEdge& e : graph.edges) {
    std::vector<Vec3> pts;
    for (const Vec2& q : e.polyline) pts.push_back(planes.traversable.at(e.plane).frame.to_world(q));
    w.polyline(pts, 40, 200, 60);
  }
  if (traj) {
    std::vector<Vec3> pts;
    const double total = traj->duration();
    const int n = std::max(1, static_cast<int>(std::ceil(total * 20.0)));
    for (int k = 0; k <= n; ++k) pts.push_back(traj->world_state(total * k / n).position);
    w.polyline(pts, 200, 40, 200);
  }
  w.comments = {"planeway visualization", "plane_meshes " + std::to_string(planes.traversable.size()),
                "interlines " + std::to_string(links), "graph_edges " + std::to_string(graph.edges.size()),
                "trajectories " + std::to_string(traj ? 1 : 0)};
  return w.str();
}

int cmd_gen_scene(const std::string& name, std::uint64_t seed, double density, double noise,
                  const std::string& out_dir, const EventLog& log) {
  return guarded(log, "gen-scene", [&] {
    Stopwatch sw;
    SceneSpec spec;
    spec.name = name;
    spec.seed = seed;
    spec.density = density;
    spec.noise_sigma = noise;
    const Scene scene = generate(spec);
    log.event("generate", sw.ms(), {{"scene", name}, {"points", scene.cloud.size()}});
    ensure_dir(out_dir);
    Stopwatch io;
    write_file(join(out_dir, name + ".ply"),
               ply_cloud(scene.cloud, "planeway scene " + name + " seed " + std::to_string(seed)));
    write_file(join(out_dir, name + ".truth.json"), dump_json(scene_truth_json(scene)));
    log.event("write", io.ms(), {{"dir", out_dir}});
    return 0;
  });
}

int cmd_extract(const std::string& cloud_path, const RunConfig& config, const std::string& out_path,
                const EventLog& log) {
  return guarded(log, "extract", [&] {
    Stopwatch sw;
    const PointCloud cloud = read_cloud(cloud_path);
    log.event("read", sw.ms(), {{"points", cloud.size()}});
    StageTimings timings;
    const PlaneSet set = extract_traversable_planes(cloud, config, &timings);
    for (const auto& [stage, ms] : timings) log.event(stage, ms);
    Stopwatch io;
    const std::string text = dump_json(to_json(set));
    write_file(out_path, text);
    log.event("write", io.ms(), {{"traversable", set.traversable.size()}, {"vertical", set.vertical.size()}, {"bytes", text.size()}});
    return 0;
  });
}

int cmd_plan(const std::string& planes_path, const Vec3& start, const Vec3& goal, const RunConfig& config,
             const std::string& out_dir, const std::optional<std::string>& graph_path, double csv_rate,
             const EventLog& log) {
  return guarded(log, "plan", [&] {
    Stopwatch sw;
    const PlaneSet planes = load_planes(planes_path);
    std::optional<PlaneGraph> cached;
    if (graph_path && fs::exists(*graph_path)) {
      cached = graph_from_json(parse_json(read_file(*graph_path), *graph_path), planes.traversable);
    }
    log.event("load", sw.ms(), {{"planes", planes.traversable.size()}, {"graph_cached", cached.has_value()}});
    const PlanOutcome out = plan(planes, start, goal, config, cached ? &*cached : nullptr, log);
    ensure_dir(out_dir);
    Stopwatch io;
    write_file(join(out_dir, "trajectory.json"), dump_json(to_json(out.solve.trajectory)));
    write_file(join(out_dir, "trajectory.csv"), trajectory_csv(out.solve.trajectory, csv_rate));
    write_file(join(out_dir, "convergence.csv"), convergence_csv(out.solve.log));
    write_file(join(out_dir, "report.json"), dump_json(out.report()));
    const std::string graph_out = graph_path ? *graph_path : join(out_dir, "graph.json");
    if (!cached) write_file(graph_out, dump_json(to_json(out.graph)));
    log.event("write", io.ms(), {{"dir", out_dir}});
    return out.solve.converged ? 0 : kExitMaxIterations;
  });
}

int cmd_eval(const std::string& traj_path, const std::string& planes_path, const RunConfig& config,
             const std::optional<std::string>& out_path, std::ostream& out, const EventLog& log) {
  return guarded(log, "eval", [&] {
    Stopwatch sw;
    const CrossPlaneTrajectory traj = load_trajectory(traj_path);
    const PlaneSet planes = load_planes(planes_path);
    const Json report = evaluate(traj, planes, config);
    log.event("eval", sw.ms(), {{"ok", report["ok"]}, {"failed", report["failed"]}});
    const std::string text = dump_json(report);
    if (out_path) write_file(*out_path, text);
    out << text;
    return 0;
  });
}

int cmd_export_viz(const std::string& traj_path, const std::string& planes_path, const RunConfig& config,
                   const std::string& out_path, const EventLog& log) {
  return guarded(log, "export-viz", [&] {
    Stopwatch sw;
    const PlaneSet planes = load_planes(planes_path);
    const CrossPlaneTrajectory traj = load_trajectory(traj_path);
    const PlaneGraph graph = build_graph(planes.traversable, config.robot.d_s);
    write_file(out_path, viz_ply(planes, graph, &traj));
    log.event("export", sw.ms(), {{"out", out_path}});
    return 0;
  });
}

int cmd_run(const std::string& scene, std::uint64_t seed, double density, const RunConfig& config,
            const std::string& out_dir, const EventLog& log) {
  SceneSpec spec;
  const int gen = cmd_gen_scene(scene, seed, density, spec.noise_sigma, out_dir, log);
  if (gen != 0) return gen;
  const std::string planes_path = join(out_dir, "planes.json");
  const int ext = cmd_extract(join(out_dir, scene + ".ply"), config, planes_path, log);
  if (ext != 0) return ext;
  Vec3 start, goal;
  const int q = guarded(log, "run", [&] {
    const Json truth = parse_json(read_file(join(out_dir, scene + ".truth.json")));
    start = Vec3(truth["start"][0].get<double>(), truth["start"][1].get<double>(), truth["start"][2].get<double>());
    goal = Vec3(truth["goal"][0].get<double>(), truth["goal"][1].get<double>(), truth["goal"][2].get<double>());
    return 0;
  });
  if (q != 0) return q;
  const int pl = cmd_plan(planes_path, start, goal, config, out_dir, std::nullopt, 100.0, log);
  if (pl != 0 && pl != kExitMaxIterations) return pl;
  std::ostringstream sink;
  const int ev = cmd_eval(join(out_dir, "trajectory.json"), planes_path, config, join(out_dir, "eval.json"), sink, log);
  return ev != 0 ? ev : pl;
}

}  // namespace planeway
