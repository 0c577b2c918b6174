#pragma once

#include "planeway/error.hpp"
#include "planeway/io.hpp"

#include <chrono>
#include <optional>
#include <ostream>
#include <string>

namespace planeway {

/// Line-delimited JSON events {stage, ms, detail}; silent without a stream.
class EventLog {
 public:
  explicit EventLog(std::ostream* out = nullptr) : out_(out) {}
  void event(const std::string& stage, double ms, const Json& detail = Json::object()) const;

 private:
  std::ostream* out_;
};

class Stopwatch {
 public:
  Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
  double ms() const { return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_;
};

/// 2 for input/output, 3 for infeasible planning, 5 for configuration, 1 otherwise.
int exit_code(ErrorCode code);
constexpr int kExitMaxIterations = 4;

RunConfig load_config(const std::optional<std::string>& path);

struct PlanOutcome {
  PlaneGraph graph;
  PathResult path;
  SolveResult solve;
  double graph_ms = 0.0;
  double search_ms = 0.0;
  double optimize_ms = 0.0;
  double traj_length = 0.0;

  /// {path_search_ms, optimize_ms, traj_length_m, max_residuals, final_error_m, ...}
  Json report() const;
};

/// Graph (unless one is given), search and optimization. Throws the planning errors.
PlanOutcome plan(const PlaneSet& planes, const Vec3& start, const Vec3& goal, const RunConfig& config,
                 const PlaneGraph* cached_graph = nullptr, const EventLog& log = EventLog());

/// Dense verification against a plane file: residual maxima with timestamps,
/// continuity gaps, surface deviation and the list of checks that failed.
Json evaluate(const CrossPlaneTrajectory& traj, const PlaneSet& planes, const RunConfig& config);

/// Plane boundary faces, link segments, graph polylines and the trajectory as one PLY.
std::string viz_ply(const PlaneSet& planes, const PlaneGraph& graph, const CrossPlaneTrajectory* traj);

// File-level commands used by the executable. Each returns the process exit code.
int cmd_gen_scene(const std::string& name, std::uint64_t seed, double density, double noise,
                  const std::string& out_dir, const EventLog& log);
int cmd_extract(const std::string& cloud_path, const RunConfig& config, const std::string& out_path,
                const EventLog& log);
int cmd_plan(const std::string& planes_path, const Vec3& start, const Vec3& goal, const RunConfig& config,
             const std::string& out_dir, const std::optional<std::string>& graph_path, double csv_rate,
             const EventLog& log);
int cmd_eval(const std::string& traj_path, const std::string& planes_path, const RunConfig& config,
             const std::optional<std::string>& out_path, std::ostream& out, const EventLog& log);
int cmd_export_viz(const std::string& traj_path, const std::string& planes_path, const RunConfig& config,
                   const std::string& out_path, const EventLog& log);
/// gen-scene, extract, plan and eval in one directory.
int cmd_run(const std::string& scene, std::uint64_t seed, double density, const RunConfig& config,
            const std::string& out_dir, const EventLog& log);

/// "x,y,z" -> point; ConfigError otherwise.
Vec3 parse_point(const std::string& text);

}  // namespace planeway
