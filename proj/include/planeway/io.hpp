#pragma once

#include "planeway/config.hpp"
#include "planeway/extraction.hpp"
#include "planeway/graph.hpp"
#include "planeway/optimizer.hpp"
#include "planeway/scenes.hpp"
#include "planeway/trajectory.hpp"

#include <json.hpp>

#include <string>

namespace planeway {

using Json = nlohmann::json;

/// Whole file as a string; IoError when it cannot be opened.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

/// ASCII PLY with a vertex element carrying x, y, z. `name` prefixes diagnostics,
/// which carry the 1-based line and the byte offset of the offending line.
PointCloud parse_ply(const std::string& text, const std::string& name = "<ply>");
/// Whitespace-separated text, one point per line; '#' starts a comment.
PointCloud parse_xyz(const std::string& text, const std::string& name = "<xyz>");
/// PLY if the file starts with "ply", XYZ otherwise.
PointCloud read_cloud(const std::string& path);
std::string ply_cloud(const PointCloud& cloud, const std::string& comment = "");

/// Deterministic text: sorted keys, fixed-notation floats (shortest digits that
/// read back to the same double), scalar arrays on one line.
std::string dump_json(const Json& j);
Json parse_json(const std::string& text, const std::string& name = "<json>");

Json to_json(const RunConfig& config);
/// Missing keys keep their defaults; unknown keys and a wrong version are ConfigError.
RunConfig config_from_json(const Json& j);

Json to_json(const PlaneSet& set);
PlaneSet plane_set_from_json(const Json& j);

Json to_json(const PlaneGraph& graph);
PlaneGraph graph_from_json(const Json& j, const std::vector<TraversablePlane>& planes);

Json to_json(const CrossPlaneTrajectory& traj);
CrossPlaneTrajectory trajectory_from_json(const Json& j);

Json scene_truth_json(const Scene& scene);

/// Samples t, x, y, z, yaw, v, omega, plane at `rate` Hz (end point included).
std::string trajectory_csv(const CrossPlaneTrajectory& traj, double rate);
std::string convergence_csv(const std::vector<OuterLog>& log);

Json to_json(const DenseReport& report);

/// Arc length of the lifted trajectory from samples at `rate` Hz.
double trajectory_length(const CrossPlaneTrajectory& traj, double rate = 1000.0);

}  // namespace planeway
