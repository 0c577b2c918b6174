#include "planeway/error.hpp"
#include "planeway/pipeline.hpp"
#include "planeway/scenes.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace planeway;

int main(int argc, char** argv) {
  CLI::App app{"Traversable-plane extraction and cross-plane trajectory planning"};
  app.require_subcommand(1);
  std::optional<std::string> config_path;
  app.add_option("--config", config_path, "RunConfig JSON");
  bool quiet = false;
  app.add_flag("--quiet", quiet, "Suppress stderr events");

  std::string scene_name = "planes", out;
  std::uint64_t seed = 7;
  SceneSpec defaults;
  double density = defaults.density, noise = defaults.noise_sigma;

  auto* gen = app.add_subcommand("gen-scene", "Write a synthetic scene cloud (PLY) and its ground truth (JSON)");
  gen->add_option("--name", scene_name)->required()->check(CLI::IsMember(scene_names()));
  gen->add_option("--seed", seed);
  gen->add_option("--density", density, "points per m^2")->check(CLI::PositiveNumber);
  gen->add_option("--noise", noise, "Gaussian noise sigma, m")->check(CLI::NonNegativeNumber);
  gen->add_option("--out", out, "output directory")->required();

  std::string cloud_path, planes_path, traj_path;
  auto* extract = app.add_subcommand("extract", "Extract traversable planes from a PLY/XYZ cloud");
  extract->add_option("--cloud", cloud_path)->required();
  extract->add_option("--out", out, "planes JSON")->required();

  std::string start_text, goal_text;
  std::optional<std::string> graph_path;
  double csv_rate = 100.0;
  auto* plan_cmd = app.add_subcommand("plan", "Search and optimize a trajectory between two points");
  plan_cmd->add_option("--planes", planes_path)->required();
  plan_cmd->add_option("--start", start_text, "x,y,z")->required();
  plan_cmd->add_option("--goal", goal_text, "x,y,z")->required();
  plan_cmd->add_option("--graph", graph_path, "graph JSON cache (read if present, written otherwise)");
  plan_cmd->add_option("--rate", csv_rate, "CSV sample rate, Hz")->check(CLI::PositiveNumber);
  plan_cmd->add_option("--out", out, "output directory")->required();

  std::optional<std::string> eval_out;
  auto* eval = app.add_subcommand("eval", "Check a trajectory densely against a plane file");
  eval->add_option("--traj", traj_path)->required();
  eval->add_option("--planes", planes_path)->required();
  eval->add_option("--out", eval_out, "also write the report here");

  auto* viz = app.add_subcommand("export-viz", "Write planes, links, graph and trajectory as one PLY");
  viz->add_option("--traj", traj_path)->required();
  viz->add_option("--planes", planes_path)->required();
  viz->add_option("--out", out, "PLY path")->required();

  auto* run = app.add_subcommand("run", "gen-scene, extract, plan and eval in one directory");
  run->add_option("--scene", scene_name)->required()->check(CLI::IsMember(scene_names()));
  run->add_option("--seed", seed);
  run->add_option("--density", density, "points per m^2")->check(CLI::PositiveNumber);
  run->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_code(ErrorCode::ConfigError);
  }

  const EventLog log(quiet ? nullptr : &std::cerr);
  RunConfig config;
  try {
    config = load_config(config_path);
  } catch (const Error& e) {
    log.event("error", 0.0, {{"command", "config"}, {"code", to_string(e.code())}, {"message", e.what()}});
    return exit_code(e.code());
  }

  if (*gen) return cmd_gen_scene(scene_name, seed, density, noise, out, log);
  if (*extract) return cmd_extract(cloud_path, config, out, log);
  if (*plan_cmd) {
    Vec3 start, goal;
    try {
      start = parse_point(start_text);
      goal = parse_point(goal_text);
    } catch (const Error& e) {
      log.event("error", 0.0, {{"command", "plan"}, {"code", to_string(e.code())}, {"message", e.what()}});
      return exit_code(e.code());
    }
    return cmd_plan(planes_path, start, goal, config, out, graph_path, csv_rate, log);
  }
  if (*eval) return cmd_eval(traj_path, planes_path, config, eval_out, std::cout, log);
  if (*viz) return cmd_export_viz(traj_path, planes_path, config, out, log);
  if (*run) return cmd_run(scene_name, seed, density, config, out, log);
  return 1;
}
