#include "oracles.hpp"
#include "planeway/error.hpp"
#include "planeway/io.hpp"
#include "planeway/pipeline.hpp"

#include <gtest/gtest.h>

#include <string>

using namespace planeway;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::OutOfDomain;  // sentinel: nothing thrown
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

const char* kPly =
    "ply\n"
    "format ascii 1.0\n"
    "comment test\n"
    "element vertex 3\n"
    "property float x\n"
    "property float y\n"
    "property float z\n"
    "property uchar red\n"
    "element face 1\n"
    "property list uchar int vertex_indices\n"
    "end_header\n"
    "0 0 0 255\n"
    "1 0 0.5 0\n"
    "0 2 1 7\n"
    "3 0 1 2\n";

}  // namespace

TEST(Ply, ParsesVerticesAndSkipsOtherElements) {
  const PointCloud c = parse_ply(kPly);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c.points[1], Vec3(1, 0, 0.5));
  EXPECT_EQ(c.points[2], Vec3(0, 2, 1));
}

TEST(Ply, CorruptHeaderNamesLine) {
  std::string bad = kPly;
  bad.replace(bad.find("element vertex 3"), 16, "element vertex x");
  const std::string msg = message_of([&] { parse_ply(bad, "cloud.ply"); });
  EXPECT_NE(msg.find("cloud.ply:4:"), std::string::npos) << msg;
  EXPECT_EQ(code_of([&] { parse_ply(bad); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_ply("plx\n"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_ply("ply\nformat binary_little_endian 1.0\nend_header\n"); }), ErrorCode::ParseError);
}

TEST(Ply, ShortBodyAndMissingCoordinates) {
  std::string truncated = kPly;
  truncated = truncated.substr(0, truncated.find("0 2 1 7"));
  const std::string msg = message_of([&] { parse_ply(truncated, "t.ply"); });
  EXPECT_NE(msg.find("t.ply:"), std::string::npos);
  const std::string no_z =
      "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n1 2\n";
  EXPECT_EQ(code_of([&] { parse_ply(no_z); }), ErrorCode::ParseError);
  const std::string junk =
      "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 a 2\n";
  const std::string m2 = message_of([&] { parse_ply(junk, "j.ply"); });
  EXPECT_NE(m2.find("j.ply:8:"), std::string::npos) << m2;
}

TEST(Ply, WriterRoundTrip) {
  PointCloud c;
  c.points = {Vec3(0.125, -3.5, 2.0), Vec3(1e-7, 0, 4.25)};
  const PointCloud back = parse_ply(ply_cloud(c, "x"));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.points[0], c.points[0]);
  EXPECT_NEAR(back.points[1].x(), 0.0, 1e-6);
}

TEST(Xyz, CommentsAndErrors) {
  const PointCloud c = parse_xyz("# header\n1 2 3\n\n4 5 6 # trailing\n");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.points[1], Vec3(4, 5, 6));
  EXPECT_EQ(code_of([] { parse_xyz("1 2\n"); }), ErrorCode::ParseError);
}

TEST(Json, DumpIsCanonical) {
  Json j = {{"b", 0.1}, {"a", {1, 2, 3}}, {"c", -0.0}, {"d", 1e-7}};
  const std::string s = dump_json(j);
  EXPECT_LT(s.find("\"a\""), s.find("\"b\""));
  EXPECT_NE(s.find("0.1"), std::string::npos);
  EXPECT_EQ(s.find("e-"), std::string::npos);
  EXPECT_EQ(s.find("-0"), std::string::npos);
  EXPECT_EQ(parse_json(s)["d"].get<double>(), 1e-7);
  EXPECT_EQ(dump_json(parse_json(s)), s);
  const std::string msg = message_of([] { parse_json("{\n\"a\": [1,\n", "f.json"); });
  EXPECT_NE(msg.find("f.json"), std::string::npos);
}

TEST(Config, DefaultsRoundTrip) {
  const RunConfig def;
  const RunConfig back = config_from_json(to_json(def));
  EXPECT_EQ(dump_json(to_json(back)), dump_json(to_json(def)));
}

TEST(Config, PartialOverrides) {
  const RunConfig c = config_from_json(parse_json(R"({"version": 1, "robot": {"v_max": 0.5}})"));
  EXPECT_EQ(c.robot.v_max, 0.5);
  EXPECT_EQ(c.robot.d_s, RunConfig().robot.d_s);
}

TEST(Config, RejectsUnknownKeysAndVersions) {
  EXPECT_EQ(code_of([] { config_from_json(parse_json(R"({"version": 1, "robot": {"vmax": 1}})")); }),
            ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { config_from_json(parse_json(R"({"version": 2})")); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { config_from_json(parse_json(R"({"version": 1, "telemetry": {}})")); }),
            ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { config_from_json(parse_json(R"({"version": 1, "robot": {"v_max": -1}})")); }),
            ErrorCode::ConfigError);
}

TEST(PlanesJson, RoundTripIsByteIdentical) {
  const PlaneSet set = pwtest::extract_patches(pwtest::ramp_patches(15.0, true));
  const std::string text = dump_json(to_json(set));
  const PlaneSet back = plane_set_from_json(parse_json(text));
  EXPECT_EQ(dump_json(to_json(back)), text);
  ASSERT_EQ(back.traversable.size(), set.traversable.size());
  for (std::size_t i = 0; i < set.traversable.size(); ++i) {
    const auto& a = set.traversable[i];
    const auto& b = back.traversable[i];
    EXPECT_EQ(a.frame.rotation, b.frame.rotation);
    EXPECT_EQ(a.frame.translation, b.frame.translation);
    EXPECT_EQ(a.grid.states(), b.grid.states());
    EXPECT_EQ(a.grid.esdf_values(), b.grid.esdf_values());
    EXPECT_EQ(a.boundary.vertices(), b.boundary.vertices());
    ASSERT_EQ(a.neighbors.size(), b.neighbors.size());
    for (std::size_t k = 0; k < a.neighbors.size(); ++k) EXPECT_EQ(a.neighbors[k].segment.a, b.neighbors[k].segment.a);
  }
  // Planning on the loaded set gives the same graph.
  EXPECT_EQ(dump_json(to_json(build_graph(set.traversable, 0.15))),
            dump_json(to_json(build_graph(back.traversable, 0.15))));
}

TEST(PlanesJson, RejectsWrongFormat) {
  EXPECT_EQ(code_of([] { plane_set_from_json(parse_json(R"({"format": "other", "version": 1})")); }),
            ErrorCode::ParseError);
}

TEST(GraphJson, RoundTrip) {
  const PlaneSet set = pwtest::extract_patches(pwtest::ramp_patches(15.0, true));
  const PlaneGraph g = build_graph(set.traversable, 0.15);
  const std::string text = dump_json(to_json(g));
  const PlaneGraph back = graph_from_json(parse_json(text), set.traversable);
  EXPECT_EQ(dump_json(to_json(back)), text);
  ASSERT_EQ(back.vertices.size(), g.vertices.size());
  for (std::size_t i = 0; i < g.vertices.size(); ++i) {
    EXPECT_LT((back.vertices[i].local_a - g.vertices[i].local_a).norm(), 1e-12);
  }
}

TEST(TrajectoryJson, RoundTripIsExact) {
  const pwtest::ToyProblem toy = pwtest::two_plane_problem();
  const SolveResult r = solve_trajectory(toy.path, toy.set.traversable, toy.config.robot, toy.config.optimizer);
  const std::string text = dump_json(to_json(r.trajectory));
  const CrossPlaneTrajectory back = trajectory_from_json(parse_json(text));
  EXPECT_EQ(dump_json(to_json(back)), text);
  for (double t : {0.0, 0.37 * r.trajectory.duration(), r.trajectory.duration()}) {
    EXPECT_EQ(back.world_state(t).position, r.trajectory.world_state(t).position);
  }
  const std::string csv = trajectory_csv(back, 20.0);
  EXPECT_EQ(csv.rfind("t,x,y,z,yaw,v,omega,plane", 0), 0u);
  const double len = trajectory_length(back);
  EXPECT_GT(len, 0.9 * toy.path.cost);
  EXPECT_LT(len, 1.3 * toy.path.cost);
}

TEST(Pipeline, EvaluateFlagsInjectedFaults) {
  const pwtest::ToyProblem toy = pwtest::two_plane_problem();
  const SolveResult r = solve_trajectory(toy.path, toy.set.traversable, toy.config.robot, toy.config.optimizer);
  const Json clean = evaluate(r.trajectory, toy.set, toy.config);
  EXPECT_TRUE(clean["ok"].get<bool>()) << dump_json(clean);

  // Twice as fast along the same path: speeds exceed the limit.
  Json j = to_json(r.trajectory);
  for (auto& part : j["parts"]) {
    for (auto& seg : part["segments"]) {
      seg["T"] = seg["T"].get<double>() * 0.5;
      for (int k = 0; k < 6; ++k) {
        const double f = std::pow(2.0, k);
        seg["c_theta"][k] = seg["c_theta"][k].get<double>() * f;
        seg["c_s"][k] = seg["c_s"][k].get<double>() * f;
      }
    }
  }
  const Json fast = evaluate(trajectory_from_json(j), toy.set, toy.config);
  EXPECT_FALSE(fast["ok"].get<bool>());
  EXPECT_GT(fast["velocity"]["max"].get<double>(), 1e-3);
  EXPECT_GE(fast["velocity"]["t"].get<double>(), 0.0);
  bool listed = false;
  for (const auto& f : fast["failed"]) listed = listed || f.dump().find("velocity") != std::string::npos;
  EXPECT_TRUE(listed) << dump_json(fast["failed"]);

  // Same trajectory against planes that were shifted up: the surface check fails.
  PlaneSet shifted = toy.set;
  for (auto& p : shifted.traversable) p.frame.translation.z() += 0.05;
  const Json wrong = evaluate(r.trajectory, shifted, toy.config);
  EXPECT_FALSE(wrong["ok"].get<bool>());
  EXPECT_GT(wrong["surface_deviation"].get<double>(), 1e-6);
}
