#include "oracles.hpp"
#include "planeway/error.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace planeway;

TEST(Scenes, Deterministic) {
  SceneSpec spec;
  spec.name = "planes";
  spec.seed = 7;
  const Scene a = generate(spec), b = generate(spec);
  ASSERT_EQ(a.cloud.size(), b.cloud.size());
  for (std::size_t i = 0; i < a.cloud.size(); ++i) ASSERT_EQ(a.cloud.points[i], b.cloud.points[i]);
  spec.seed = 8;
  const Scene c = generate(spec);
  EXPECT_NE(a.cloud.points[0], c.cloud.points[0]);
}

TEST(Scenes, DensityCount) {
  PointCloud cloud;
  std::vector<int> labels;
  sample_patches({{"floor", Vec3(0, 0, 0), Vec3(4, 0, 0), Vec3(0, 4, 0), false, {}}}, 400.0, 0.0, 1, cloud, labels);
  EXPECT_NEAR(static_cast<double>(cloud.size()), 6400.0, 3.0 * std::sqrt(6400.0));
  EXPECT_EQ(labels.size(), cloud.size());
}

TEST(Scenes, NoiseRms) {
  PointCloud cloud;
  std::vector<int> labels;
  const double t = std::tan(0.3);
  sample_patches({{"ramp", Vec3(0, 0, 0), Vec3(3, 0, 3 * t), Vec3(0, 3, 0), false, {}}}, 2000.0, 0.01, 2, cloud,
                 labels);
  const Vec3 n = Vec3(-t, 0, 1).normalized();
  double sq = 0.0;
  for (const Vec3& p : cloud.points) sq += std::pow(n.dot(p), 2);
  EXPECT_NEAR(std::sqrt(sq / cloud.size()), 0.01, 0.001);
}

TEST(Scenes, HolesDropSamples) {
  PointCloud cloud;
  std::vector<int> labels;
  SurfacePatch p{"floor", Vec3(0, 0, 0), Vec3(2, 0, 0), Vec3(0, 2, 0), false, {}};
  p.holes.push_back(Eigen::AlignedBox3d(Vec3(0, 0, -1), Vec3(1, 2, 1)));
  sample_patches({p}, 1000.0, 0.0, 3, cloud, labels);
  for (const Vec3& q : cloud.points) EXPECT_GE(q.x(), 1.0);
  EXPECT_NEAR(static_cast<double>(cloud.size()), 2000.0, 200.0);
}

TEST(Scenes, AllNamedScenesAreConsistent) {
  for (const std::string& name : scene_names()) {
    SceneSpec spec;
    spec.name = name;
    spec.density = 100.0;
    const Scene s = generate(spec);
    EXPECT_FALSE(s.walkable.empty()) << name;
    EXPECT_EQ(s.labels.size(), s.cloud.size());
    for (const auto& [a, b] : s.adjacency) {
      EXPECT_LT(a, b);
      EXPECT_LT(b, static_cast<int>(s.walkable.size()));
    }
    for (const auto& w : s.walkable) {
      EXPECT_NEAR(w.normal.norm(), 1.0, 1e-12);
      EXPECT_GT(w.normal.z(), 0.0);
    }
  }
  EXPECT_EQ(scene_names().size(), 4u);
}

TEST(Scenes, UnknownNameIsConfigError) {
  SceneSpec spec;
  spec.name = "castle";
  try {
    generate(spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
  }
}
