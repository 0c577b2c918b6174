#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace planeway;

namespace {

GridMap free_grid(int w, int h, double res = 0.1) {
  GridMap g(res, Vec2(0, 0), w, h);
  for (auto& s : g.states()) s = CellState::Safe;
  return g;
}

}  // namespace

TEST(Esdf, SingleObstacleIsEuclideanDistance) {
  GridMap g = free_grid(30, 20);
  const int oi = 7, oj = 12;
  g.set_state(oi, oj, CellState::Occupied);
  compute_esdf(g);
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      if (x == oi && y == oj) {
        EXPECT_NEAR(g.esdf(x, y), -0.1, 1e-12);
      } else {
        EXPECT_NEAR(g.esdf(x, y), 0.1 * std::hypot(double(x - oi), double(y - oj)), 1e-12);
      }
    }
  }
}

TEST(Esdf, AllObstacleIsNonPositive) {
  GridMap g(0.1, Vec2(0, 0), 12, 9);
  compute_esdf(g);
  for (double v : g.esdf_values()) EXPECT_LE(v, 0.0);
}

TEST(Esdf, RandomGridsMatchBruteForce) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    GridMap g = pwtest::random_state_grid(rng, 25 + trial % 7, 20 + trial % 5, 0.05 + 0.04 * trial);
    compute_esdf(g);
    const auto oracle = pwtest::brute_force_esdf(g);
    for (std::size_t i = 0; i < oracle.size(); ++i) ASSERT_NEAR(g.esdf_values()[i], oracle[i], 1e-9) << i;
  }
}

TEST(Esdf, OverlapAndInterlineAreFree) {
  GridMap g = free_grid(10, 10);
  g.set_state(2, 2, CellState::Overlap);
  g.set_state(3, 3, CellState::Interline);
  g.set_state(8, 8, CellState::Boundary);
  compute_esdf(g);
  EXPECT_GT(g.esdf(2, 2), 0.0);
  EXPECT_GT(g.esdf(3, 3), 0.0);
  EXPECT_LT(g.esdf(8, 8), 0.0);
}

TEST(Esdf, AddingObstacleNeverIncreasesFreeDistance) {
  std::mt19937_64 rng(12);
  GridMap g = pwtest::random_state_grid(rng, 30, 30, 0.1);
  compute_esdf(g);
  const auto before = g.esdf_values();
  std::size_t added = 0;
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    if (!is_obstacle(g.states()[i])) {
      g.states()[i] = CellState::Occupied;
      added = i;
      break;
    }
  }
  compute_esdf(g);
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    if (i != added && !is_obstacle(g.states()[i])) {
      EXPECT_LE(g.esdf_values()[i], before[i]);
    }
  }
}

TEST(EsdfQuery, CellCenterReturnsCellValue) {
  std::mt19937_64 rng(13);
  GridMap g = pwtest::random_state_grid(rng, 15, 15, 0.3);
  compute_esdf(g);
  for (int y = 0; y < 15; ++y)
    for (int x = 0; x < 15; ++x) EXPECT_NEAR(query_esdf(g, g.cell_center(x, y)).value, g.esdf(x, y), 1e-12);
}

TEST(EsdfQuery, MidpointIsLinear) {
  GridMap g = free_grid(4, 4);
  g.esdf_values().assign(g.cell_count(), 0.0);
  g.esdf_values()[g.index(1, 1)] = 0.2;
  g.esdf_values()[g.index(2, 1)] = 0.4;
  const Vec2 mid = 0.5 * (g.cell_center(1, 1) + g.cell_center(2, 1));
  EXPECT_NEAR(query_esdf(g, mid).value, 0.3, 1e-12);
}

TEST(EsdfQuery, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(14);
  GridMap g = pwtest::random_state_grid(rng, 40, 40, 0.2);
  compute_esdf(g);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double h = 1e-4;
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    // Stay away from cell-center lines where the bilinear patch has kinks.
    const int cx = 1 + static_cast<int>(rng() % 37), cy = 1 + static_cast<int>(rng() % 37);
    const Vec2 p = g.cell_center(cx, cy) + g.resolution() * Vec2(0.01 + 0.98 * u(rng), 0.01 + 0.98 * u(rng));
    const Vec2 grad = query_esdf(g, p).gradient;
    const double fx = (query_esdf(g, p + Vec2(h, 0)).value - query_esdf(g, p - Vec2(h, 0)).value) / (2 * h);
    const double fy = (query_esdf(g, p + Vec2(0, h)).value - query_esdf(g, p - Vec2(0, h)).value) / (2 * h);
    worst = std::max({worst, std::abs(fx - grad.x()), std::abs(fy - grad.y())});
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(EsdfQuery, OutsideGridPullsBack) {
  GridMap g = free_grid(10, 10);
  g.set_state(0, 0, CellState::Occupied);
  compute_esdf(g);
  const Vec2 out(2.0, 0.5);  // beyond the +x border
  const auto s = query_esdf(g, out);
  EXPECT_LT(s.gradient.x(), 0.0);
  EXPECT_LT(s.value, query_esdf(g, Vec2(0.95, 0.5)).value);
}

TEST(GridMap, StateCodesRoundTrip) {
  for (CellState s : {CellState::Unknown, CellState::Safe, CellState::Interline, CellState::Overlap,
                      CellState::Boundary, CellState::Occupied}) {
    EXPECT_EQ(state_from_code(state_code(s)), s);
  }
  EXPECT_FALSE(state_from_code('?').has_value());
}
