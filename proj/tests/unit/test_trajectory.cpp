#include "oracles.hpp"
#include "planeway/error.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace planeway;

namespace {

SigmaState rest(double theta, double s) {
  SigmaState st;
  st.pos = Vec2(theta, s);
  return st;
}

SigmaState state_at(const SegmentCoeffs& c, double t) {
  SigmaState s;
  s.pos = eval_segment(c, t, 0);
  s.vel = eval_segment(c, t, 1);
  s.acc = eval_segment(c, t, 2);
  return s;
}

}  // namespace

TEST(Minco, SinglePieceIsMinimumJerkProfile) {
  MincoSolver m;
  m.solve(rest(0, 0), rest(0, 1), Eigen::Matrix2Xd(2, 0), Eigen::VectorXd::Ones(1));
  const SegmentCoeffs c = m.coeffs(0);
  const double expected[6] = {0, 0, 0, 10, -15, 6};
  for (int k = 0; k < 6; ++k) {
    EXPECT_NEAR(c(k, 0), 0.0, 1e-12);
    EXPECT_NEAR(c(k, 1), expected[k], 1e-9);
  }
}

TEST(Minco, SymmetricWaypointGivesTimeReversibleSpline) {
  MincoSolver m;
  Eigen::Matrix2Xd q(2, 1);
  q << 0.7, 1.0;
  m.solve(rest(0, 0), rest(0, 2), q, Eigen::VectorXd::Constant(2, 1.3));
  MsSpline sp;
  sp.coeffs = {m.coeffs(0), m.coeffs(1)};
  sp.durations = {1.3, 1.3};
  for (int k = 0; k <= 50; ++k) {
    const double t = 2.6 * k / 50.0;
    const Vec2 a = sp.eval(t, 0), b = sp.eval(2.6 - t, 0);
    EXPECT_NEAR(a.x(), b.x(), 1e-9);
    EXPECT_NEAR(a.y(), 2.0 - b.y(), 1e-9);
  }
}

TEST(Minco, RandomSplinesAreSmoothAndOptimal) {
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int M = 2 + trial % 5;
    Eigen::Matrix2Xd q = Eigen::Matrix2Xd::NullaryExpr(2, M - 1, [&] { return 2.0 * u(rng); });
    Eigen::VectorXd T = Eigen::VectorXd::NullaryExpr(M, [&] { return 0.5 + 0.4 * (u(rng) + 1.0); });
    SigmaState head = rest(u(rng), 0), tail = rest(u(rng), 3.0);
    head.vel = Vec2(u(rng), u(rng));
    MincoSolver m;
    m.solve(head, tail, q, T);

    // Interpolation and continuity up to the fourth derivative at the joints.
    for (int i = 0; i + 1 < M; ++i) {
      EXPECT_LT((eval_segment(m.coeffs(i), T(i), 0) - q.col(i)).norm(), 1e-9);
      for (int order = 0; order <= 4; ++order) {
        const Vec2 l = eval_segment(m.coeffs(i), T(i), order), r = eval_segment(m.coeffs(i + 1), 0.0, order);
        EXPECT_LT((l - r).norm(), 1e-8 * std::max(1.0, l.norm())) << "order " << order;
      }
    }

    double energy = 0.0;
    for (int i = 0; i < M; ++i) energy += pwtest::jerk_integral(m.coeffs(i), T(i));
    EXPECT_NEAR(m.jerk_energy(Vec2(1, 1)), energy, 1e-8 * std::max(1.0, energy));

    // Any other C2 spline through the same waypoints has at least this much jerk.
    for (int k = 0; k < 20; ++k) {
      std::vector<SigmaState> joints(M + 1);
      joints[0] = head;
      joints[M] = tail;
      for (int i = 1; i < M; ++i) {
        joints[i] = state_at(m.coeffs(i), 0.0);
        joints[i].vel += 0.1 * Vec2(u(rng), u(rng));
        joints[i].acc += 0.1 * Vec2(u(rng), u(rng));
      }
      double perturbed = 0.0;
      for (int i = 0; i < M; ++i) {
        perturbed += pwtest::jerk_integral(pwtest::quintic_hermite(joints[i], joints[i + 1], T(i)), T(i));
      }
      EXPECT_GE(perturbed, energy - 1e-9);
    }
  }
}

TEST(Minco, GradientPropagationMatchesFiniteDifferences) {
  std::mt19937 rng(32);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int M = 4;
  Eigen::Matrix2Xd q = Eigen::Matrix2Xd::NullaryExpr(2, M - 1, [&] { return u(rng); });
  Eigen::VectorXd T = Eigen::VectorXd::NullaryExpr(M, [&] { return 1.0 + 0.3 * u(rng); });
  const SigmaState head = rest(0.1, 0.0);
  SigmaState tail = rest(-0.2, 2.0);
  const Vec2 w(1.0, 2.0);
  auto energy = [&](const Eigen::Matrix2Xd& qq, const Eigen::VectorXd& TT, const Vec2& tp) {
    MincoSolver m;
    SigmaState tl = tail;
    tl.pos = tp;
    m.solve(head, tl, qq, TT);
    return m.jerk_energy(w);
  };
  MincoSolver m;
  m.solve(head, tail, q, T);
  Eigen::MatrixX2d gc = Eigen::MatrixX2d::Zero(6 * M, 2);
  Eigen::VectorXd gT = Eigen::VectorXd::Zero(M);
  m.add_jerk_gradient(w, gc, gT);
  Eigen::Matrix2Xd gq;
  Eigen::VectorXd gTt;
  Vec2 gtail;
  m.propagate(gc, gT, gq, gTt, gtail);
  const double h = 1e-6;
  for (int i = 0; i < q.size(); ++i) {
    Eigen::Matrix2Xd qp = q, qm = q;
    qp(i) += h;
    qm(i) -= h;
    const double fd = (energy(qp, T, tail.pos) - energy(qm, T, tail.pos)) / (2 * h);
    EXPECT_NEAR(gq(i), fd, 1e-5 * std::max(1.0, std::abs(fd)));
  }
  for (int i = 0; i < M; ++i) {
    Eigen::VectorXd Tp = T, Tm = T;
    Tp(i) += h;
    Tm(i) -= h;
    const double fd = (energy(q, Tp, tail.pos) - energy(q, Tm, tail.pos)) / (2 * h);
    EXPECT_NEAR(gTt(i), fd, 1e-5 * std::max(1.0, std::abs(fd)));
  }
  for (int i = 0; i < 2; ++i) {
    Vec2 tp = tail.pos, tm = tail.pos;
    tp(i) += h;
    tm(i) -= h;
    const double fd = (energy(q, T, tp) - energy(q, T, tm)) / (2 * h);
    EXPECT_NEAR(gtail(i), fd, 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST(TimeMap, BranchJunctionAndLimits) {
  EXPECT_EQ(time_from_tau(0.0), 1.0);
  EXPECT_GT(time_from_tau(-1e6), 0.0);
  EXPECT_LT(time_from_tau(-1e6), 1e-11);
  std::mt19937 rng(33);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const double tau = u(rng);
    EXPECT_NEAR(tau_from_time(time_from_tau(tau)), tau, 1e-10);
    const double h = 1e-6;
    EXPECT_NEAR(dtime_dtau(tau), (time_from_tau(tau + h) - time_from_tau(tau - h)) / (2 * h),
                1e-6 * std::max(1.0, dtime_dtau(tau)));
    EXPECT_GT(time_from_tau(tau + 1e-3), time_from_tau(tau));
  }
}

TEST(Integration, StraightLineIsExact) {
  SegmentCoeffs c = SegmentCoeffs::Zero();
  c(1, 1) = 1.0;  // s = t, theta = 0
  const auto traj = pwtest::single_part({c, c}, {1.0, 0.7}, Transform(), Vec2(0.3, -0.4), 16);
  for (double t : {0.0, 0.25, 1.0, 1.5, 1.7}) {
    const Vec2 p = traj.integrate_position(0, t);
    EXPECT_NEAR(p.x(), 0.3 + t, 1e-14);
    EXPECT_NEAR(p.y(), -0.4, 1e-14);
  }
}

TEST(Integration, CircularArc) {
  SegmentCoeffs c = SegmentCoeffs::Zero();
  c(1, 0) = 1.0;  // theta = t
  c(1, 1) = 1.0;  // s = t
  const auto traj = pwtest::single_part({c}, {1.0}, Transform(), Vec2::Zero(), 16);
  const Vec2 p = traj.integrate_position(0, 1.0);
  EXPECT_LT((p - Vec2(std::sin(1.0), 1.0 - std::cos(1.0))).norm(), 1e-6);
}

// With a constant heading the integrand is the quartic ds/dt, so the composite
// Simpson error is exactly T h^4 f/180 with f = 120 c5.
TEST(Integration, SimpsonErrorMatchesQuarticRemainder) {
  std::mt19937 rng(34);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    SegmentCoeffs c = SegmentCoeffs::Zero();
    const double heading = 3.0 * u(rng);
    c(0, 0) = heading;
    for (int k = 1; k < 6; ++k) c(k, 1) = 2.0 * u(rng);
    const double T = 0.8 + 0.5 * u(rng);
    const int n = 2 * (4 + trial % 8);
    const double h = T / n;
    double ds = 0.0;
    for (int k = 1; k < 6; ++k) ds += c(k, 1) * std::pow(T, k);
    const Vec2 exact = ds * Vec2(std::cos(heading), std::sin(heading));
    const Vec2 predicted = T * std::pow(h, 4) * 120.0 * c(5, 1) / 180.0 * Vec2(std::cos(heading), std::sin(heading));
    EXPECT_LT((simpson_displacement(c, T, 0.0, n) - exact - predicted).norm(), 1e-12) << trial;
  }
}

// Fourth-order convergence on full splines: halving h cuts the error ~16x.
TEST(Integration, SimpsonConvergesAtFourthOrder) {
  std::mt19937 rng(35);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int M = 1 + trial % 4;
    Eigen::Matrix2Xd q(2, M - 1);
    for (int i = 0; i < M - 1; ++i) q.col(i) = Vec2(u(rng), 0.5 * (i + 1) + 0.2 * u(rng));
    Eigen::VectorXd T = Eigen::VectorXd::NullaryExpr(M, [&] { return 0.6 + 0.3 * u(rng); });
    MincoSolver m;
    m.solve(rest(u(rng), 0), rest(u(rng), 0.5 * M), q, T);
    std::vector<SegmentCoeffs> cs;
    std::vector<double> ds;
    for (int i = 0; i < M; ++i) {
      cs.push_back(m.coeffs(i));
      ds.push_back(T(i));
    }
    const double t = T.sum();
    const Vec2 ref = pwtest::single_part(cs, ds, Transform(), Vec2::Zero(), 512).integrate_position(0, t);
    const double e16 = (pwtest::single_part(cs, ds, Transform(), Vec2::Zero(), 16).integrate_position(0, t) - ref).norm();
    const double e32 = (pwtest::single_part(cs, ds, Transform(), Vec2::Zero(), 32).integrate_position(0, t) - ref).norm();
    EXPECT_GT(e16 / e32, 12.0) << trial;
    EXPECT_LT(e16 / e32, 20.0) << trial;
  }
}

TEST(Integration, SegmentsAreAdditive) {
  SegmentCoeffs c1, c2;
  c1 << 0.1, 0.0, 0.5, 1.0, -0.3, 0.2, 0.05, -0.1, 0.0, 0.02, 0.0, 0.0;
  c2 << -0.2, 0.3, 0.1, 0.9, 0.2, 0.0, 0.0, 0.1, -0.05, 0.0, 0.0, 0.0;
  const auto traj = pwtest::single_part({c1, c2}, {1.0, 0.6}, Transform(), Vec2(1, 1), 64);
  const Vec2 sum = simpson_displacement(c1, 1.0, 0.0, 64) + simpson_displacement(c2, 0.6, 0.0, 64);
  EXPECT_LT((traj.integrate_position(0, 1.6) - Vec2(1, 1) - sum).norm(), 1e-12);
  EXPECT_LT((traj.integrate_position(0, 1.0) - Vec2(1, 1) - simpson_displacement(c1, 1.0, 0.0, 64)).norm(), 1e-12);
}

TEST(WorldState, LiftsOntoThePlane) {
  Transform ramp;
  const double a = 0.3;
  ramp.rotation.col(0) = Vec3(std::cos(a), 0, std::sin(a));
  ramp.rotation.col(2) = Vec3(-std::sin(a), 0, std::cos(a));
  ramp.rotation.col(1) = ramp.rotation.col(2).cross(ramp.rotation.col(0));
  ramp.translation = Vec3(1, 2, 0.5);
  SegmentCoeffs c = SegmentCoeffs::Zero();
  c(0, 0) = 0.4;
  c(1, 0) = 0.3;
  c(1, 1) = 0.8;
  auto traj = pwtest::single_part({c}, {2.0}, ramp, Vec2(-0.5, 0.25), 16);
  const WorldState s0 = traj.world_state(0.0);
  EXPECT_LT((s0.position - ramp.to_world(Vec2(-0.5, 0.25))).norm(), 1e-9);
  for (int k = 0; k <= 20; ++k) {
    const WorldState s = traj.world_state(0.1 * k);
    EXPECT_LT(std::abs(ramp.height(s.position)), 1e-12);
    EXPECT_NEAR(s.v, 0.8, 1e-12);
    EXPECT_NEAR(s.omega, 0.3, 1e-12);
  }
  EXPECT_THROW(traj.world_state(2.5), Error);
  EXPECT_THROW(traj.world_state(-0.1), Error);
}

TEST(Crossing, SigmoidParameterization) {
  Segment3D seg{Vec3(0, 0, 0), Vec3(2, 4, 1)};
  EXPECT_LT((crossing_point(0.0, seg) - Vec3(1, 2, 0.5)).norm(), 1e-15);
  EXPECT_LT((crossing_point(40.0, seg) - seg.b).norm(), 1e-12);
  for (double eta : {-2.0, 0.0, 3.0}) {
    const double h = 1e-6;
    const Vec3 fd = (crossing_point(eta + h, seg) - crossing_point(eta - h, seg)) / (2 * h);
    const Vec3 an = crossing_point_derivative(eta, seg);
    EXPECT_LT((fd - an).norm(), 1e-6 * an.norm());
  }
  EXPECT_GT(sigmoid(800.0), 0.0);
  EXPECT_LE(sigmoid(800.0), 1.0);
  EXPECT_GE(sigmoid(-800.0), 0.0);
}
