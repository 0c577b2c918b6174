#include "planeway/trajectory.hpp"

#include "planeway/error.hpp"

#include <algorithm>
#include <cmath>

namespace planeway {
namespace {

constexpr int kBand = 6;

// k! / (k - d)! t^(k - d), the d-th derivative of t^k.
double basis_derivative(int k, int d, double t) {
  if (k < d) return 0.0;
  double f = 1.0;
  for (int m = 0; m < d; ++m) f *= (k - m);
  return f * std::pow(t, k - d);
}

}  // namespace

double time_from_tau(double tau) {
  if (tau > 0.0) return (0.5 * tau + 1.0) * tau + 1.0;
  return 2.0 / ((tau - 2.0) * tau + 2.0);
}

double tau_from_time(double T) {
  if (T >= 1.0) return std::sqrt(2.0 * T - 1.0) - 1.0;
  return 1.0 - std::sqrt(2.0 / T - 1.0);
}

double dtime_dtau(double tau) {
  if (tau > 0.0) return tau + 1.0;
  const double den = (tau - 2.0) * tau + 2.0;
  return 4.0 * (1.0 - tau) / (den * den);
}

Vec2 eval_segment(const SegmentCoeffs& c, double t, int order) {
  // Horner on the differentiated coefficients.
  Vec2 out = Vec2::Zero();
  for (int k = 5; k >= order; --k) {
    double f = 1.0;
    for (int m = 0; m < order; ++m) f *= (k - m);
    out = out * t + f * c.row(k).transpose();
  }
  return out;
}

void MincoSolver::build_matrix() {
  const int m = pieces();
  n_ = 6 * m;
  band_.assign(static_cast<std::size_t>(2 * kBand + 1) * n_, 0.0);
  at(0, 0) = 1.0;
  at(1, 1) = 1.0;
  at(2, 2) = 2.0;
  for (int i = 0; i < m - 1; ++i) {
    const double T = durations_(i);
    const int r = 6 * i + 3, c = 6 * i, cn = 6 * (i + 1);
    const int orders[6] = {3, 4, 0, 0, 1, 2};
    for (int row = 0; row < 6; ++row) {
      for (int k = orders[row]; k < 6; ++k) at(r + row, c + k) = basis_derivative(k, orders[row], T);
    }
    at(r + 0, cn + 3) = -6.0;
    at(r + 1, cn + 4) = -24.0;
    at(r + 3, cn + 0) = -1.0;
    at(r + 4, cn + 1) = -1.0;
    at(r + 5, cn + 2) = -2.0;
  }
  const double T = durations_(m - 1);
  const int r = n_ - 3, c = n_ - 6;
  for (int d = 0; d < 3; ++d) {
    for (int k = d; k < 6; ++k) at(r + d, c + k) = basis_derivative(k, d, T);
  }
}

void MincoSolver::factorize() {
  for (int k = 0; k < n_ - 1; ++k) {
    const int i_max = std::min(k + kBand, n_ - 1);
    const double pivot = at(k, k);
    if (pivot == 0.0 || !std::isfinite(pivot)) throw Error(ErrorCode::SingularSystem, "zero pivot in spline system");
    for (int i = k + 1; i <= i_max; ++i) {
      if (at(i, k) != 0.0) at(i, k) /= pivot;
    }
    const int j_max = std::min(k + kBand, n_ - 1);
    for (int j = k + 1; j <= j_max; ++j) {
      const double u = at(k, j);
      if (u == 0.0) continue;
      for (int i = k + 1; i <= i_max; ++i) {
        if (at(i, k) != 0.0) at(i, j) -= at(i, k) * u;
      }
    }
  }
}

void MincoSolver::solve_in_place(Eigen::MatrixX2d& b) const {
  for (int j = 0; j < n_; ++j) {
    const int i_max = std::min(j + kBand, n_ - 1);
    for (int i = j + 1; i <= i_max; ++i) {
      if (at(i, j) != 0.0) b.row(i) -= at(i, j) * b.row(j);
    }
  }
  for (int j = n_ - 1; j >= 0; --j) {
    b.row(j) /= at(j, j);
    const int i_min = std::max(0, j - kBand);
    for (int i = i_min; i < j; ++i) {
      if (at(i, j) != 0.0) b.row(i) -= at(i, j) * b.row(j);
    }
  }
}

void MincoSolver::solve_adjoint_in_place(Eigen::MatrixX2d& b) const {
  for (int j = 0; j < n_; ++j) {
    b.row(j) /= at(j, j);
    const int i_max = std::min(j + kBand, n_ - 1);
    for (int i = j + 1; i <= i_max; ++i) {
      if (at(j, i) != 0.0) b.row(i) -= at(j, i) * b.row(j);
    }
  }
  for (int j = n_ - 1; j >= 0; --j) {
    const int i_min = std::max(0, j - kBand);
    for (int i = i_min; i < j; ++i) {
      if (at(j, i) != 0.0) b.row(i) -= at(j, i) * b.row(j);
    }
  }
}

void MincoSolver::solve(const SigmaState& head, const SigmaState& tail, const Eigen::Matrix2Xd& waypoints,
                        const Eigen::VectorXd& durations) {
  const int m = static_cast<int>(durations.size());
  if (m < 1 || waypoints.cols() != m - 1) throw Error(ErrorCode::DegenerateInput, "waypoint count must be pieces - 1");
  if ((durations.array() <= 0.0).any() || !durations.allFinite()) {
    throw Error(ErrorCode::SingularSystem, "segment durations must be positive");
  }
  durations_ = durations;
  build_matrix();
  factorize();

  coeffs_.setZero(n_, 2);
  coeffs_.row(0) = head.pos.transpose();
  coeffs_.row(1) = head.vel.transpose();
  coeffs_.row(2) = head.acc.transpose();
  for (int i = 0; i < m - 1; ++i) coeffs_.row(6 * i + 5) = waypoints.col(i).transpose();
  coeffs_.row(n_ - 3) = tail.pos.transpose();
  coeffs_.row(n_ - 2) = tail.vel.transpose();
  coeffs_.row(n_ - 1) = tail.acc.transpose();
  solve_in_place(coeffs_);
}

double MincoSolver::jerk_energy(const Vec2& weights) const {
  double e = 0.0;
  for (int i = 0; i < pieces(); ++i) {
    const double T = durations_(i), T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
    for (int d = 0; d < 2; ++d) {
      const double c3 = coeffs_(6 * i + 3, d), c4 = coeffs_(6 * i + 4, d), c5 = coeffs_(6 * i + 5, d);
      e += weights(d) * (36.0 * c3 * c3 * T + 144.0 * c3 * c4 * T2 + 192.0 * c4 * c4 * T3 + 240.0 * c3 * c5 * T3 +
                         720.0 * c4 * c5 * T4 + 720.0 * c5 * c5 * T5);
    }
  }
  return e;
}

void MincoSolver::add_jerk_gradient(const Vec2& weights, Eigen::MatrixX2d& grad_c, Eigen::VectorXd& grad_T) const {
  for (int i = 0; i < pieces(); ++i) {
    const double T = durations_(i), T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
    for (int d = 0; d < 2; ++d) {
      const double w = weights(d);
      const double c3 = coeffs_(6 * i + 3, d), c4 = coeffs_(6 * i + 4, d), c5 = coeffs_(6 * i + 5, d);
      grad_c(6 * i + 3, d) += w * (72.0 * c3 * T + 144.0 * c4 * T2 + 240.0 * c5 * T3);
      grad_c(6 * i + 4, d) += w * (144.0 * c3 * T2 + 384.0 * c4 * T3 + 720.0 * c5 * T4);
      grad_c(6 * i + 5, d) += w * (240.0 * c3 * T3 + 720.0 * c4 * T4 + 1440.0 * c5 * T5);
      grad_T(i) += w * (36.0 * c3 * c3 + 288.0 * c3 * c4 * T + 576.0 * c4 * c4 * T2 + 720.0 * c3 * c5 * T2 +
                        2880.0 * c4 * c5 * T3 + 3600.0 * c5 * c5 * T4);
    }
  }
}

void MincoSolver::propagate(const Eigen::MatrixX2d& grad_c, const Eigen::VectorXd& grad_T_explicit,
                            Eigen::Matrix2Xd& grad_q, Eigen::VectorXd& grad_T, Vec2& grad_tail) const {
  const int m = pieces();
  Eigen::MatrixX2d adj = grad_c;
  solve_adjoint_in_place(adj);

  grad_q.resize(2, m - 1);
  for (int i = 0; i < m - 1; ++i) grad_q.col(i) = adj.row(6 * i + 5).transpose();
  grad_tail = adj.row(n_ - 3).transpose();

  // d(A c)/dT_i only touches the rows evaluated at the end of segment i; each
  // such row differentiates to the next derivative order of that segment.
  grad_T = grad_T_explicit;
  for (int i = 0; i < m; ++i) {
    const SegmentCoeffs c = coeffs(i);
    const double T = durations_(i);
    if (i < m - 1) {
      const int r = 6 * i + 3;
      const int orders[6] = {3, 4, 0, 0, 1, 2};
      for (int row = 0; row < 6; ++row) {
        grad_T(i) -= adj.row(r + row).dot(eval_segment(c, T, orders[row] + 1).transpose());
      }
    } else {
      for (int d = 0; d < 3; ++d) grad_T(i) -= adj.row(n_ - 3 + d).dot(eval_segment(c, T, d + 1).transpose());
    }
  }
}

double MsSpline::total_duration() const {
  double t = 0.0;
  for (double d : durations) t += d;
  return t;
}

int MsSpline::locate(double t, double& local) const {
  const int m = pieces();
  for (int i = 0; i < m; ++i) {
    if (t <= durations[i] || i == m - 1) {
      local = std::clamp(t, 0.0, durations[i]);
      return i;
    }
    t -= durations[i];
  }
  local = 0.0;
  return 0;
}

Vec2 MsSpline::eval(double t, int order) const {
  double local = 0.0;
  const int i = locate(t, local);
  return eval_segment(coeffs[i], local, order);
}

Vec2 simpson_displacement(const SegmentCoeffs& c, double span, double delta_theta, int n) {
  if (span <= 0.0) return Vec2::Zero();
  const double h = span / n;
  Vec2 sum = Vec2::Zero();
  for (int j = 0; j <= n; ++j) {
    const double w = (j == 0 || j == n) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
    const double t = j * h;
    const double heading = eval_segment(c, t, 0)(0) - delta_theta;
    const double v = eval_segment(c, t, 1)(1);
    sum += w * v * Vec2(std::cos(heading), std::sin(heading));
  }
  return sum * (h / 3.0);
}

double CrossPlaneTrajectory::part_start_time(int part) const {
  double t = 0.0;
  for (int i = 0; i < parts[part].first_segment; ++i) t += spline.durations[i];
  return t;
}

double CrossPlaneTrajectory::part_duration(int part) const {
  double t = 0.0;
  const TrajectoryPart& p = parts[part];
  for (int i = p.first_segment; i < p.first_segment + p.segment_count; ++i) t += spline.durations[i];
  return t;
}

int CrossPlaneTrajectory::part_at(double t) const {
  const int n = static_cast<int>(parts.size());
  for (int p = n - 1; p > 0; --p) {
    if (t >= part_start_time(p)) return p;
  }
  return 0;
}

Vec2 CrossPlaneTrajectory::integrate_position(int part, double t) const {
  const TrajectoryPart& p = parts[part];
  Vec2 pos = p.start_local;
  for (int i = p.first_segment; i < p.first_segment + p.segment_count; ++i) {
    const double T = spline.durations[i];
    const bool last = i == p.first_segment + p.segment_count - 1;
    if (t >= T && !last) {
      pos += simpson_displacement(spline.coeffs[i], T, p.delta_theta, n_quad);
      t -= T;
      continue;
    }
    pos += simpson_displacement(spline.coeffs[i], std::clamp(t, 0.0, T), p.delta_theta, n_quad);
    break;
  }
  return pos;
}

WorldState CrossPlaneTrajectory::world_state(double t) const {
  const double total = duration();
  if (!(t >= 0.0 && t <= total)) throw Error(ErrorCode::OutOfDomain, "time outside the trajectory");
  WorldState s;
  s.part = part_at(t);
  const TrajectoryPart& p = parts[s.part];
  s.plane = p.plane;
  s.local = integrate_position(s.part, t - part_start_time(s.part));
  s.position = p.frame.to_world(s.local);
  const Vec2 sigma = spline.eval(t, 0);
  const Vec2 rate = spline.eval(t, 1);
  s.yaw = sigma(0);
  s.omega = rate(0);
  s.v = rate(1);
  return s;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vec3 crossing_point(double eta, const Segment3D& segment) { return segment.at(sigmoid(eta)); }

Vec3 crossing_point_derivative(double eta, const Segment3D& segment) {
  const double s = sigmoid(eta);
  return s * (1.0 - s) * (segment.b - segment.a);
}

}  // namespace planeway
