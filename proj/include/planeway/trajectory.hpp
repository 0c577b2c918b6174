#pragma once

#include "planeway/geometry.hpp"

#include <Eigen/Dense>

#include <vector>

namespace planeway {

/// Quintic coefficients of one segment, ascending powers; column 0 is the yaw
/// theta, column 1 the arc length s.
using SegmentCoeffs = Eigen::Matrix<double, 6, 2>;

/// sigma = [theta, s] with its first two derivatives.
struct SigmaState {
  Vec2 pos = Vec2::Zero();
  Vec2 vel = Vec2::Zero();
  Vec2 acc = Vec2::Zero();
};

/// Positive duration from an unconstrained variable: 0.5 tau^2 + tau + 1 for
/// tau > 0 and 2 / (tau^2 - 2 tau + 2) otherwise. C1 and strictly increasing.
double time_from_tau(double tau);
double tau_from_time(double T);
double dtime_dtau(double tau);

/// Derivative `order` of the polynomial at t.
Vec2 eval_segment(const SegmentCoeffs& c, double t, int order);

/// Minimum-jerk quintic spline through fixed waypoints. The linear system has
/// bandwidth 6 and is factorized without pivoting; gradients with respect to
/// waypoints, durations and the tail position are obtained with the adjoint.
class MincoSolver {
 public:
  void solve(const SigmaState& head, const SigmaState& tail, const Eigen::Matrix2Xd& waypoints,
             const Eigen::VectorXd& durations);

  int pieces() const { return static_cast<int>(durations_.size()); }
  const Eigen::VectorXd& durations() const { return durations_; }
  SegmentCoeffs coeffs(int i) const { return coeffs_.block<6, 2>(6 * i, 0); }
  const Eigen::MatrixX2d& all_coeffs() const { return coeffs_; }

  /// Sum over segments of int sigma'''^T W sigma''' dt.
  double jerk_energy(const Vec2& weights) const;
  /// Adds d(jerk)/dc and the explicit d(jerk)/dT.
  void add_jerk_gradient(const Vec2& weights, Eigen::MatrixX2d& grad_c, Eigen::VectorXd& grad_T) const;

  /// Maps a gradient over coefficients (6M x 2) plus explicit duration terms to
  /// gradients over waypoints, durations and the tail position.
  void propagate(const Eigen::MatrixX2d& grad_c, const Eigen::VectorXd& grad_T_explicit,
                 Eigen::Matrix2Xd& grad_q, Eigen::VectorXd& grad_T, Vec2& grad_tail) const;

 private:
  void build_matrix();

  int n_ = 0;  // 6M
  Eigen::VectorXd durations_;
  std::vector<double> band_;  // (13 x n_) band storage of the LU factors
  Eigen::MatrixX2d coeffs_;

  double& at(int i, int j) { return band_[static_cast<std::size_t>(i - j + 6) * n_ + j]; }
  double at(int i, int j) const { return band_[static_cast<std::size_t>(i - j + 6) * n_ + j]; }
  void factorize();
  void solve_in_place(Eigen::MatrixX2d& b) const;
  void solve_adjoint_in_place(Eigen::MatrixX2d& b) const;
};

struct MsSpline {
  std::vector<SegmentCoeffs> coeffs;
  std::vector<double> durations;

  int pieces() const { return static_cast<int>(durations.size()); }
  double total_duration() const;
  /// Segment containing t (clamped to the domain) and the local time in it.
  int locate(double t, double& local) const;
  Vec2 eval(double t, int order) const;
};

/// Simpson's rule for the plane-frame displacement of one segment over
/// [0, span], n (even) subintervals: int s' (cos, sin)(theta - delta_theta) dt.
Vec2 simpson_displacement(const SegmentCoeffs& c, double span, double delta_theta, int n);

struct TrajectoryPart {
  int plane = -1;
  Transform frame;          // plane frame used to lift the part to the world
  double delta_theta = 0.0; // yaw offset of the plane x-axis
  Vec2 start_local = Vec2::Zero();
  int first_segment = 0;
  int segment_count = 0;
};

struct WorldState {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;    // world theta
  double v = 0.0;      // s'
  double omega = 0.0;  // theta'
  int plane = -1;
  int part = -1;
  Vec2 local = Vec2::Zero();
};

struct CrossPlaneTrajectory {
  MsSpline spline;
  std::vector<TrajectoryPart> parts;
  std::vector<double> eta;            // one per crossing
  std::vector<Segment3D> crossing_segments;
  std::vector<Vec3> crossing_points;  // world, sigmoid(eta) along the segments
  int n_quad = 16;

  double duration() const { return spline.total_duration(); }
  double part_start_time(int part) const;
  double part_duration(int part) const;
  /// Part containing t; at a shared boundary the later part wins.
  int part_at(double t) const;
  /// Plane-frame position `t` seconds after the start of `part`.
  Vec2 integrate_position(int part, double t) const;
  Vec2 part_end_local(int part) const { return integrate_position(part, part_duration(part)); }
  /// Throws OutOfDomain outside [0, duration].
  WorldState world_state(double t) const;
};

double sigmoid(double x);

/// l0 + sigmoid(eta) (l1 - l0).
Vec3 crossing_point(double eta, const Segment3D& segment);
Vec3 crossing_point_derivative(double eta, const Segment3D& segment);

}  // namespace planeway
