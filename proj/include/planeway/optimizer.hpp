#pragma once

#include "planeway/config.hpp"
#include "planeway/graph.hpp"
#include "planeway/trajectory.hpp"

#include <functional>
#include <limits>
#include <vector>

namespace planeway {

/// Half-ellipse speed limit at plane-frame heading theta_p. Forward motion uses
/// the rising ratio while heading uphill (cos theta_p >= 0), the declining one
/// otherwise; backward motion is the forward limit at theta_p + pi.
double velocity_limit(double theta_p, double psi, bool forward, const RobotLimits& limits);
double velocity_limit_derivative(double theta_p, double psi, bool forward, const RobotLimits& limits);

/// theta_p wrapped into [-pi/2, pi/2) modulo pi.
double wrap_half_pi(double theta_p);

/// Largest value of each constraint family at one instant; all <= 0 when satisfied.
struct Residuals {
  double velocity = -std::numeric_limits<double>::infinity();
  double moment = -std::numeric_limits<double>::infinity();
  double orientation = -std::numeric_limits<double>::infinity();  // stays -inf off stairs
  double safety = -std::numeric_limits<double>::infinity();
};

/// Residuals of a state on a plane: theta is the world yaw, omega = theta',
/// v = s', local the plane-frame position.
Residuals state_residuals(double theta, double omega, double v, const Vec2& local, const TraversablePlane& plane,
                          const RobotLimits& limits);
Residuals constraint_residuals(const CrossPlaneTrajectory& traj, const std::vector<TraversablePlane>& planes,
                               const RobotLimits& limits, double t);

/// The data of one optimization problem along a searched plane sequence.
struct PlanningProblem {
  std::vector<int> planes;             // visited planes
  std::vector<int> segments_per_part;  // M_ti
  std::vector<Segment3D> crossing_segments;
  Vec2 start_local = Vec2::Zero();
  Vec2 goal_local = Vec2::Zero();
  double theta0 = 0.0;

  int pieces() const;
  int parts() const { return static_cast<int>(planes.size()); }
};

/// Unconstrained variables: interior waypoints q, times tau, crossings eta and
/// the free terminal sigma (final yaw and arc length).
struct DecisionVector {
  Eigen::Matrix2Xd q;
  Eigen::VectorXd tau;
  Eigen::VectorXd eta;
  Vec2 tail = Vec2::Zero();

  Eigen::VectorXd flatten() const;
  static DecisionVector unflatten(const Eigen::VectorXd& x, int pieces, int crossings);
};

struct DualState {
  Eigen::Matrix2Xd lambda;  // one column per part
  double rho = 1.0;
};

struct CostBreakdown {
  double jerk = 0.0;
  double time = 0.0;
  double penalty = 0.0;
  double augmented = 0.0;

  double cost() const { return jerk + time + penalty; }
  double total() const { return cost() + augmented; }
};

class TrajectoryObjective {
 public:
  TrajectoryObjective(PlanningProblem problem, const std::vector<TraversablePlane>& planes,
                      const RobotLimits& limits, const OptimizerConfig& config);

  int dimension() const;
  const PlanningProblem& problem() const { return problem_; }

  /// J_rho and its gradient. Throws NonFiniteValue on NaN/Inf intermediates.
  double evaluate(const Eigen::VectorXd& x, const DualState& dual, Eigen::VectorXd& grad,
                  CostBreakdown* breakdown = nullptr);

  /// Integrated end minus desired end for every part (2 x parts).
  Eigen::Matrix2Xd final_errors(const Eigen::VectorXd& x);
  CrossPlaneTrajectory assemble(const Eigen::VectorXd& x);

  /// Multiplies the inequality penalty weights (used when dense checks fail).
  void scale_penalties(double factor) { penalty_scale_ *= factor; }
  double penalty_scale() const { return penalty_scale_; }

 private:
  void spline_from(const DecisionVector& dv);

  PlanningProblem problem_;
  const std::vector<TraversablePlane>& planes_;
  RobotLimits limits_;
  OptimizerConfig config_;
  double penalty_scale_ = 1.0;
  MincoSolver minco_;
};

/// Initial guess from a searched path: arc-length-uniform waypoints, unwrapped
/// headings, durations at half the top speed and eta at the searched vertices.
std::pair<PlanningProblem, Eigen::VectorXd> initial_guess(const PathResult& path,
                                                         const std::vector<TraversablePlane>& planes,
                                                         const RobotLimits& limits, const OptimizerConfig& config);

struct LbfgsResult {
  enum Status { Converged, Stalled, MaxIterations, LineSearchFailed } status = Converged;
  int iterations = 0;
  int evaluations = 0;
  double value = 0.0;
};

/// Limited-memory BFGS with a weak-Wolfe bisection line search. `fn` returns
/// the value and writes the gradient; a thrown NonFiniteValue counts as +inf.
/// Stops when |g| <= grad_tol max(1, |x|) or when the value dropped by less
/// than rel_decrease (relative) over the last three iterations.
LbfgsResult minimize_lbfgs(const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& fn,
                           Eigen::VectorXd& x, int max_iterations, double grad_tol, double rel_decrease = 0.0,
                           int memory = 8);

/// Dense verification of a trajectory.
struct DenseReport {
  double max_velocity = -std::numeric_limits<double>::infinity();
  double max_moment = -std::numeric_limits<double>::infinity();
  double max_orientation = -std::numeric_limits<double>::infinity();
  double max_safety = -std::numeric_limits<double>::infinity();
  double t_velocity = 0.0, t_moment = 0.0, t_orientation = 0.0, t_safety = 0.0;
  double max_diamond = 0.0;        // |v|/v_max(theta_p) + |omega|/omega_max
  double joint_gap = 0.0;          // sigma and two derivatives across segment joints
  double crossing_gap = 0.0;       // world position jump at plane switches
  double crossing_rate_gap = 0.0;  // theta' and s' jump at plane switches
  double surface_deviation = 0.0;  // distance of samples from their plane
  int samples = 0;

  double worst() const;
};

DenseReport dense_check(const CrossPlaneTrajectory& traj, const std::vector<TraversablePlane>& planes,
                        const RobotLimits& limits, double rate);

struct OuterLog {
  int outer = 0;
  double constraint_norm = 0.0;  // max over parts of |C_f|
  double rho = 0.0;
  int inner_iterations = 0;
  double objective = 0.0;
  int escalation = 0;
};

struct SolveResult {
  CrossPlaneTrajectory trajectory;
  bool converged = false;     // every |C_f| < e_max
  bool constraints_ok = false;  // dense residuals within tolerance
  double final_error = 0.0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  std::vector<OuterLog> log;
  DenseReport check;
};

/// ALM outer loop around L-BFGS. Never throws on non-convergence; callers
/// inspect `converged` (the CLI maps it to MaxIterations).
SolveResult solve_trajectory(const PathResult& path, const std::vector<TraversablePlane>& planes,
                             const RobotLimits& limits, const OptimizerConfig& config);

}  // namespace planeway
