#include "planeway/optimizer.hpp"

#include "planeway/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

namespace planeway {
namespace {

constexpr double kPi = std::numbers::pi;

double positive_cube(double c) { return c > 0.0 ? c * c * c : 0.0; }
double positive_cube_slope(double c) { return c > 0.0 ? 3.0 * c * c : 0.0; }

double unwrap_near(double angle, double reference) {
  return angle + 2.0 * kPi * std::round((reference - angle) / (2.0 * kPi));
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, what);
}

struct SampleGradient {
  double theta = 0.0;
  double omega = 0.0;
  double v = 0.0;
  Vec2 pos = Vec2::Zero();
};

// Penalty of one constraint sample with the internal margins applied.
double sample_penalty(double theta, double omega, double v, const Vec2& local, const TraversablePlane& plane,
                      const RobotLimits& limits, const OptimizerConfig& cfg, double scale, SampleGradient& g) {
  const double keep = 1.0 - cfg.constraint_margin;
  const double theta_p = theta - plane.frame.yaw_offset();
  const double psi = plane.inclination;
  const double vf = keep * velocity_limit(theta_p, psi, true, limits);
  const double vb = keep * velocity_limit(theta_p, psi, false, limits);
  const double dvf = keep * velocity_limit_derivative(theta_p, psi, true, limits);
  const double dvb = keep * velocity_limit_derivative(theta_p, psi, false, limits);
  const double wm = keep * limits.omega_max;

  double p = 0.0;
  g = SampleGradient{};
  auto add = [&](double weight, double c, double d_theta, double d_omega, double d_v) {
    const double w = weight * scale;
    p += w * positive_cube(c);
    const double s = w * positive_cube_slope(c);
    g.theta += s * d_theta;
    g.omega += s * d_omega;
    g.v += s * d_v;
  };
  add(cfg.w_vel, v - vf, -dvf, 0.0, 1.0);
  add(cfg.w_vel, -v - vb, -dvb, 0.0, -1.0);
  for (double kappa : {-1.0, 1.0}) {
    add(cfg.w_mom, kappa * omega * vf + wm * v - vf * wm, (kappa * omega - wm) * dvf, kappa * vf, wm);
    add(cfg.w_mom, kappa * omega * vb - wm * v - vb * wm, (kappa * omega - wm) * dvb, kappa * vb, -wm);
  }
  if (plane.kind == PlaneKind::Stairs) {
    const double ts = keep * limits.theta_s;
    const double wrapped = wrap_half_pi(theta_p);
    add(cfg.w_orient, wrapped * wrapped - ts * ts, 2.0 * wrapped, 0.0, 0.0);
  }
  const EsdfSample e = query_esdf(plane.grid, local);
  const double cs = limits.d_s + cfg.safety_margin - e.value;
  const double w = cfg.w_safe * scale;
  p += w * positive_cube(cs);
  g.pos = -w * positive_cube_slope(cs) * e.gradient;
  return p;
}

double polyline_length(const std::vector<Vec2>& pts) {
  double len = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) len += (pts[i] - pts[i - 1]).norm();
  return len;
}

// Heading of the polyline piece containing arc length s (later piece at corners).
double heading_at(const std::vector<Vec2>& pts, double s) {
  double acc = 0.0;
  double last = 0.0;
  bool any = false;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const Vec2 d = pts[i] - pts[i - 1];
    const double len = d.norm();
    if (len < 1e-9) continue;
    last = std::atan2(d.y(), d.x());
    any = true;
    if (s < acc + len) return last;
    acc += len;
  }
  return any ? last : 0.0;
}

}  // namespace

double velocity_limit(double theta_p, double psi, bool forward, const RobotLimits& limits) {
  const double a = forward ? theta_p : theta_p + kPi;
  const double c = std::cos(a), s = std::sin(a);
  const double r = c >= 0.0 ? limits.r_rise(psi) : limits.r_decline(psi);
  return limits.v_max * std::sqrt(r * c * c + s * s);
}

double velocity_limit_derivative(double theta_p, double psi, bool forward, const RobotLimits& limits) {
  const double a = forward ? theta_p : theta_p + kPi;
  const double c = std::cos(a), s = std::sin(a);
  const double r = c >= 0.0 ? limits.r_rise(psi) : limits.r_decline(psi);
  return limits.v_max * (1.0 - r) * s * c / std::sqrt(r * c * c + s * s);
}

double wrap_half_pi(double theta_p) { return theta_p - kPi * std::floor((theta_p + 0.5 * kPi) / kPi); }

Residuals state_residuals(double theta, double omega, double v, const Vec2& local, const TraversablePlane& plane,
                          const RobotLimits& limits) {
  const double theta_p = theta - plane.frame.yaw_offset();
  const double vf = velocity_limit(theta_p, plane.inclination, true, limits);
  const double vb = velocity_limit(theta_p, plane.inclination, false, limits);
  const double wm = limits.omega_max;
  Residuals r;
  r.velocity = std::max(v - vf, -v - vb);
  for (double kappa : {-1.0, 1.0}) {
    r.moment = std::max(r.moment, kappa * omega * vf + wm * v - vf * wm);
    r.moment = std::max(r.moment, kappa * omega * vb - wm * v - vb * wm);
  }
  if (plane.kind == PlaneKind::Stairs) {
    const double w = wrap_half_pi(theta_p);
    r.orientation = w * w - limits.theta_s * limits.theta_s;
  }
  r.safety = limits.d_s - query_esdf(plane.grid, local).value;
  return r;
}

Residuals constraint_residuals(const CrossPlaneTrajectory& traj, const std::vector<TraversablePlane>& planes,
                               const RobotLimits& limits, double t) {
  const WorldState s = traj.world_state(t);
  return state_residuals(s.yaw, s.omega, s.v, s.local, planes.at(s.plane), limits);
}

int PlanningProblem::pieces() const {
  int m = 0;
  for (int k : segments_per_part) m += k;
  return m;
}

Eigen::VectorXd DecisionVector::flatten() const {
  Eigen::VectorXd x(q.size() + tau.size() + eta.size() + 2);
  x << Eigen::Map<const Eigen::VectorXd>(q.data(), q.size()), tau, eta, tail;
  return x;
}

DecisionVector DecisionVector::unflatten(const Eigen::VectorXd& x, int pieces, int crossings) {
  DecisionVector dv;
  const int nq = 2 * (pieces - 1);
  dv.q = Eigen::Map<const Eigen::Matrix2Xd>(x.data(), 2, pieces - 1);
  dv.tau = x.segment(nq, pieces);
  dv.eta = x.segment(nq + pieces, crossings);
  dv.tail = x.segment<2>(nq + pieces + crossings);
  return dv;
}

TrajectoryObjective::TrajectoryObjective(PlanningProblem problem, const std::vector<TraversablePlane>& planes,
                                         const RobotLimits& limits, const OptimizerConfig& config)
    : problem_(std::move(problem)), planes_(planes), limits_(limits), config_(config) {
  if (config_.n_cons < 1 || config_.n_quad % (2 * config_.n_cons) != 0) {
    throw Error(ErrorCode::ConfigError, "n_quad must be a multiple of 2 * n_cons");
  }
}

int TrajectoryObjective::dimension() const {
  const int m = problem_.pieces();
  return 2 * (m - 1) + m + (problem_.parts() - 1) + 2;
}

void TrajectoryObjective::spline_from(const DecisionVector& dv) {
  Eigen::VectorXd T(dv.tau.size());
  for (int i = 0; i < T.size(); ++i) T(i) = time_from_tau(dv.tau(i));
  SigmaState head, tail;
  head.pos = Vec2(problem_.theta0, 0.0);
  tail.pos = dv.tail;
  minco_.solve(head, tail, dv.q, T);
}

double TrajectoryObjective::evaluate(const Eigen::VectorXd& x, const DualState& dual, Eigen::VectorXd& grad,
                                     CostBreakdown* breakdown) {
  if (!x.allFinite()) throw Error(ErrorCode::NonFiniteValue, "decision vector");
  const int m = problem_.pieces();
  const int parts = problem_.parts();
  const DecisionVector dv = DecisionVector::unflatten(x, m, parts - 1);
  spline_from(dv);

  const int nq = config_.n_quad;
  const int panels = nq / 2;
  const int panels_per_sample = panels / config_.n_cons;
  const Vec2 weights(config_.weight_theta, config_.weight_s);

  CostBreakdown cost;
  Eigen::MatrixX2d grad_c = Eigen::MatrixX2d::Zero(6 * m, 2);
  Eigen::VectorXd grad_T = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd grad_eta = Eigen::VectorXd::Zero(parts - 1);

  cost.jerk = minco_.jerk_energy(weights);
  minco_.add_jerk_gradient(weights, grad_c, grad_T);
  cost.time = config_.eps_T * minco_.durations().sum();
  grad_T.array() += config_.eps_T;

  std::vector<Vec3> cross(parts - 1), dcross(parts - 1);
  for (int k = 0; k < parts - 1; ++k) {
    cross[k] = crossing_point(dv.eta(k), problem_.crossing_segments[k]);
    dcross[k] = crossing_point_derivative(dv.eta(k), problem_.crossing_segments[k]);
  }

  // Node data of one part, cached between the forward and reverse sweeps.
  struct Node {
    double t, heading, omega, speed, theta_acc, s_acc;
    Vec2 f;
  };
  std::vector<Node> nodes;
  std::vector<Vec2> sample_gpos, df(nq + 1);

  int seg = 0;
  for (int p = 0; p < parts; ++p) {
    const TraversablePlane& plane = planes_[problem_.planes[p]];
    const Mat3& R = plane.frame.rotation;
    const double dtheta = plane.frame.yaw_offset();
    const Vec2 start = p == 0 ? problem_.start_local : plane.frame.project(cross[p - 1]);
    const Vec2 target = p == parts - 1 ? problem_.goal_local : plane.frame.project(cross[p]);
    const int first = seg, count = problem_.segments_per_part[p];
    nodes.resize(static_cast<std::size_t>(count) * (nq + 1));
    sample_gpos.assign(static_cast<std::size_t>(count) * panels, Vec2::Zero());

    // Forward pass: positions and sample penalties; remember sample position gradients.
    Vec2 pos = start;
    Vec2 start_gpos = Vec2::Zero();
    for (int i = first; i < first + count; ++i) {
      const SegmentCoeffs c = minco_.coeffs(i);
      const double T = minco_.durations()(i);
      const double h = T / nq;
      Node* nd = &nodes[static_cast<std::size_t>(i - first) * (nq + 1)];
      for (int j = 0; j <= nq; ++j) {
        const double t = j * h;
        const Vec2 s0 = eval_segment(c, t, 0), s1 = eval_segment(c, t, 1), s2 = eval_segment(c, t, 2);
        Node& n = nd[j];
        n.t = t;
        n.heading = s0(0) - dtheta;
        n.omega = s1(0);
        n.speed = s1(1);
        n.theta_acc = s2(0);
        n.s_acc = s2(1);
        n.f = n.speed * Vec2(std::cos(n.heading), std::sin(n.heading));
      }
      if (i == first && p > 0) {
        // The crossing point starts this part but is only sampled on the previous plane.
        const Node& n = nd[0];
        SampleGradient g;
        const double pen = sample_penalty(n.heading + dtheta, n.omega, n.speed, pos, plane, limits_, config_,
                                          penalty_scale_, g);
        const double wt = T / config_.n_cons;
        cost.penalty += wt * pen;
        grad_T(i) += pen / config_.n_cons;
        grad_c(6 * i, 0) += wt * g.theta;
        grad_c(6 * i + 1, 0) += wt * g.omega;
        grad_c(6 * i + 1, 1) += wt * g.v;
        start_gpos = wt * g.pos;
      }
      for (int mp = 0; mp < panels; ++mp) {
        pos += (h / 3.0) * (nd[2 * mp].f + 4.0 * nd[2 * mp + 1].f + nd[2 * mp + 2].f);
        if ((mp + 1) % panels_per_sample != 0) continue;
        const Node& n = nd[2 * mp + 2];
        SampleGradient g;
        const double pen = sample_penalty(n.heading + dtheta, n.omega, n.speed, pos, plane, limits_, config_,
                                          penalty_scale_, g);
        if (pen == 0.0 && g.pos.isZero()) continue;
        const double wt = T / config_.n_cons;
        cost.penalty += wt * pen;
        grad_T(i) += pen / config_.n_cons;
        const double frac = double(2 * mp + 2) / nq;
        double tk = 1.0, tk1 = 0.0;  // t^k and t^(k-1)
        for (int k = 0; k < 6; ++k) {
          grad_c(6 * i + k, 0) += wt * (g.theta * tk + g.omega * k * tk1);
          grad_c(6 * i + k, 1) += wt * g.v * k * tk1;
          tk1 = tk;
          tk *= n.t;
        }
        grad_T(i) += wt * frac * (g.theta * n.omega + g.omega * n.theta_acc + g.v * n.s_acc);
        sample_gpos[static_cast<std::size_t>(i - first) * panels + mp] = wt * g.pos;
      }
    }
    check_finite(pos.x() + pos.y(), "integrated position");

    const Vec2 cf = pos - target;
    const Vec2 lam = dual.lambda.col(p);
    cost.augmented += 0.5 * dual.rho * (cf + lam / dual.rho).squaredNorm();
    const Vec2 g_end = dual.rho * cf + lam;

    // Reverse sweep: adjoint of the running position.
    Vec2 adj = g_end;
    for (int i = first + count - 1; i >= first; --i) {
      const double T = minco_.durations()(i);
      const double h = T / nq;
      const Node* nd = &nodes[static_cast<std::size_t>(i - first) * (nq + 1)];
      for (auto& v : df) v.setZero();
      for (int mp = panels - 1; mp >= 0; --mp) {
        adj += sample_gpos[static_cast<std::size_t>(i - first) * panels + mp];
        const Vec2 delta = (h / 3.0) * (nd[2 * mp].f + 4.0 * nd[2 * mp + 1].f + nd[2 * mp + 2].f);
        grad_T(i) += adj.dot(delta) / T;
        df[2 * mp] += (h / 3.0) * adj;
        df[2 * mp + 1] += (4.0 * h / 3.0) * adj;
        df[2 * mp + 2] += (h / 3.0) * adj;
      }
      for (int j = 0; j <= nq; ++j) {
        const Node& n = nd[j];
        const double cs = std::cos(n.heading), sn = std::sin(n.heading);
        const double g_theta = n.speed * (df[j].y() * cs - df[j].x() * sn);
        const double g_v = df[j].x() * cs + df[j].y() * sn;
        double tk = 1.0, tk1 = 0.0;
        for (int k = 0; k < 6; ++k) {
          grad_c(6 * i + k, 0) += g_theta * tk;
          grad_c(6 * i + k, 1) += g_v * k * tk1;
          tk1 = tk;
          tk *= n.t;
        }
        grad_T(i) += (double(j) / nq) * (g_theta * n.omega + g_v * n.s_acc);
      }
    }
    adj += start_gpos;
    if (p > 0) grad_eta(p - 1) += adj.dot((R.transpose() * dcross[p - 1]).head<2>());
    if (p < parts - 1) grad_eta(p) -= g_end.dot((R.transpose() * dcross[p]).head<2>());
    seg += count;
  }

  Eigen::Matrix2Xd grad_q;
  Eigen::VectorXd grad_T_total;
  Vec2 grad_tail;
  minco_.propagate(grad_c, grad_T, grad_q, grad_T_total, grad_tail);

  DecisionVector gdv;
  gdv.q = grad_q;
  gdv.tau.resize(m);
  for (int i = 0; i < m; ++i) gdv.tau(i) = grad_T_total(i) * dtime_dtau(dv.tau(i));
  gdv.eta = grad_eta;
  gdv.tail = grad_tail;
  grad = gdv.flatten();

  const double total = cost.total();
  check_finite(total, "objective");
  if (!grad.allFinite()) throw Error(ErrorCode::NonFiniteValue, "gradient");
  if (breakdown) *breakdown = cost;
  return total;
}

CrossPlaneTrajectory TrajectoryObjective::assemble(const Eigen::VectorXd& x) {
  const int m = problem_.pieces();
  const int parts = problem_.parts();
  const DecisionVector dv = DecisionVector::unflatten(x, m, parts - 1);
  spline_from(dv);

  CrossPlaneTrajectory traj;
  traj.n_quad = config_.n_quad;
  for (int i = 0; i < m; ++i) {
    traj.spline.coeffs.push_back(minco_.coeffs(i));
    traj.spline.durations.push_back(minco_.durations()(i));
  }
  traj.eta.assign(dv.eta.data(), dv.eta.data() + dv.eta.size());
  traj.crossing_segments = problem_.crossing_segments;
  for (int k = 0; k < parts - 1; ++k) traj.crossing_points.push_back(crossing_point(dv.eta(k), problem_.crossing_segments[k]));
  int seg = 0;
  for (int p = 0; p < parts; ++p) {
    const TraversablePlane& plane = planes_[problem_.planes[p]];
    TrajectoryPart part;
    part.plane = problem_.planes[p];
    part.frame = plane.frame;
    part.delta_theta = plane.frame.yaw_offset();
    part.start_local = p == 0 ? problem_.start_local : plane.frame.project(traj.crossing_points[p - 1]);
    part.first_segment = seg;
    part.segment_count = problem_.segments_per_part[p];
    seg += part.segment_count;
    traj.parts.push_back(part);
  }
  return traj;
}

Eigen::Matrix2Xd TrajectoryObjective::final_errors(const Eigen::VectorXd& x) {
  const CrossPlaneTrajectory traj = assemble(x);
  const int parts = problem_.parts();
  Eigen::Matrix2Xd out(2, parts);
  for (int p = 0; p < parts; ++p) {
    const TraversablePlane& plane = planes_[problem_.planes[p]];
    const Vec2 target = p == parts - 1 ? problem_.goal_local : plane.frame.project(traj.crossing_points[p]);
    // Same panel summation as evaluate() so the dual update sees the optimized quantity.
    Vec2 pos = traj.parts[p].start_local;
    for (int i = traj.parts[p].first_segment; i < traj.parts[p].first_segment + traj.parts[p].segment_count; ++i) {
      pos += simpson_displacement(traj.spline.coeffs[i], traj.spline.durations[i], traj.parts[p].delta_theta,
                                  config_.n_quad);
    }
    out.col(p) = pos - target;
  }
  return out;
}

std::pair<PlanningProblem, Eigen::VectorXd> initial_guess(const PathResult& path,
                                                         const std::vector<TraversablePlane>& planes,
                                                         const RobotLimits& limits, const OptimizerConfig& config) {
  PlanningProblem prob;
  prob.planes = path.planes;
  for (const Crossing& c : path.crossings) prob.crossing_segments.push_back(c.segment);
  prob.start_local = path.polylines.front().front();
  prob.goal_local = path.polylines.back().back();

  std::vector<Vec2> q;
  std::vector<double> T;
  double s_before = 0.0;
  double theta_prev = 0.0;
  bool have_theta = false;
  const int parts = static_cast<int>(path.planes.size());
  for (int p = 0; p < parts; ++p) {
    const auto& poly = path.polylines[p];
    const double dtheta = planes[path.planes[p]].frame.yaw_offset();
    const double len = polyline_length(poly);
    const int pieces = std::max(2, static_cast<int>(std::ceil(len / config.segment_length - 1e-9)));
    prob.segments_per_part.push_back(pieces);
    auto theta_at = [&](double s) {
      const double raw = heading_at(poly, s) + dtheta;
      const double th = have_theta ? unwrap_near(raw, theta_prev) : raw;
      theta_prev = th;
      have_theta = true;
      return th;
    };
    if (p == 0) prob.theta0 = theta_at(0.0);
    for (int k = 1; k <= pieces; ++k) {
      const double s = len * k / pieces;
      T.push_back(std::max(len / pieces / (0.5 * limits.v_max), 0.2));
      q.emplace_back(theta_at(std::min(s, std::max(0.0, len - 1e-9))), s_before + s);
    }
    s_before += len;
  }

  const int m = static_cast<int>(T.size());
  DecisionVector dv;
  dv.q.resize(2, m - 1);
  for (int i = 0; i < m - 1; ++i) dv.q.col(i) = q[i];
  dv.tail = q.back();
  dv.tau.resize(m);
  for (int i = 0; i < m; ++i) dv.tau(i) = tau_from_time(T[i]);
  dv.eta.resize(parts - 1);
  for (int k = 0; k < parts - 1; ++k) {
    const double lp = std::clamp(path.crossings[k].line_param, 1e-3, 1.0 - 1e-3);
    dv.eta(k) = std::log(lp / (1.0 - lp));
  }
  return {prob, dv.flatten()};
}

LbfgsResult minimize_lbfgs(const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& fn,
                           Eigen::VectorXd& x, int max_iterations, double grad_tol, double rel_decrease,
                           int memory) {
  constexpr double c1 = 1e-4, c2 = 0.9;
  LbfgsResult res;
  const int n = static_cast<int>(x.size());
  Eigen::VectorXd g(n), g_new(n), x_new(n), d(n);
  double fx = fn(x, g);
  ++res.evaluations;
  std::deque<Eigen::VectorXd> S, Y;
  std::deque<double> rho;
  std::deque<double> history{fx};

  auto safe_eval = [&](const Eigen::VectorXd& pt, Eigen::VectorXd& gr) {
    ++res.evaluations;
    try {
      return fn(pt, gr);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFiniteValue && e.code() != ErrorCode::SingularSystem) throw;
      return std::numeric_limits<double>::infinity();
    }
  };

  for (res.iterations = 0; res.iterations < max_iterations; ++res.iterations) {
    if (g.norm() <= grad_tol * std::max(1.0, x.norm())) {
      res.status = LbfgsResult::Converged;
      res.value = fx;
      return res;
    }
    // Two-loop recursion.
    d = -g;
    std::vector<double> alpha(S.size());
    for (int k = static_cast<int>(S.size()) - 1; k >= 0; --k) {
      alpha[k] = rho[k] * S[k].dot(d);
      d -= alpha[k] * Y[k];
    }
    if (!S.empty()) d *= S.back().dot(Y.back()) / Y.back().squaredNorm();
    for (std::size_t k = 0; k < S.size(); ++k) {
      const double beta = rho[k] * Y[k].dot(d);
      d += (alpha[k] - beta) * S[k];
    }
    double gd = g.dot(d);
    if (!(gd < 0.0)) {
      S.clear();
      Y.clear();
      rho.clear();
      d = -g;
      gd = g.dot(d);
    }

    // Weak Wolfe conditions by bracketing and bisection.
    double step = S.empty() ? std::min(1.0, 1.0 / d.norm()) : 1.0;
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    bool accepted = false;
    double f_new = fx;
    for (int trial = 0; trial < 60; ++trial) {
      x_new = x + step * d;
      f_new = safe_eval(x_new, g_new);
      if (!(f_new <= fx + c1 * step * gd)) {
        hi = step;
      } else if (g_new.dot(d) < c2 * gd) {
        lo = step;
      } else {
        accepted = true;
        break;
      }
      step = std::isinf(hi) ? 2.0 * step : 0.5 * (lo + hi);
      if (hi - lo < 1e-16 * std::max(1.0, step)) break;
    }
    if (!accepted) {
      // Keep a sufficient-decrease point if the curvature test never passed.
      if (lo > 0.0) {
        x_new = x + lo * d;
        f_new = safe_eval(x_new, g_new);
        if (f_new < fx) {
          x = x_new;
          fx = f_new;
          g = g_new;
        }
      }
      res.status = LbfgsResult::LineSearchFailed;
      res.value = fx;
      return res;
    }

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double rel_drop = (fx - f_new) / std::max(1.0, std::abs(fx));
    x = x_new;
    fx = f_new;
    g = g_new;
    const double sy = s.dot(y);
    if (sy > 1e-12 * y.squaredNorm()) {
      S.push_back(s);
      Y.push_back(y);
      rho.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > memory) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
    }
    history.push_back(fx);
    if (history.size() > 4) history.pop_front();
    if ((history.size() == 4 && (history.front() - fx) / std::max(1.0, std::abs(fx)) < rel_decrease) ||
        rel_drop < 1e-14) {
      res.status = LbfgsResult::Stalled;
      ++res.iterations;
      res.value = fx;
      return res;
    }
  }
  res.status = LbfgsResult::MaxIterations;
  res.value = fx;
  return res;
}

double DenseReport::worst() const {
  return std::max({max_velocity, max_moment, max_orientation, max_safety});
}

DenseReport dense_check(const CrossPlaneTrajectory& traj, const std::vector<TraversablePlane>& planes,
                        const RobotLimits& limits, double rate) {
  DenseReport rep;
  const MsSpline& sp = traj.spline;
  const int m = sp.pieces();

  // Joint continuity of sigma and its first two derivatives.
  for (int i = 0; i + 1 < m; ++i) {
    for (int d = 0; d <= 2; ++d) {
      const Vec2 left = eval_segment(sp.coeffs[i], sp.durations[i], d);
      const Vec2 right = eval_segment(sp.coeffs[i + 1], 0.0, d);
      rep.joint_gap = std::max(rep.joint_gap, (left - right).cwiseAbs().maxCoeff());
    }
  }

  // Position at the start of every segment, per part.
  std::vector<Vec2> seg_start(m);
  std::vector<double> seg_t0(m);
  double t_acc = 0.0;
  for (std::size_t p = 0; p < traj.parts.size(); ++p) {
    const TrajectoryPart& part = traj.parts[p];
    Vec2 pos = part.start_local;
    for (int i = part.first_segment; i < part.first_segment + part.segment_count; ++i) {
      seg_start[i] = pos;
      seg_t0[i] = t_acc;
      pos += simpson_displacement(sp.coeffs[i], sp.durations[i], part.delta_theta, traj.n_quad);
      t_acc += sp.durations[i];
    }
    if (p + 1 < traj.parts.size()) {
      const Vec3 end = part.frame.to_world(pos);
      const Vec3 next = traj.parts[p + 1].frame.to_world(traj.parts[p + 1].start_local);
      rep.crossing_gap = std::max(rep.crossing_gap, (end - next).norm());
      const int i = part.first_segment + part.segment_count - 1;
      const Vec2 left = eval_segment(sp.coeffs[i], sp.durations[i], 1);
      const Vec2 right = eval_segment(sp.coeffs[i + 1], 0.0, 1);
      rep.crossing_rate_gap = std::max(rep.crossing_rate_gap, (left - right).cwiseAbs().maxCoeff());
    }
  }

  std::vector<int> part_of(m);
  for (std::size_t p = 0; p < traj.parts.size(); ++p) {
    for (int k = 0; k < traj.parts[p].segment_count; ++k) part_of[traj.parts[p].first_segment + k] = static_cast<int>(p);
  }

  const double total = sp.total_duration();
  const int n = std::max(1, static_cast<int>(std::ceil(total * rate)));
  int i = 0;
  for (int k = 0; k <= n; ++k) {
    const double t = std::min(total, k / rate);
    while (i + 1 < m && t > seg_t0[i] + sp.durations[i]) ++i;
    const double local_t = std::clamp(t - seg_t0[i], 0.0, sp.durations[i]);
    const TrajectoryPart& part = traj.parts[part_of[i]];
    const Vec2 local = seg_start[i] + simpson_displacement(sp.coeffs[i], local_t, part.delta_theta, traj.n_quad);
    const Vec2 s0 = eval_segment(sp.coeffs[i], local_t, 0);
    const Vec2 s1 = eval_segment(sp.coeffs[i], local_t, 1);
    const TraversablePlane& plane = planes.at(part.plane);
    const Residuals r = state_residuals(s0(0), s1(0), s1(1), local, plane, limits);
    auto track = [t](double value, double& best, double& when) {
      if (value > best) {
        best = value;
        when = t;
      }
    };
    track(r.velocity, rep.max_velocity, rep.t_velocity);
    track(r.moment, rep.max_moment, rep.t_moment);
    track(r.orientation, rep.max_orientation, rep.t_orientation);
    track(r.safety, rep.max_safety, rep.t_safety);
    const double theta_p = s0(0) - plane.frame.yaw_offset();
    const double vlim = velocity_limit(theta_p, plane.inclination, s1(1) >= 0.0, limits);
    rep.max_diamond = std::max(rep.max_diamond, std::abs(s1(1)) / vlim + std::abs(s1(0)) / limits.omega_max);
    rep.surface_deviation = std::max(rep.surface_deviation, std::abs(plane.frame.height(part.frame.to_world(local))));
    ++rep.samples;
  }
  return rep;
}

SolveResult solve_trajectory(const PathResult& path, const std::vector<TraversablePlane>& planes,
                             const RobotLimits& limits, const OptimizerConfig& config) {
  auto [problem, x] = initial_guess(path, planes, limits, config);
  TrajectoryObjective objective(problem, planes, limits, config);
  const int parts = problem.parts();

  DualState dual;
  dual.lambda = Eigen::Matrix2Xd::Zero(2, parts);
  dual.rho = config.rho0;

  SolveResult out;
  {
    Eigen::VectorXd g;
    CostBreakdown b;
    objective.evaluate(x, dual, g, &b);
    out.initial_cost = b.cost();
  }

  int outer_total = 0;
  for (int escalation = 0; escalation <= config.max_escalations; ++escalation) {
    out.converged = false;
    for (int outer = 0; outer < config.max_outer; ++outer, ++outer_total) {
      auto fn = [&](const Eigen::VectorXd& v, Eigen::VectorXd& g) { return objective.evaluate(v, dual, g); };
      const LbfgsResult inner = minimize_lbfgs(fn, x, config.max_inner, config.grad_tol, config.inner_rel_decrease);
      const Eigen::Matrix2Xd cf = objective.final_errors(x);
      const double err = cf.colwise().norm().maxCoeff();
      out.log.push_back(OuterLog{outer_total, err, dual.rho, inner.iterations, inner.value, escalation});
      if (err < config.e_max && inner.status != LbfgsResult::MaxIterations) {
        out.converged = true;
        out.final_error = err;
        break;
      }
      out.final_error = err;
      dual.lambda += dual.rho * cf;
      dual.rho = std::min(config.rho_gamma * dual.rho, config.rho_max);
    }
    out.trajectory = objective.assemble(x);
    out.check = dense_check(out.trajectory, planes, limits, config.check_rate);
    out.constraints_ok = out.check.worst() <= config.tol_cons;
    if (!out.converged || out.constraints_ok) break;
    objective.scale_penalties(10.0);
  }

  Eigen::VectorXd g;
  CostBreakdown b;
  DualState zero{Eigen::Matrix2Xd::Zero(2, parts), dual.rho};
  objective.evaluate(x, zero, g, &b);
  out.final_cost = b.jerk + b.time + b.penalty / objective.penalty_scale();
  return out;
}

}  // namespace planeway
