#pragma once

#include <utility>
#include <vector>

namespace planeway {

struct ExtractionConfig {
  double voxel = 0.05;                   // m
  int k_neighbors = 20;
  double outlier_std_ratio = 2.0;
  double angle_threshold_deg = 10.0;
  double dist_threshold = 0.05;          // m
  int min_segment_points = 50;
  double traversable_max_inclination_deg = 40.0;
  double ground_max_inclination_deg = 5.0;  // below this a traversable plane is Ground, else Slope
  double thickness_gap = 0.1;            // m
  double gap_threshold = 0.2;            // m, horizontal gap between consecutive treads
  double tread_max_depth = 0.6;          // m, narrow side of a tread candidate
  double tread_max_inclination_deg = 10.0;
  double rise_min = 0.05;                // m
  double rise_max = 0.3;                 // m
  double rise_regularity = 0.3;          // relative deviation allowed from the chain median
  double expand_margin = 0.1;            // m, boundary expansion (one grid cell)
  double min_interline_length = 0.4;     // m
  double alpha = 0.2;                    // m, alpha-shape radius for vertical planes
  double same_size_ratio_min = 0.8;
  double same_size_ratio_max = 1.25;
};

struct MappingConfig {
  double resolution = 0.1;         // m/cell
  double clearance_height = 1.0;   // m
  double interline_halfwidth = 0.35;  // m, half width of the crossing band
};

struct GraphConfig {
  double projection_max_dist = 1.5;  // m
};

/// Piecewise-linear ratio table over inclination (degrees), clamped at the ends.
struct RatioTable {
  std::vector<std::pair<double, double>> knots;  // (psi_deg, ratio), ascending psi

  double operator()(double psi_rad) const;
};

struct RobotLimits {
  double v_max = 1.0;       // m/s
  double omega_max = 1.5;   // rad/s, rotating in place
  double theta_s = 0.3;     // rad, max heading deviation on stairs
  double d_s = 0.15;        // m, safety distance
  RatioTable r_rise{{{0.0, 1.0}, {45.0, 0.1}}};
  RatioTable r_decline{{{0.0, 1.0}, {45.0, 0.4375}}};
};

struct OptimizerConfig {
  double weight_theta = 1.0;  // W diagonal
  double weight_s = 1.0;
  double eps_T = 32.0;
  double w_vel = 1e3;
  double w_mom = 1e3;
  double w_orient = 1e4;
  double w_safe = 1e3;
  double rho0 = 1.0;
  double rho_gamma = 2.0;
  double rho_max = 1e5;
  double e_max = 0.01;        // m
  int max_outer = 30;
  int max_inner = 200;
  int n_cons = 8;             // constraint samples per segment
  int n_quad = 16;            // Simpson subintervals per segment
  double segment_length = 0.5;  // m of searched path per initial segment
  double grad_tol = 1e-5;
  double inner_rel_decrease = 1e-5;  // L-BFGS stops when three iterations gain less than this
  double constraint_margin = 0.05;  // relative tightening used inside the penalties
  double safety_margin = 0.03;      // m added to d_s inside the penalty
  double tol_cons = 1e-3;
  int max_escalations = 4;          // penalty weight x10 retries when dense checks fail
  double check_rate = 1000.0;       // Hz
};

struct RunConfig {
  int version = 1;
  ExtractionConfig extraction;
  MappingConfig mapping;
  GraphConfig graph;
  RobotLimits robot;
  OptimizerConfig optimizer;
};

}  // namespace planeway
