#pragma once

// Backwards heat kernel, Gaussian densities, parabolic rescaling, tangent-flow
// classification and stratification.

#include <optional>
#include <string>
#include <vector>

#include "triodlab/varifold.hpp"

namespace triodlab {

/// (4 pi (s - t))^{-1/2} exp(-|x - y|^2 / (4 (s - t))); requires t < s.
double rho(const Point2& y, double s, const Point2& x, double t);

/// Network at time t: the snapshot itself, a linear blend of the bracketing snapshots when
/// they share their structure, or the nearer of the two otherwise.
struct SnapshotSample {
  Network net;
  double gap = 0.0;  // spacing of the bracketing snapshots (0 at an exact single snapshot)
};
SnapshotSample snapshot_at(const FlowTrajectory& traj, double t);

/// Gaussian mass of the snapshot at s - tau about (y, s), truncated to B_{R_trunc}(y).
/// R_trunc defaults to 6 sqrt(tau). Raises Error when tau is below twice the local snapshot spacing.
double gaussian_density(const FlowTrajectory& traj, const Point2& y, double s, double tau,
                        std::optional<double> r_trunc = std::nullopt);

/// Gaussian mass of one network about (y, s) with the network taken at time t < s.
double gaussian_mass(const Network& net, const Point2& y, double s, double t, double r_trunc);

struct DensityProfile {
  Point2 center{};
  double s = 0.0;
  std::vector<double> taus;  // strictly decreasing
  std::vector<double> values;
  double extrapolated = 0.0;  // Richardson with ratio 2 on the last two values
  bool monotone = true;       // values(tau1) >= values(tau2) - 1e-3 whenever tau1 > tau2
  double worst_increase = 0.0;
};

DensityProfile density_limit(const FlowTrajectory& traj, const Point2& y, double s, const std::vector<double>& taus);

/// Times (t - s) / lambda^2, coordinates (x - y) / lambda, forcing rescaled to match.
FlowTrajectory parabolic_rescale(const FlowTrajectory& traj, const Point2& y, double s, double lambda);

enum class TangentKind {
  empty,
  static_line,
  static_triple_junction,
  static_density_ge2,
  quasi_static,
  shrinking,
  unresolved
};

std::string to_string(TangentKind kind);

struct TangentLabel {
  TangentKind kind = TangentKind::unresolved;
  double theta_star = 0.0;
  double static_score = 0.0;  // 1 / (1 + d_H / static_tol); static iff >= 1/2
  int spine_dim_estimate = 0;
  double hausdorff = 0.0;  // rescaled support distance behind the score
  DensityProfile profile;

  bool is_static() const { return static_score >= 0.5; }
  /// 2 + spine dimension for static labels, the spine dimension otherwise.
  int dimension() const;
};

struct ClassifyConfig {
  double tau0 = 0.004;        // densities at tau0, tau0/2, tau0/4
  double static_tol = 0.05;   // Hausdorff distance declaring two rescaled supports equal
  double shrink_tol = 0.1;    // self-similarity tolerance for the shrinking label
  double spine_tol = 0.1;     // density drop tolerated along the spine
  double quasi_drop = 0.4;    // density loss across s that marks a quasi-static flow
  double regular_below = 1.25;
  double junction_below = 1.75;
  double singular_from = 1.9;
};

/// Raises Error when s - tau0 is before the first snapshot.
TangentLabel classify_tangent(const FlowTrajectory& traj, const Point2& y, double s, const ClassifyConfig& config = {});

/// Symmetric Hausdorff distance of the supports of a and b inside B_radius(center); points of one
/// set are compared with the other set inside the larger ball B_{radius + margin}.
/// Empty against empty is 0; empty against non-empty is +infinity.
double support_distance(const Network& a, const Network& b, const Point2& center, double radius, double margin);

struct SpaceTimeGrid {
  Point2 lo{};
  Point2 hi{};
  double t_lo = 0.0;
  double t_hi = 0.0;
  int nx = 1;
  int ny = 1;
  int nt = 1;
};

struct StratumPoint {
  Point2 y{};
  double s = 0.0;
  TangentLabel label;
  int dimension = 0;
};

/// Candidates per grid cell and time (junction centroid, single junction, or the node nearest the
/// cell centre); those with extrapolated density >= config.regular_below are classified, and at
/// each time only the densest point within sqrt(tau0) is kept.
std::vector<StratumPoint> stratify(const FlowTrajectory& traj, const SpaceTimeGrid& grid,
                                   const ClassifyConfig& config = {});

}  // namespace triodlab
