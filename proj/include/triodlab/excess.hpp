#pragma once

// Space-time L2 excess to triple junctions, frame fitting, dyadic decay, junction tracking and
// the quantitative smallness diagnostics. All window quantities are evaluated in
// window-normalized coordinates ((x - c) / R, (t - s) / R^2), so they are invariant under
// parabolic rescaling.

#include <optional>
#include <string>
#include <vector>

#include "triodlab/monotone.hpp"

namespace triodlab {

struct Window {
  Point2 center{};
  double s = 0.0;
  double R = 1.0;
};

/// Window validity: B_{4R}(center) free of curve ends other than junctions, and
/// [s - 2R^2, s + 2R^2] inside the trajectory's time range. Raises Error describing the window.
void check_window(const FlowTrajectory& traj, const Window& w);

/// Snapshot of a window in normalized coordinates with its trapezoid weight.
struct NormalizedSlice {
  double t = 0.0;       // (t - s) / R^2
  double weight = 0.0;  // trapezoid weight in normalized time
  Network net;          // (x - center) / R
};

/// Normalized snapshots with t in [t_lo, t_hi] (normalized time), with trapezoid weights.
std::vector<NormalizedSlice> normalized_slices(const FlowTrajectory& traj, const Window& w, double t_lo, double t_hi);

double l2_excess(const FlowTrajectory& traj, const Window& w, const TriodFrame& frame);

double u_norm(const FlowTrajectory& traj, const Window& w, const ForcingField& forcing);

struct FitConfig {
  double theta_step = std::numbers::pi / 60.0;
  double xi_step = 1.0 / 20.0;  // in units of R
  int candidates = 3;           // coarse minima refined locally
  double tolerance = 1e-10;     // simplex size at which refinement stops (normalized units)
  int max_iterations = 5000;
};

struct FitResult {
  TriodFrame frame;
  double mu = 0.0;
};

FitResult fit_frame(const FlowTrajectory& traj, const Window& w, const FitConfig& config = {});

struct DecayEntry {
  double scale = 0.0;
  TriodFrame frame;
  double mu = 0.0;
  double drift = 0.0;  // d_{scale}(frame, frame at the first scale)
};

struct DecayProfile {
  Point2 center{};
  double s = 0.0;
  std::vector<DecayEntry> entries;
  double exponent = 0.0;
  bool exponent_defined = true;  // false when every mu is at the noise floor
};

inline constexpr double kExcessNoiseFloor = 1e-5;

DecayProfile decay_profile(const FlowTrajectory& traj, const Point2& center, double s,
                           const std::vector<double>& scales, const FitConfig& config = {});

struct JunctionTrack {
  std::vector<double> times;
  std::vector<Point2> positions;
  std::vector<bool> gaps;
};

struct TrackConfig {
  double tau = 1e-4;  // kernel scale of the density search for untagged data
  int grid = 41;      // density grid per axis inside the region
};

JunctionTrack track_junctions(const FlowTrajectory& traj, const Ball& region, const TrackConfig& config = {});

struct HolderFit {
  double exponent = 0.0;
  double constant = 0.0;
  bool infinite_regularity = false;  // every pair below the displacement floor
  std::size_t pairs_used = 0;
  std::size_t pairs_below_floor = 0;
  std::size_t pairs_below_gap = 0;
};

inline constexpr double kHolderFloor = 1e-12;

HolderFit holder_exponent(const JunctionTrack& track, double t_min_gap);

/// Default gap: four times the median spacing of the non-gap samples.
double default_holder_gap(const JunctionTrack& track);

struct CurvatureEnergy {
  double mass_defect_sup = 0.0;
  double energy = 0.0;
};

/// Interior snapshots with normalized time in [-1, 1], clipped to the data.
CurvatureEnergy curvature_energy(const FlowTrajectory& traj, const Window& w);

/// Snapshots of the window before t0 (excluding those within one snapshot spacing of t0).
double shrinker_energy(const FlowTrajectory& traj, double t0, const Window& w);

struct NonconResult {
  double value = 0.0;
  double t_worst = 0.0;
};

/// Sup over snapshots with t0 - horizon*R^2 <= t < t0 (one spacing guard) of
/// ((t0 - t)/R^2)^{-kappa} * sum rho * dist^2 * weight over B_{3/4}, in coordinates scaled by R.
NonconResult weighted_noncon(const FlowTrajectory& traj, double t0, const Point2& center, double kappa,
                             const TriodFrame& frame, double R = 1.0, double horizon = 1.0);

struct GraphSamples {
  bool ok = false;
  std::string reason;
  std::vector<double> x;
  std::vector<double> f;
};

/// Samples of ray j (1-based) of the frame as a graph over [a, b] (frame coordinates), requiring a
/// single-valued graph inside the strip |y| <= height.
GraphSamples graph_extract(const Network& net, const TriodFrame& frame, int j, double a, double b, int samples,
                           double height = 0.5);

/// One-sided slope at the junction of curve j in frame coordinates (first segment of the curve
/// leaving the junction nearest the frame origin).
std::optional<double> junction_slope(const Network& net, const TriodFrame& frame, int j);

struct HeatResidual {
  double raw = 0.0;         // L2 norm of f_t - f_xx over the normalized window
  double mu = 0.0;          // fitted excess of the window
  double normalized = 0.0;  // raw / mu (raw when mu is at the noise floor)
};

/// Graph strip height is R/2; the fitted excess comes from fit_frame on the window.
HeatResidual heat_residual(const FlowTrajectory& traj, const TriodFrame& frame, int j, double a, double b,
                           const Window& w, double spacing = 0.01);

/// Minimum over the best component of (dist(x, J1) + dist(x, J2)) / |xi|.
double two_triod_gap(const TriodFrame& frame1, const TriodFrame& frame2);

}  // namespace triodlab
