#pragma once

// Discrete varifolds built from networks, test functions, first variation and the
// integrated Brakke inequality.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "triodlab/flowsim.hpp"

namespace triodlab {

struct Ball {
  Point2 center{};
  double radius = 1.0;
  bool contains(const Point2& p) const { return norm2(p - center) <= radius * radius; }
};

/// One (midpoint, tangent, weight) atom per polyline segment.
struct Atom {
  Point2 midpoint{};
  Point2 tangent{1.0, 0.0};
  double weight = 0.0;  // segment length times multiplicity
  int multiplicity = 1;
};

struct DiscreteVarifold {
  std::vector<Atom> atoms;
  double mass() const;
};

/// Atom augmented with the generalized curvature on its segment.
struct CurvedAtom {
  Point2 midpoint{};
  Point2 tangent{1.0, 0.0};
  double weight = 0.0;
  Point2 curvature{};
};

/// Clips segment [a, b] to the ball; returns the parameter interval inside, if any.
std::optional<std::pair<double, double>> clip_segment(const Point2& a, const Point2& b, const Ball& ball);

DiscreteVarifold to_varifold(const Network& net, std::optional<Ball> clip = std::nullopt);

/// Restricts the atoms to a ball by rebuilding their segments.
DiscreteVarifold restrict_to(const DiscreteVarifold& v, const Ball& ball);

/// Atoms with segment curvature (mean of the discrete curvature at the two end nodes;
/// a node without a value borrows its neighbour's).
std::vector<CurvedAtom> curved_atoms(const Network& net, std::optional<Ball> clip = std::nullopt);

using ScalarField = std::function<double(const Point2&)>;

struct Mat2 {
  double xx = 0.0, xy = 0.0, yx = 0.0, yy = 0.0;  // xy = d g_x / d y
};

struct VectorField {
  std::function<Point2(const Point2&)> value;
  std::function<Mat2(const Point2&)> jacobian;
};

/// Space-time test function phi(x, t) with its spatial gradient and time derivative.
struct SpaceTimeTest {
  std::function<double(const Point2&, double)> value;
  std::function<Point2(const Point2&, double)> gradient;
  std::function<double(const Point2&, double)> time_derivative;

  static SpaceTimeTest constant_one();
  /// phi_rad((x - center) / radius), independent of time.
  static SpaceTimeTest radial(Point2 center, double radius);
};

enum class TestKind { phi_hat, phi_j, phi_rad };

struct TestFunction {
  TestKind kind = TestKind::phi_hat;
  std::function<double(const Point2&)> value;
  std::function<Point2(const Point2&)> gradient;

  double operator()(const Point2& x) const { return value(x); }
};

/// Radial bump: 1 on B_{1/4}, 0 off B_{1/2}, gradient at most 7.5.
TestFunction phi_hat();
/// phi_hat centred at distance R along ray j (1-based) of the frame, scaled by R.
TestFunction phi_j(int j, const TriodFrame& frame, double R);
/// Radial cutoff: 1 on B_1, supported in B_{3/2}, gradient at most 3.75.
TestFunction phi_rad();

/// Quintic smoothstep 6t^5 - 15t^4 + 10t^3 on [0, 1], clamped outside; the shared mollifier profile.
double smoothstep(double t);
double smoothstep_derivative(double t);

/// Integral of phi_rad^2 over the standard triod (= 3 * (1 + 181/924)).
inline constexpr double kPhiRadMass = 1105.0 / 308.0;
/// Integral of phi_hat along a line through its centre.
inline constexpr double kPhiHatLine = 0.75;

double weigh(const DiscreteVarifold& v, const ScalarField& phi);
double weigh(const DiscreteVarifold& v, const TestFunction& phi);

/// Sum over atoms of tangent . (Dg tangent) * weight.
double first_variation(const DiscreteVarifold& v, const VectorField& g);

/// The forcing term B(V, u, phi) of one snapshot; nullopt encodes the value minus infinity
/// (a junction out of balance, or a curve end, inside the support of phi).
std::optional<double> brakke_forcing_term(const Network& net, const ForcingField& forcing, double t,
                                          const SpaceTimeTest& phi);

struct BrakkeResidual {
  double lhs = 0.0;  // ||V_t2||(phi) - ||V_t1||(phi)
  double rhs = 0.0;  // time integral of B + d phi / dt
  bool integrable = true;
  /// lhs - rhs; +infinity when some B was not integrable.
  double value() const;
};

BrakkeResidual brakke_residual(const FlowTrajectory& traj, const SpaceTimeTest& phi, double t1, double t2);

struct LengthDefect {
  double defect1 = 0.0;      // H^1(spt V in B_1) - 3
  double defect2 = 0.0;      // ||V||(phi_rad^2) - c
  double bound_scale = 0.0;  // alpha*mu + beta^2, the quantity both defects are compared against
};

LengthDefect length_defect(const DiscreteVarifold& v, double mu_hat, double alpha_hat, double beta_hat);

/// Best constant E1 with ||V_t||(B_r(x)) <= 2 r E1 over snapshots, sampled node centres and the given radii.
double measured_e1(const FlowTrajectory& traj, const std::vector<double>& radii, int max_centers = 200);

}  // namespace triodlab
