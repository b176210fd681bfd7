#include "triodlab/varifold.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/core.h>
#include <limits>
#include <numbers>

namespace triodlab {

namespace {

constexpr double kHerringTolerance = 1e-6;

// Radial profile 1 - S((r - r0) * k) with gradient.
struct RadialProfile {
  double r0;
  double k;

  double value(const Point2& x) const { return 1.0 - smoothstep((norm(x) - r0) * k); }
  Point2 gradient(const Point2& x) const {
    const double r = norm(x);
    if (r == 0.0) return {};
    return (-k * smoothstep_derivative((r - r0) * k) / r) * x;
  }
};

constexpr RadialProfile kHat{0.25, 4.0};
constexpr RadialProfile kRad{1.0, 2.0};

// Curvature per node; nodes without an interior stencil (or with degenerate spacing) are empty.
std::vector<std::optional<Point2>> node_curvatures(const Curve& curve) {
  const std::size_t n = curve.nodes.size();
  std::vector<std::optional<Point2>> out(n);
  if (n < 3) return out;
  const auto& X = curve.nodes;
  for (std::size_t i = 0; i < n; ++i) {
    if (!curve.closed && (i == 0 || i + 1 == n)) continue;
    const std::size_t im = (i + n - 1) % n;
    const std::size_t ip = (i + 1) % n;
    const double a = distance(X[i], X[im]);
    const double b = distance(X[ip], X[i]);
    if (a <= 0.0 || b <= 0.0) continue;
    out[i] = 2.0 * ((X[ip] - X[i]) / b - (X[i] - X[im]) / a) / (a + b);
  }
  return out;
}

double junction_balance(const Network& net, int id, const Point2& pos) {
  Point2 sum{};
  for (const auto& [c, e] : junction_ends(net, id)) {
    const auto& nodes = net.curves[static_cast<std::size_t>(c)].nodes;
    if (nodes.size() < 2) continue;
    const Point2 next = e == 0 ? nodes[1] : nodes[nodes.size() - 2];
    const Point2 d = next - pos;
    const double len = norm(d);
    if (len > 0.0) sum += d / len;
  }
  return norm(sum);
}

}  // namespace

double smoothstep(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

double smoothstep_derivative(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  const double u = t * (1.0 - t);
  return 30.0 * u * u;
}

double DiscreteVarifold::mass() const {
  double m = 0.0;
  for (const auto& a : atoms) m += a.weight;
  return m;
}

std::optional<std::pair<double, double>> clip_segment(const Point2& a, const Point2& b, const Ball& ball) {
  const Point2 d = b - a;
  const Point2 f = a - ball.center;
  const double A = norm2(d);
  const double r2 = ball.radius * ball.radius;
  if (A == 0.0) {
    if (norm2(f) <= r2) return std::pair{0.0, 1.0};
    return std::nullopt;
  }
  const double B = 2.0 * dot(f, d);
  const double C = norm2(f) - r2;
  const double disc = B * B - 4.0 * A * C;
  if (disc <= 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  // Numerically stable roots.
  const double qq = -0.5 * (B + std::copysign(sq, B));
  double t0 = qq / A;
  double t1 = qq != 0.0 ? C / qq : -t0;
  if (t0 > t1) std::swap(t0, t1);
  const double lo = std::max(0.0, t0);
  const double hi = std::min(1.0, t1);
  if (!(hi > lo)) return std::nullopt;
  return std::pair{lo, hi};
}

DiscreteVarifold to_varifold(const Network& net, std::optional<Ball> clip) {
  DiscreteVarifold v;
  for (const auto& curve : net.curves) {
    for (std::size_t k = 0; k < curve.segment_count(); ++k) {
      auto [a, b] = curve.segment(k);
      const double len = distance(a, b);
      if (len == 0.0) continue;
      const Point2 tangent = (b - a) / len;
      if (clip) {
        auto range = clip_segment(a, b, *clip);
        if (!range) continue;
        const Point2 p = a + range->first * (b - a);
        const Point2 q = a + range->second * (b - a);
        v.atoms.push_back({0.5 * (p + q), tangent, (range->second - range->first) * len, 1});
      } else {
        v.atoms.push_back({0.5 * (a + b), tangent, len, 1});
      }
    }
  }
  return v;
}

DiscreteVarifold restrict_to(const DiscreteVarifold& v, const Ball& ball) {
  DiscreteVarifold out;
  for (const auto& atom : v.atoms) {
    const double len = atom.weight / atom.multiplicity;
    const Point2 a = atom.midpoint - 0.5 * len * atom.tangent;
    const Point2 b = atom.midpoint + 0.5 * len * atom.tangent;
    auto range = clip_segment(a, b, ball);
    if (!range) continue;
    const Point2 p = a + range->first * (b - a);
    const Point2 q = a + range->second * (b - a);
    out.atoms.push_back(
        {0.5 * (p + q), atom.tangent, (range->second - range->first) * atom.weight, atom.multiplicity});
  }
  return out;
}

std::vector<CurvedAtom> curved_atoms(const Network& net, std::optional<Ball> clip) {
  std::vector<CurvedAtom> out;
  for (const auto& curve : net.curves) {
    const auto kappa = node_curvatures(curve);
    const std::size_t n = curve.nodes.size();
    for (std::size_t k = 0; k < curve.segment_count(); ++k) {
      auto [a, b] = curve.segment(k);
      const double len = distance(a, b);
      if (len == 0.0) continue;
      const auto& ka = kappa[k];
      const auto& kb = kappa[(k + 1) % n];
      Point2 h{};
      if (ka && kb) {
        h = 0.5 * (*ka + *kb);
      } else if (ka) {
        h = *ka;
      } else if (kb) {
        h = *kb;
      }
      const Point2 tangent = (b - a) / len;
      if (clip) {
        auto range = clip_segment(a, b, *clip);
        if (!range) continue;
        const Point2 p = a + range->first * (b - a);
        const Point2 q = a + range->second * (b - a);
        out.push_back({0.5 * (p + q), tangent, (range->second - range->first) * len, h});
      } else {
        out.push_back({0.5 * (a + b), tangent, len, h});
      }
    }
  }
  return out;
}

SpaceTimeTest SpaceTimeTest::constant_one() {
  return {[](const Point2&, double) { return 1.0; }, [](const Point2&, double) { return Point2{}; },
          [](const Point2&, double) { return 0.0; }};
}

SpaceTimeTest SpaceTimeTest::radial(Point2 center, double radius) {
  if (!(radius > 0.0)) throw Error("radial test function: radius must be positive");
  return {[=](const Point2& x, double) { return kRad.value((x - center) / radius); },
          [=](const Point2& x, double) { return kRad.gradient((x - center) / radius) / radius; },
          [](const Point2&, double) { return 0.0; }};
}

TestFunction phi_hat() {
  return {TestKind::phi_hat, [](const Point2& x) { return kHat.value(x); },
          [](const Point2& x) { return kHat.gradient(x); }};
}

TestFunction phi_j(int j, const TriodFrame& frame, double R) {
  if (j < 1 || j > 3) throw Error(fmt::format("phi_j: ray index {} not in 1..3", j));
  if (!(R > 0.0)) throw Error("phi_j: R must be positive");
  const Point2 c = frame.xi() + R * frame.ray(j - 1);
  return {TestKind::phi_j, [=](const Point2& x) { return kHat.value((x - c) / R); },
          [=](const Point2& x) { return kHat.gradient((x - c) / R) / R; }};
}

TestFunction phi_rad() {
  return {TestKind::phi_rad, [](const Point2& x) { return kRad.value(x); },
          [](const Point2& x) { return kRad.gradient(x); }};
}

double weigh(const DiscreteVarifold& v, const ScalarField& phi) {
  double s = 0.0;
  for (const auto& a : v.atoms) s += phi(a.midpoint) * a.weight;
  return s;
}

double weigh(const DiscreteVarifold& v, const TestFunction& phi) { return weigh(v, ScalarField(phi.value)); }

double first_variation(const DiscreteVarifold& v, const VectorField& g) {
  double s = 0.0;
  for (const auto& a : v.atoms) {
    const Mat2 D = g.jacobian(a.midpoint);
    const Point2 t = a.tangent;
    const Point2 Dt{D.xx * t.x + D.xy * t.y, D.yx * t.x + D.yy * t.y};
    s += dot(t, Dt) * a.weight;
  }
  return s;
}

std::optional<double> brakke_forcing_term(const Network& net, const ForcingField& forcing, double t,
                                          const SpaceTimeTest& phi) {
  for (const auto& [id, pos] : net.junctions) {
    if (phi.value(pos, t) > 0.0 && junction_balance(net, id, pos) > kHerringTolerance) return std::nullopt;
  }
  for (const auto& curve : net.curves) {
    if (curve.closed || curve.nodes.empty()) continue;
    for (int e = 0; e < 2; ++e) {
      if (curve.ends[static_cast<std::size_t>(e)].kind == EndKind::junction) continue;
      const Point2& p = e == 0 ? curve.nodes.front() : curve.nodes.back();
      if (phi.value(p, t) > 0.0) return std::nullopt;
    }
  }
  double s = 0.0;
  for (const auto& a : curved_atoms(net)) {
    const double f = phi.value(a.midpoint, t);
    const Point2 g = phi.gradient(a.midpoint, t);
    if (f == 0.0 && g == Point2{}) continue;
    Point2 u = forcing.is_zero() ? Point2{} : forcing(a.midpoint, t);
    u -= dot(u, a.tangent) * a.tangent;
    s += dot(-f * a.curvature + g, a.curvature + u) * a.weight;
  }
  return s;
}

double BrakkeResidual::value() const {
  if (!integrable) return std::numeric_limits<double>::infinity();
  return lhs - rhs;
}

BrakkeResidual brakke_residual(const FlowTrajectory& traj, const SpaceTimeTest& phi, double t1, double t2) {
  if (traj.snapshots.empty()) throw Error("brakke_residual: empty trajectory");
  if (!(t1 < t2)) throw Error(fmt::format("brakke_residual: need t1 < t2 (got {}, {})", t1, t2));
  const double span = traj.t_last() - traj.t_first();
  const double tol = 1e-9 * std::max(1.0, std::abs(span));
  if (t1 < traj.t_first() - tol || t2 > traj.t_last() + tol) {
    throw Error(fmt::format("brakke_residual: [{}, {}] outside trajectory range [{}, {}]", t1, t2, traj.t_first(),
                            traj.t_last()));
  }
  std::vector<const Snapshot*> snaps;
  for (const auto& s : traj.snapshots) {
    if (s.t >= t1 - tol && s.t <= t2 + tol) snaps.push_back(&s);
  }
  if (snaps.size() < 2) throw Error("brakke_residual: fewer than two snapshots inside [t1, t2]");

  // Stride check: every gap, including the ends, within 1.5 times the median gap.
  std::vector<double> gaps;
  for (std::size_t k = 1; k < snaps.size(); ++k) gaps.push_back(snaps[k]->t - snaps[k - 1]->t);
  std::vector<double> sorted = gaps;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
  const double median = sorted[sorted.size() / 2];
  const double limit = 1.5 * median + tol;
  for (std::size_t k = 0; k < gaps.size(); ++k) {
    if (gaps[k] > limit) {
      throw Error(fmt::format("brakke_residual: missing snapshots between t = {} and t = {}", snaps[k]->t,
                              snaps[k + 1]->t));
    }
  }
  if (snaps.front()->t - t1 > limit || t2 - snaps.back()->t > limit) {
    throw Error("brakke_residual: snapshots do not reach the ends of [t1, t2]");
  }

  auto mass = [&](const Snapshot& s) {
    double m = 0.0;
    for (const auto& a : to_varifold(s.net).atoms) m += phi.value(a.midpoint, s.t) * a.weight;
    return m;
  };
  BrakkeResidual r;
  r.lhs = mass(*snaps.back()) - mass(*snaps.front());

  std::vector<double> integrand(snaps.size());
  for (std::size_t k = 0; k < snaps.size(); ++k) {
    const auto& s = *snaps[k];
    auto b = brakke_forcing_term(s.net, traj.forcing, s.t, phi);
    if (!b) {
      r.integrable = false;
      return r;
    }
    double dphi = 0.0;
    for (const auto& a : to_varifold(s.net).atoms) dphi += phi.time_derivative(a.midpoint, s.t) * a.weight;
    integrand[k] = *b + dphi;
  }
  for (std::size_t k = 1; k < snaps.size(); ++k) {
    r.rhs += 0.5 * (snaps[k]->t - snaps[k - 1]->t) * (integrand[k] + integrand[k - 1]);
  }
  return r;
}

LengthDefect length_defect(const DiscreteVarifold& v, double mu_hat, double alpha_hat, double beta_hat) {
  LengthDefect d;
  d.defect1 = restrict_to(v, Ball{{0.0, 0.0}, 1.0}).mass() - 3.0;
  const auto phi = phi_rad();
  d.defect2 = weigh(v, [&](const Point2& x) {
    const double f = phi(x);
    return f * f;
  }) - kPhiRadMass;
  d.bound_scale = alpha_hat * mu_hat + beta_hat * beta_hat;
  return d;
}

double measured_e1(const FlowTrajectory& traj, const std::vector<double>& radii, int max_centers) {
  if (radii.empty()) throw Error("measured_e1: no radii");
  double best = 0.0;
  for (const auto& s : traj.snapshots) {
    const auto v = to_varifold(s.net);
    std::vector<Point2> centers;
    for (const auto& c : s.net.curves) centers.insert(centers.end(), c.nodes.begin(), c.nodes.end());
    const std::size_t stride =
        std::max<std::size_t>(1, centers.size() / static_cast<std::size_t>(std::max(1, max_centers)));
    for (std::size_t i = 0; i < centers.size(); i += stride) {
      for (double r : radii) {
        if (!(r > 0.0)) throw Error("measured_e1: radii must be positive");
        best = std::max(best, restrict_to(v, Ball{centers[i], r}).mass() / (2.0 * r));
      }
    }
  }
  return best;
}

}  // namespace triodlab
