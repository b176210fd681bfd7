#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"
#include "triodlab/presets.hpp"
#include "triodlab/varifold.hpp"

using namespace triodlab;
using std::numbers::pi;

namespace {

// Reference profile written out independently of the library.
double quintic(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
}
double ref_phi_rad(double r) { return 1.0 - quintic(2.0 * (r - 1.0)); }
double ref_phi_hat(double r) { return 1.0 - quintic(4.0 * (r - 0.25)); }

Network unit_segment() {
  Network net;
  Curve c;
  c.nodes = {{0, 0}, {1, 0}};
  c.ends = {EndTag::clamped(), EndTag::clamped()};
  net.curves.push_back(c);
  return net;
}

// Length of the part of segment p -> q inside the unit disc.
double clipped_length(Point2 p, Point2 q) {
  const Point2 d = q - p;
  const double a = dot(d, d), b = 2 * dot(p, d), c = dot(p, p) - 1.0;
  const double disc = b * b - 4 * a * c;
  if (disc <= 0) return 0.0;
  const double t0 = std::max(0.0, (-b - std::sqrt(disc)) / (2 * a));
  const double t1 = std::min(1.0, (-b + std::sqrt(disc)) / (2 * a));
  return t1 > t0 ? (t1 - t0) * std::sqrt(a) : 0.0;
}

}  // namespace

TEST_CASE("to_varifold examples") {
  const auto v = to_varifold(unit_segment());
  CHECK(v.mass() == doctest::Approx(1.0).epsilon(1e-15));
  for (const auto& a : v.atoms) {
    CHECK(a.tangent.x == doctest::Approx(1.0));
    CHECK(a.multiplicity == 1);
  }
  const double h = 0.01;
  const auto triod = standard_triod(TriodFrame(0.2, {}), 2.0, h);
  CHECK(std::abs(to_varifold(triod, Ball{{}, 1.0}).mass() - 3.0) <= 2 * h);
  const auto circle = to_varifold(presets::circle(1.0, 256));
  CHECK(circle.mass() == doctest::Approx(2 * 256 * std::sin(pi / 256)).epsilon(1e-14));
  CHECK(std::abs(circle.mass() - 2 * pi) < 1e-3);
  for (const auto& a : circle.atoms) CHECK(std::abs(norm(a.tangent) - 1.0) < 1e-12);
}

TEST_CASE("clip_segment") {
  const auto in = clip_segment({-2, 0}, {2, 0}, Ball{{}, 1.0});
  REQUIRE(in);
  CHECK(in->first == doctest::Approx(0.25));
  CHECK(in->second == doctest::Approx(0.75));
  CHECK_FALSE(clip_segment({-2, 2}, {2, 2}, Ball{{}, 1.0}));
  const auto v = to_varifold(unit_segment(), Ball{{1.0, 0.0}, 0.25});
  CHECK(v.mass() == doctest::Approx(0.25));
  CHECK(restrict_to(to_varifold(unit_segment()), Ball{{1.0, 0.0}, 0.25}).mass() == doctest::Approx(0.25));
}

TEST_CASE("mollifier constants match quadrature") {
  const double c = 3.0 * testing::integrate([](double r) { return std::pow(ref_phi_rad(r), 2); }, 0.0, 1.5);
  CHECK(c == doctest::Approx(kPhiRadMass).epsilon(1e-12));
  CHECK(c > 3.0);
  CHECK(c < 4.5);
  const double c0 = testing::integrate([](double s) { return ref_phi_hat(std::abs(s)); }, -0.5, 0.5);
  CHECK(c0 == doctest::Approx(kPhiHatLine).epsilon(1e-12));
  CHECK(c0 > 0.5);
  CHECK(c0 < 1.0);

  const auto phi = phi_rad();
  const auto v = to_varifold(standard_triod(TriodFrame(0.5, {}), 2.0, 0.001), Ball{{}, 1.5});
  CHECK(weigh(v, [&](const Point2& x) { return phi(x) * phi(x); }) == doctest::Approx(kPhiRadMass).epsilon(1e-6));
}

TEST_CASE("test functions match the reference profile and bounds") {
  const auto hat = phi_hat();
  const auto rad = phi_rad();
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  double grad_hat = 0.0, grad_rad = 0.0;
  for (int k = 0; k < 20000; ++k) {
    const Point2 x{u(rng), u(rng)};
    const double r = norm(x);
    CHECK(hat(x) == doctest::Approx(ref_phi_hat(r)).epsilon(1e-12));
    CHECK(rad(x) == doctest::Approx(ref_phi_rad(r)).epsilon(1e-12));
    if (r <= 0.25) CHECK(hat(x) == 1.0);
    if (r >= 0.5) CHECK(hat(x) == 0.0);
    if (r <= 1.0) CHECK(rad(x) == 1.0);
    if (r >= 1.5) CHECK(rad(x) == 0.0);
    grad_hat = std::max(grad_hat, norm(hat.gradient(x)));
    grad_rad = std::max(grad_rad, norm(rad.gradient(x)));
    const double e = 1e-6;
    const Point2 fd{(rad({x.x + e, x.y}) - rad({x.x - e, x.y})) / (2 * e),
                    (rad({x.x, x.y + e}) - rad({x.x, x.y - e})) / (2 * e)};
    CHECK(norm(fd - rad.gradient(x)) < 1e-6);
  }
  CHECK(grad_hat <= 8.0);
  CHECK(grad_rad <= 4.0);

  const TriodFrame f(0.3, {0.1, 0.2});
  const auto p2 = phi_j(2, f, 0.5);
  const Point2 centre = f.xi() + 0.5 * f.ray(1);
  CHECK(p2(centre) == 1.0);
  CHECK(p2(centre + Point2{0.26, 0.0}) == 0.0);
  CHECK_THROWS_AS(phi_j(4, f, 1.0), Error);
  CHECK_THROWS_AS(phi_j(1, f, 0.0), Error);
}

TEST_CASE("weigh is linear") {
  const auto v = to_varifold(presets::circle(1.0, 64));
  const ScalarField f = [](const Point2& x) { return x.x * x.x + 0.3; };
  const ScalarField g = [](const Point2& x) { return std::sin(x.y); };
  const double a = 1.7, b = -0.4;
  CHECK(weigh(v, [&](const Point2& x) { return a * f(x) + b * g(x); }) ==
        doctest::Approx(a * weigh(v, f) + b * weigh(v, g)).epsilon(1e-14));
  CHECK(weigh(v, [](const Point2&) { return 1.0; }) == doctest::Approx(v.mass()).epsilon(1e-15));
  auto doubled = v;
  for (auto& at : doubled.atoms) at.weight *= 2.0;
  CHECK(weigh(doubled, f) == doctest::Approx(2.0 * weigh(v, f)).epsilon(1e-15));
}

TEST_CASE("first_variation examples") {
  const double h = 0.01;
  const auto triod = to_varifold(standard_triod(TriodFrame(0.1, {}), 2.0, h), Ball{{}, 2.0});
  // g = (1 - |x|^2)^2 (a, b) on B_1, zero outside.
  const Point2 ab{0.7, -0.3};
  VectorField g;
  g.value = [&](const Point2& x) {
    const double q = std::max(0.0, 1.0 - norm2(x));
    return q * q * ab;
  };
  g.jacobian = [&](const Point2& x) {
    const double q = std::max(0.0, 1.0 - norm2(x));
    const Point2 dq{-2 * x.x, -2 * x.y};  // grad of 1 - |x|^2
    return Mat2{2 * q * dq.x * ab.x, 2 * q * dq.y * ab.x, 2 * q * dq.x * ab.y, 2 * q * dq.y * ab.y};
  };
  double sup_grad = 0.0;
  for (double r = 0.0; r <= 1.0; r += 1e-3) sup_grad = std::max(sup_grad, 4 * r * (1 - r * r) * norm(ab));
  CHECK(std::abs(first_variation(triod, g)) <= 10 * h * sup_grad);

  VectorField id{[](const Point2& x) { return x; }, [](const Point2&) { return Mat2{1, 0, 0, 1}; }};
  CHECK(std::abs(first_variation(to_varifold(presets::circle(1.0, 256)), id) - 2 * pi) < 1e-3);

  Network seg;
  Curve c;
  for (int k = 0; k <= 100; ++k) c.nodes.push_back({0.01 * k, 0.0});
  seg.curves.push_back(c);
  VectorField sq{[](const Point2& x) { return Point2{x.x * x.x, 0}; },
                 [](const Point2& x) { return Mat2{2 * x.x, 0, 0, 0}; }};
  CHECK(std::abs(first_variation(to_varifold(seg), sq) - 1.0) < 1e-6);
}

TEST_CASE("discrete integration by parts on a closed curve") {
  // A non-circular closed curve.
  const int n = 400;
  Network net;
  Curve c;
  c.closed = true;
  for (int k = 0; k < n; ++k) {
    const double a = 2 * pi * k / n;
    const double r = 1.0 + 0.2 * std::cos(3 * a);
    c.nodes.push_back({r * std::cos(a), r * std::sin(a)});
  }
  net.curves.push_back(c);
  VectorField g{[](const Point2& x) { return Point2{std::sin(x.y), x.x * x.y}; },
                [](const Point2& x) { return Mat2{0, std::cos(x.y), x.y, x.x}; }};
  const double lhs = first_variation(to_varifold(net), g);
  double rhs = 0.0;
  for (const auto& a : curved_atoms(net)) rhs += dot(a.curvature, g.value(a.midpoint)) * a.weight;
  const double h = c.length() / n;
  CHECK(std::abs(lhs + rhs) <= 10.0 * h);
}

TEST_CASE("brakke_residual vanishes on a static triod") {
  const auto traj = testing::constant_traj(standard_triod(TriodFrame(), 2.0, 0.01), 0.0, 0.1, 10);
  const auto r = brakke_residual(traj, SpaceTimeTest::radial({0.1, 0.05}, 0.8), 0.0, 0.1);
  CHECK(r.integrable);
  CHECK(std::abs(r.value()) < 1e-6);
}

TEST_CASE("brakke_residual flags an inflated snapshot and ends in the support") {
  Scenario sc;
  sc.initial = presets::circle(1.0, 128);
  sc.h_target = 2 * pi / 128;
  sc.dt = 1e-4;
  sc.t_end = 0.1;
  sc.snapshot_stride = 10;
  sc.regrid = false;
  auto traj = run(sc);
  const auto phi = SpaceTimeTest::constant_one();
  const double base = brakke_residual(traj, phi, 0.0, 0.1).value();
  CHECK(std::abs(base) < 5e-3);
  auto& last = traj.snapshots.back().net.curves[0];
  const double grow = 1.0 + 0.1 / last.length();
  for (auto& p : last.nodes) p = p * grow;
  CHECK(brakke_residual(traj, phi, 0.0, 0.1).value() - base == doctest::Approx(0.1).epsilon(1e-2));

  const auto seg = testing::constant_traj(presets::segment(1.0, 0.01), 0.0, 0.1, 10);
  auto free_ends = seg;
  for (auto& s : free_ends.snapshots) s.net.curves[0].ends = {EndTag::free_end(), EndTag::free_end()};
  const auto r = brakke_residual(free_ends, phi, 0.0, 0.1);
  CHECK_FALSE(r.integrable);
  CHECK(std::isinf(r.value()));
  CHECK(brakke_residual(seg, SpaceTimeTest::radial({}, 0.2), 0.0, 0.1).integrable);
}

TEST_CASE("brakke_residual requires snapshots at the stride") {
  auto traj = testing::constant_traj(standard_triod(TriodFrame(), 2.0, 0.01), 0.0, 0.1, 10);
  traj.snapshots.erase(traj.snapshots.begin() + 4, traj.snapshots.begin() + 7);
  CHECK_THROWS_AS(brakke_residual(traj, SpaceTimeTest::constant_one(), 0.0, 0.1), Error);
  CHECK_THROWS_AS(brakke_residual(traj, SpaceTimeTest::constant_one(), 0.0, 0.2), Error);
}

TEST_CASE("brakke_forcing_term sentinel") {
  auto net = standard_triod(TriodFrame(), 1.0, 0.1);
  CHECK(brakke_forcing_term(net, ForcingField::zero(), 0.0, SpaceTimeTest::radial({}, 0.5)).has_value());
  net.curves[0].nodes[1] = rotate(net.curves[0].nodes[1], 0.3);
  CHECK_FALSE(brakke_forcing_term(net, ForcingField::zero(), 0.0, SpaceTimeTest::radial({}, 0.5)).has_value());
  CHECK(brakke_forcing_term(net, ForcingField::zero(), 0.0, SpaceTimeTest::radial({5, 5}, 0.5)).has_value());
}

TEST_CASE("length_defect examples") {
  const double h = 0.005;
  const auto exact = length_defect(to_varifold(standard_triod(TriodFrame(), 2.0, h), Ball{{}, 2.0}), 0, 1, 0);
  CHECK(std::abs(exact.defect1) <= 2 * h);
  CHECK(std::abs(exact.defect2) <= 2 * h);

  // Junction moved to (0.1, 0), rays straight to the original endpoints.
  const Point2 p{0.1, 0.0};
  Network moved;
  moved.junctions[0] = p;
  double oracle = -3.0;
  for (int j = 0; j < 3; ++j) {
    const Point2 q = 2.0 * TriodFrame().ray(j);
    Curve c;
    for (int k = 0; k <= 400; ++k) c.nodes.push_back(p + (q - p) * (k / 400.0));
    c.ends = {EndTag::at_junction(0), EndTag::clamped()};
    moved.curves.push_back(c);
    oracle += clipped_length(p, q);
  }
  CHECK(oracle > 0.0);
  CHECK(length_defect(to_varifold(moved, Ball{{}, 2.0}), 0, 1, 0).defect1 == doctest::Approx(oracle).epsilon(1e-10));

  // Graph perturbation a sin(pi x) on every ray.
  const double a = 0.05;
  const auto graphs = presets::perturbed_triod(a, 2.0, 0.001, {0.0, 0.0, 0.0});
  const double arc = testing::integrate(
      [&](double x) { return std::sqrt(1.0 + std::pow(a * pi * std::cos(pi * x), 2)); }, 0.0, 1.0);
  const double d1 = length_defect(to_varifold(graphs, Ball{{}, 2.0}), 0, 1, 0).defect1;
  CHECK(d1 == doctest::Approx(3.0 * (arc - 1.0)).epsilon(1e-3));
  CHECK(d1 == doctest::Approx(3.0 * 0.5 * a * a * pi * pi * 0.5).epsilon(2e-2));

  const auto scaled = length_defect(to_varifold(graphs, Ball{{}, 2.0}), 0.1, 2.0, 0.3);
  CHECK(scaled.bound_scale == doctest::Approx(0.2 + 0.09));
}

TEST_CASE("measured_e1 on a triod and a line") {
  const auto triod = testing::constant_traj(standard_triod(TriodFrame(), 2.0, 0.01), 0.0, 0.1, 2);
  CHECK(measured_e1(triod, {0.25, 0.5}, 5000) == doctest::Approx(1.5).epsilon(1e-9));
  const auto line = testing::constant_traj(presets::segment(4.0, 0.01), 0.0, 0.1, 2);
  CHECK(measured_e1(line, {0.25, 0.5}) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(measured_e1(line, {}), Error);
}
