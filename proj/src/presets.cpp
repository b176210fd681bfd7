#include "triodlab/presets.hpp"

#include <cmath>
#include <fmt/core.h>
#include <numbers>
#include <set>

#include "triodlab/flowsim.hpp"

namespace triodlab::presets {

namespace {

using std::numbers::pi;

double get(const std::map<std::string, double>& params, const std::string& key, double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

void reject_unknown(const std::map<std::string, double>& params, const std::set<std::string>& known,
                    const std::string& preset) {
  for (const auto& [k, v] : params) {
    if (!known.contains(k)) throw Error(fmt::format("preset '{}': unknown parameter '{}'", preset, k));
  }
}

}  // namespace

Curve sample_curve(const std::function<Point2(double)>& path, double h, std::array<EndTag, 2> ends,
                   int dense_samples) {
  Curve dense;
  dense.ends = ends;
  dense.nodes.reserve(static_cast<std::size_t>(dense_samples) + 1);
  for (int k = 0; k <= dense_samples; ++k) dense.nodes.push_back(path(static_cast<double>(k) / dense_samples));
  return regrid(dense, h);
}

Network perturbed_triod(double amplitude, double extent, double h, std::array<double, 3> beta) {
  if (!(extent > 0.0) || !(h > 0.0)) throw Error("perturbed_triod: extent and h must be positive");
  Network net;
  net.junctions[0] = {0.0, 0.0};
  for (int j = 0; j < 3; ++j) {
    const double angle = 2.0 * pi * j / 3.0;
    const double b = beta[static_cast<std::size_t>(j)];
    auto path = [&](double u) {
      const double x = extent * u;
      const double s = std::sin(pi * x);
      return rotate({x, amplitude * (s + b * s * s)}, angle);
    };
    Curve c = sample_curve(path, h, {EndTag::at_junction(0), EndTag::clamped()});
    c.nodes.front() = {0.0, 0.0};
    net.curves.push_back(std::move(c));
  }
  return net;
}

Network circle(double radius, int nodes, Point2 center) {
  if (!(radius > 0.0) || nodes < 3) throw Error("circle: need radius > 0 and at least 3 nodes");
  Network net;
  Curve c;
  c.closed = true;
  for (int k = 0; k < nodes; ++k) {
    const double a = 2.0 * pi * k / nodes;
    c.nodes.push_back(center + radius * Point2{std::cos(a), std::sin(a)});
  }
  net.curves.push_back(std::move(c));
  return net;
}

Network grim_reaper(double half_width, double h, double t) {
  if (!(half_width > 0.0) || !(half_width < pi / 2.0)) throw Error("grim_reaper: half width must be in (0, pi/2)");
  Network net;
  auto path = [&](double u) {
    const double x = -half_width + 2.0 * half_width * u;
    return Point2{x, t - std::log(std::cos(x))};
  };
  net.curves.push_back(sample_curve(path, h, {EndTag::clamped(), EndTag::clamped()}, 200000));
  return net;
}

Network lens(double d, double w, double height, double h) {
  if (!(d > 0.0) || !(height > 0.0)) throw Error("lens: d and height must be positive");
  Network net;
  net.junctions[0] = {-d, 0.0};
  net.junctions[1] = {d, 0.0};
  net.curves.push_back(sample_curve([&](double u) { return Point2{-d + 2.0 * d * u, 0.0}; }, h,
                                    {EndTag::at_junction(0), EndTag::at_junction(1)}));
  for (int side : {1, -1}) {
    for (int up : {1, -1}) {
      const Point2 p0{side * d, 0.0};
      const Point2 p2{side * w, up * height};
      const Point2 dir{side * 0.5, up * std::sqrt(3.0) / 2.0};
      const Point2 p1 = p0 + 0.5 * distance(p0, p2) * dir;
      auto bezier = [=](double u) { return (1 - u) * (1 - u) * p0 + 2 * u * (1 - u) * p1 + u * u * p2; };
      Curve c = sample_curve(bezier, h, {EndTag::at_junction(side > 0 ? 1 : 0), EndTag::clamped()});
      c.nodes.front() = p0;
      net.curves.push_back(std::move(c));
    }
  }
  return net;
}

Network segment(double length, double h) {
  if (!(length > 0.0)) throw Error("segment: length must be positive");
  Network net;
  net.curves.push_back(sample_curve([&](double u) { return Point2{length * (u - 0.5), 0.0}; }, h,
                                    {EndTag::clamped(), EndTag::clamped()}, 1000));
  return net;
}

Network cross(double extent, double h, double angle, Point2 center) {
  Network net;
  for (double a : {0.0, angle}) {
    const Point2 dir{std::cos(a), std::sin(a)};
    net.curves.push_back(sample_curve([&](double u) { return center + extent * (2.0 * u - 1.0) * dir; }, h,
                                      {EndTag::clamped(), EndTag::clamped()}, 1000));
  }
  return net;
}

Network build(const std::string& name, const std::map<std::string, double>& params, double h) {
  if (name == "triod") {
    reject_unknown(params, {"extent", "theta", "x0", "y0"}, name);
    const TriodFrame frame(get(params, "theta", 0.0), {get(params, "x0", 0.0), get(params, "y0", 0.0)});
    return standard_triod(frame, get(params, "extent", 2.0), h);
  }
  if (name == "perturbed_triod") {
    reject_unknown(params, {"amplitude", "extent", "beta1", "beta2", "beta3"}, name);
    return perturbed_triod(get(params, "amplitude", 0.02), get(params, "extent", 2.0), h,
                           {get(params, "beta1", 0.0), get(params, "beta2", 1.0), get(params, "beta3", -1.0)});
  }
  if (name == "circle") {
    reject_unknown(params, {"radius", "nodes", "x0", "y0"}, name);
    const double r = get(params, "radius", 1.0);
    const int n = static_cast<int>(get(params, "nodes", std::round(2.0 * pi * r / h)));
    return circle(r, n, {get(params, "x0", 0.0), get(params, "y0", 0.0)});
  }
  if (name == "grim_reaper") {
    reject_unknown(params, {"half_width", "t"}, name);
    return grim_reaper(get(params, "half_width", 1.4), h, get(params, "t", 0.0));
  }
  if (name == "lens") {
    reject_unknown(params, {"d", "w", "height"}, name);
    return lens(get(params, "d", 0.25), get(params, "w", 0.5), get(params, "height", 1.0), h);
  }
  if (name == "segment") {
    reject_unknown(params, {"length"}, name);
    return segment(get(params, "length", 2.0), h);
  }
  throw Error(fmt::format("unknown preset '{}'", name));
}

}  // namespace triodlab::presets
