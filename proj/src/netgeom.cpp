#include "triodlab/netgeom.hpp"

#include <algorithm>
#include <fmt/core.h>

namespace triodlab {

namespace {

constexpr double kTwoPiThird = 2.0 * std::numbers::pi / 3.0;
constexpr double kJunctionTol = 1e-12;

// Distance from p to the half-line {t * dir : t >= 0}, dir a unit vector.
double dist_to_ray(const Point2& p, const Point2& dir) {
  const double t = dot(p, dir);
  if (t <= 0.0) return norm(p);
  return std::abs(cross(dir, p));
}

int orientation(const Point2& a, const Point2& b, const Point2& c) {
  const double v = cross(b - a, c - a);
  if (v > 0.0) return 1;
  if (v < 0.0) return -1;
  return 0;
}

bool on_segment(const Point2& a, const Point2& b, const Point2& p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

}  // namespace

double TriodFrame::normalize_angle(double theta) {
  // Reduce into (-pi/3, pi/3].
  double r = std::fmod(theta, kTwoPiThird);
  if (r > std::numbers::pi / 3.0) r -= kTwoPiThird;
  if (r <= -std::numbers::pi / 3.0) r += kTwoPiThird;
  return r;
}

TriodFrame::TriodFrame(double theta, Point2 xi) : theta_(normalize_angle(theta)), xi_(xi) {
  if (!std::isfinite(theta) || !is_finite(xi)) throw Error("TriodFrame: non-finite parameters");
}

Point2 TriodFrame::ray(int j) const { return rotate({1.0, 0.0}, theta_ + j * kTwoPiThird); }

double Curve::length() const {
  double len = 0.0;
  for (std::size_t k = 0; k < segment_count(); ++k) {
    const auto [a, b] = segment(k);
    len += distance(a, b);
  }
  return len;
}

double Network::total_length() const {
  double len = 0.0;
  for (const auto& c : curves) len += c.length();
  return len;
}

Network standard_triod(const TriodFrame& frame, double extent, double h) {
  if (!(extent > 0.0)) throw Error("standard_triod: extent must be positive");
  if (!(h > 0.0)) throw Error("standard_triod: h must be positive");
  if (!(h < extent)) throw Error("standard_triod: h must be smaller than extent");
  const auto n = static_cast<std::size_t>(std::ceil(extent / h - 1e-9));
  Network net;
  net.junctions[0] = frame.xi();
  for (int j = 0; j < 3; ++j) {
    Curve c;
    const Point2 dir = frame.ray(j);
    c.nodes.reserve(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
      const double s = extent * static_cast<double>(k) / static_cast<double>(n);
      c.nodes.push_back(frame.xi() + dir * s);
    }
    c.nodes.front() = frame.xi();
    c.ends = {EndTag::at_junction(0), EndTag::clamped()};
    net.curves.push_back(std::move(c));
  }
  return net;
}

double dist_to_triod(const Point2& x, const TriodFrame& frame) {
  const Point2 p = x - frame.xi();
  double best = dist_to_ray(p, frame.ray(0));
  best = std::min(best, dist_to_ray(p, frame.ray(1)));
  best = std::min(best, dist_to_ray(p, frame.ray(2)));
  return best;
}

double d_metric(const TriodFrame& a, const TriodFrame& b, double R) {
  if (!(R > 0.0)) throw Error("d_metric: R must be positive");
  // Angles are compared modulo the 2*pi/3 symmetry of the triod.
  return std::max(distance(a.xi(), b.xi()) / R, std::abs(TriodFrame::normalize_angle(a.theta() - b.theta())));
}

bool segments_intersect(const Point2& a0, const Point2& a1, const Point2& b0, const Point2& b1) {
  // Shared endpoint: only a collinear overlap (fold-back) counts.
  for (const auto& [p, q, r, s] : {std::array{a0, a1, b0, b1}, std::array{a0, a1, b1, b0},
                                    std::array{a1, a0, b0, b1}, std::array{a1, a0, b1, b0}}) {
    if (p == r) {
      const Point2 u = q - p;
      const Point2 v = s - r;
      return cross(u, v) == 0.0 && dot(u, v) > 0.0;
    }
  }
  const int o1 = orientation(a0, a1, b0);
  const int o2 = orientation(a0, a1, b1);
  const int o3 = orientation(b0, b1, a0);
  const int o4 = orientation(b0, b1, a1);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a0, a1, b0)) return true;
  if (o2 == 0 && on_segment(a0, a1, b1)) return true;
  if (o3 == 0 && on_segment(b0, b1, a0)) return true;
  if (o4 == 0 && on_segment(b0, b1, a1)) return true;
  return false;
}

std::vector<std::pair<int, int>> junction_ends(const Network& net, int id) {
  std::vector<std::pair<int, int>> out;
  for (int c = 0; c < static_cast<int>(net.curves.size()); ++c) {
    const auto& curve = net.curves[c];
    if (curve.closed) continue;
    for (int e = 0; e < 2; ++e) {
      if (curve.ends[e].kind == EndKind::junction && curve.ends[e].junction == id) out.emplace_back(c, e);
    }
  }
  return out;
}

double herring_residual(const Network& net) {
  double worst = 0.0;
  for (const auto& [id, pos] : net.junctions) {
    Point2 sum{};
    for (const auto& [c, e] : junction_ends(net, id)) {
      const auto& nodes = net.curves[c].nodes;
      const Point2 next = e == 0 ? nodes[1] : nodes[nodes.size() - 2];
      const Point2 d = next - pos;
      const double len = norm(d);
      if (len > 0.0) sum += d / len;
    }
    worst = std::max(worst, norm(sum));
  }
  return worst;
}

std::vector<Violation> validate(const Network& net) {
  std::vector<Violation> out;
  const int ncurves = static_cast<int>(net.curves.size());

  for (int c = 0; c < ncurves; ++c) {
    const auto& curve = net.curves[c];
    const std::size_t min_nodes = curve.closed ? 3 : 2;
    if (curve.nodes.size() < min_nodes) {
      out.push_back({"node_count", {c}, {}, {}, fmt::format("curve {} has {} nodes", c, curve.nodes.size())});
      continue;
    }
    for (std::size_t k = 0; k < curve.nodes.size(); ++k) {
      if (!is_finite(curve.nodes[k])) {
        out.push_back({"finite", {c}, {}, {curve.nodes[k]}, fmt::format("curve {} node {} not finite", c, k)});
      }
    }
    for (std::size_t k = 0; k < curve.segment_count(); ++k) {
      const auto [a, b] = curve.segment(k);
      if (a == b) {
        out.push_back({"distinct_nodes", {c}, {}, {a}, fmt::format("curve {} segment {} is degenerate", c, k)});
      }
    }
    if (!curve.closed) {
      for (int e = 0; e < 2; ++e) {
        const EndTag& tag = curve.ends[e];
        if (tag.kind != EndKind::junction) continue;
        const Point2 end = e == 0 ? curve.nodes.front() : curve.nodes.back();
        auto it = net.junctions.find(tag.junction);
        if (it == net.junctions.end()) {
          out.push_back({"valence", {c}, {tag.junction}, {end},
                         fmt::format("curve {} references unknown junction {}", c, tag.junction)});
        } else if (distance(it->second, end) > kJunctionTol) {
          out.push_back({"junction_position", {c}, {tag.junction}, {end, it->second},
                         fmt::format("curve {} end {} is off junction {}", c, e, tag.junction)});
        }
      }
    }
  }

  for (const auto& [id, pos] : net.junctions) {
    const auto ends = junction_ends(net, id);
    if (ends.size() != 3) {
      Violation v{"valence", {}, {id}, {pos}, fmt::format("junction {} has valence {}", id, ends.size())};
      for (const auto& [c, e] : ends) v.curves.push_back(c);
      out.push_back(std::move(v));
    }
  }
  if (!out.empty()) return out;

  // Embeddedness: sweep over segment bounding boxes sorted by min x.
  struct Seg {
    Point2 a, b;
    int curve;
    std::size_t index;
    double xmin, xmax;
  };
  std::vector<Seg> segs;
  for (int c = 0; c < ncurves; ++c) {
    const auto& curve = net.curves[c];
    for (std::size_t k = 0; k < curve.segment_count(); ++k) {
      const auto [a, b] = curve.segment(k);
      segs.push_back({a, b, c, k, std::min(a.x, b.x), std::max(a.x, b.x)});
    }
  }
  std::sort(segs.begin(), segs.end(), [](const Seg& l, const Seg& r) {
    if (l.xmin != r.xmin) return l.xmin < r.xmin;
    if (l.curve != r.curve) return l.curve < r.curve;
    return l.index < r.index;
  });
  auto adjacent = [&](const Seg& s, const Seg& t) {
    if (s.curve != t.curve) return false;
    const std::size_t n = net.curves[s.curve].segment_count();
    const std::size_t d = s.index > t.index ? s.index - t.index : t.index - s.index;
    return d == 1 || (net.curves[s.curve].closed && d == n - 1);
  };
  auto at_junction = [&](const Point2& p) {
    for (const auto& [id, pos] : net.junctions) {
      if (distance(pos, p) <= kJunctionTol) return true;
    }
    return false;
  };
  // Intersection point of two segments known to meet.
  auto meet = [](const Seg& s, const Seg& t) {
    for (const Point2& p : {s.a, s.b}) {
      if (p == t.a || p == t.b) return p;
    }
    const Point2 u = s.b - s.a;
    const Point2 v = t.b - t.a;
    const double den = cross(u, v);
    if (den != 0.0) return s.a + u * (cross(t.a - s.a, v) / den);
    for (const Point2& p : {t.a, t.b}) {
      if (on_segment(s.a, s.b, p)) return p;
    }
    return s.a;
  };
  // One violation per curve pair and meeting point.
  std::map<std::pair<int, int>, std::vector<Point2>> crossings;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    for (std::size_t j = i + 1; j < segs.size() && segs[j].xmin <= segs[i].xmax; ++j) {
      const Seg& s = segs[i];
      const Seg& t = segs[j];
      if (std::max(std::min(s.a.y, s.b.y), std::min(t.a.y, t.b.y)) >
          std::min(std::max(s.a.y, s.b.y), std::max(t.a.y, t.b.y))) {
        continue;
      }
      bool hit = segments_intersect(s.a, s.b, t.a, t.b);
      if (!hit && !adjacent(s, t)) {
        // A node shared by non-neighbouring segments is a touching point unless it is a junction.
        for (const Point2& p : {s.a, s.b}) {
          if ((p == t.a || p == t.b) && !at_junction(p)) hit = true;
        }
      }
      if (!hit) continue;
      const Point2 where = meet(s, t);
      auto& pts = crossings[{std::min(s.curve, t.curve), std::max(s.curve, t.curve)}];
      bool seen = false;
      for (const auto& q : pts) seen = seen || distance(q, where) <= kJunctionTol;
      if (seen) continue;
      pts.push_back(where);
      out.push_back({"embeddedness",
                     {std::min(s.curve, t.curve), std::max(s.curve, t.curve)},
                     {},
                     {where},
                     fmt::format("curve {} segment {} meets curve {} segment {} at ({}, {})", s.curve, s.index,
                                 t.curve, t.index, where.x, where.y)});
    }
  }
  return out;
}

}  // namespace triodlab
