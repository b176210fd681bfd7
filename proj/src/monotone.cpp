#include "triodlab/monotone.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/core.h>
#include <limits>
#include <numbers>
#include <map>
#include <set>

#include "triodlab/parallel.hpp"

namespace triodlab {

namespace {

using std::numbers::pi;

double time_tolerance(const FlowTrajectory& traj) {
  const double span = traj.t_last() - traj.t_first();
  return 1e-9 * std::max({1e-300, std::abs(span), std::abs(traj.t_first()), std::abs(traj.t_last())});
}

bool same_structure(const Network& a, const Network& b) {
  if (a.curves.size() != b.curves.size() || a.junctions.size() != b.junctions.size()) return false;
  for (std::size_t c = 0; c < a.curves.size(); ++c) {
    const auto& ca = a.curves[c];
    const auto& cb = b.curves[c];
    if (ca.nodes.size() != cb.nodes.size() || ca.closed != cb.closed || ca.ends != cb.ends) return false;
  }
  auto ia = a.junctions.begin();
  for (auto ib = b.junctions.begin(); ib != b.junctions.end(); ++ia, ++ib) {
    if (ia->first != ib->first) return false;
  }
  return true;
}

Network blend(const Network& a, const Network& b, double w) {
  Network out = a;
  for (std::size_t c = 0; c < out.curves.size(); ++c) {
    auto& nodes = out.curves[c].nodes;
    const auto& other = b.curves[c].nodes;
    for (std::size_t k = 0; k < nodes.size(); ++k) nodes[k] = (1.0 - w) * nodes[k] + w * other[k];
  }
  for (auto& [id, pos] : out.junctions) pos = (1.0 - w) * pos + w * b.junctions.at(id);
  return out;
}

Network transform(const Network& net, const Point2& y, double lambda) {
  Network out = net;
  for (auto& c : out.curves) {
    for (auto& p : c.nodes) p = (p - y) / lambda;
  }
  for (auto& [id, pos] : out.junctions) pos = (pos - y) / lambda;
  return out;
}

double point_segment_distance(const Point2& p, const Point2& a, const Point2& b) {
  const Point2 d = b - a;
  const double len2 = norm2(d);
  double t = len2 > 0.0 ? dot(p - a, d) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, a + t * d);
}

struct Piece {
  Point2 a, b;
};

std::vector<Piece> clipped_pieces(const Network& net, const Ball& ball) {
  std::vector<Piece> out;
  for (const auto& curve : net.curves) {
    for (std::size_t k = 0; k < curve.segment_count(); ++k) {
      auto [a, b] = curve.segment(k);
      auto range = clip_segment(a, b, ball);
      if (!range) continue;
      out.push_back({a + range->first * (b - a), a + range->second * (b - a)});
    }
  }
  return out;
}

// One-sided distance: sup over sample points of `from` of the distance to `to`.
double one_sided(const std::vector<Piece>& from, const std::vector<Piece>& to, double spacing) {
  double worst = 0.0;
  for (const auto& piece : from) {
    const double len = distance(piece.a, piece.b);
    const int n = std::max(1, static_cast<int>(std::ceil(len / spacing)));
    for (int i = 0; i <= n; ++i) {
      const Point2 p = piece.a + (static_cast<double>(i) / n) * (piece.b - piece.a);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, point_segment_distance(p, q.a, q.b));
      worst = std::max(worst, best);
    }
  }
  return worst;
}

}  // namespace

double rho(const Point2& y, double s, const Point2& x, double t) {
  if (!(t < s)) throw Error(fmt::format("rho: need t < s (t = {}, s = {})", t, s));
  const double d = s - t;
  return std::exp(-norm2(x - y) / (4.0 * d)) / std::sqrt(4.0 * pi * d);
}

SnapshotSample snapshot_at(const FlowTrajectory& traj, double t) {
  const auto& snaps = traj.snapshots;
  if (snaps.empty()) throw Error("snapshot_at: empty trajectory");
  const double tol = time_tolerance(traj);
  if (t < traj.t_first() - tol || t > traj.t_last() + tol) {
    throw Error(fmt::format("time {} outside trajectory range [{}, {}]", t, traj.t_first(), traj.t_last()));
  }
  auto it = std::lower_bound(snaps.begin(), snaps.end(), t, [](const Snapshot& s, double v) { return s.t < v; });
  std::size_t hi = it == snaps.end() ? snaps.size() - 1 : static_cast<std::size_t>(it - snaps.begin());
  auto gap_around = [&](std::size_t k) {
    double g = 0.0;
    if (k > 0) g = std::max(g, snaps[k].t - snaps[k - 1].t);
    if (k + 1 < snaps.size()) g = std::max(g, snaps[k + 1].t - snaps[k].t);
    return g;
  };
  if (std::abs(snaps[hi].t - t) <= tol) return {snaps[hi].net, gap_around(hi)};
  if (hi > 0 && std::abs(snaps[hi - 1].t - t) <= tol) return {snaps[hi - 1].net, gap_around(hi - 1)};
  if (hi == 0) return {snaps[0].net, gap_around(0)};
  const auto& a = snaps[hi - 1];
  const auto& b = snaps[hi];
  const double gap = b.t - a.t;
  const double w = (t - a.t) / gap;
  if (same_structure(a.net, b.net)) return {blend(a.net, b.net, w), gap};
  return {w < 0.5 ? a.net : b.net, gap};
}

double gaussian_mass(const Network& net, const Point2& y, double s, double t, double r_trunc) {
  double m = 0.0;
  for (const auto& atom : to_varifold(net, Ball{y, r_trunc}).atoms) m += rho(y, s, atom.midpoint, t) * atom.weight;
  return m;
}

double gaussian_density(const FlowTrajectory& traj, const Point2& y, double s, double tau,
                        std::optional<double> r_trunc) {
  if (!(tau > 0.0)) throw Error("gaussian_density: tau must be positive");
  const double radius = r_trunc.value_or(6.0 * std::sqrt(tau));
  if (radius < 6.0 * std::sqrt(tau) * (1.0 - 1e-12)) {
    throw Error(fmt::format("gaussian_density: truncation radius {} below 6 sqrt(tau) = {}", radius,
                            6.0 * std::sqrt(tau)));
  }
  const auto sample = snapshot_at(traj, s - tau);
  if (tau < 2.0 * sample.gap * (1.0 - 1e-9)) {
    throw Error(fmt::format("gaussian_density: tau = {} below twice the snapshot spacing {}", tau, sample.gap));
  }
  return gaussian_mass(sample.net, y, s, s - tau, radius);
}

DensityProfile density_limit(const FlowTrajectory& traj, const Point2& y, double s, const std::vector<double>& taus) {
  if (taus.size() < 3) throw Error("density_limit: need at least 3 tau values");
  for (std::size_t k = 1; k < taus.size(); ++k) {
    if (!(taus[k] < taus[k - 1]) || !(taus[k] > 0.0)) throw Error("density_limit: taus must decrease strictly");
    const double r0 = taus[1] / taus[0];
    if (std::abs(taus[k] / taus[k - 1] - r0) > 1e-6 * r0) throw Error("density_limit: taus must be geometric");
  }
  DensityProfile p;
  p.center = y;
  p.s = s;
  p.taus = taus;
  for (double tau : taus) p.values.push_back(gaussian_density(traj, y, s, tau));
  const std::size_t n = taus.size();
  const double ratio = taus[n - 2] / taus[n - 1];
  p.extrapolated = p.values[n - 1] + (p.values[n - 1] - p.values[n - 2]) / (ratio - 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) p.worst_increase = std::max(p.worst_increase, p.values[j] - p.values[i]);
  }
  p.monotone = p.worst_increase <= 1e-3;
  return p;
}

FlowTrajectory parabolic_rescale(const FlowTrajectory& traj, const Point2& y, double s, double lambda) {
  if (!(lambda > 0.0)) throw Error("parabolic_rescale: lambda must be positive");
  if (traj.snapshots.empty()) throw Error("parabolic_rescale: empty trajectory");
  FlowTrajectory out;
  out.forcing = traj.forcing.rescaled(y, s, lambda);
  const double l2 = lambda * lambda;
  for (const auto& snap : traj.snapshots) out.snapshots.push_back({(snap.t - s) / l2, transform(snap.net, y, lambda)});
  for (auto e : traj.events) {
    e.t = (e.t - s) / l2;
    e.where = (e.where - y) / lambda;
    e.measure /= lambda;
    out.events.push_back(std::move(e));
  }
  return out;
}

std::string to_string(TangentKind kind) {
  switch (kind) {
    case TangentKind::empty: return "empty";
    case TangentKind::static_line: return "static_line";
    case TangentKind::static_triple_junction: return "static_triple_junction";
    case TangentKind::static_density_ge2: return "static_density_ge2";
    case TangentKind::quasi_static: return "quasi_static";
    case TangentKind::shrinking: return "shrinking";
    case TangentKind::unresolved: return "unresolved";
  }
  return "unresolved";
}

int TangentLabel::dimension() const {
  switch (kind) {
    case TangentKind::static_line:
    case TangentKind::static_triple_junction:
    case TangentKind::static_density_ge2:
      return 2 + spine_dim_estimate;
    default:
      return spine_dim_estimate;
  }
}

double support_distance(const Network& a, const Network& b, const Point2& center, double radius, double margin) {
  const auto a_in = clipped_pieces(a, Ball{center, radius});
  const auto b_in = clipped_pieces(b, Ball{center, radius});
  if (a_in.empty() && b_in.empty()) return 0.0;
  if (a_in.empty() || b_in.empty()) return std::numeric_limits<double>::infinity();
  const auto a_out = clipped_pieces(a, Ball{center, radius + margin});
  const auto b_out = clipped_pieces(b, Ball{center, radius + margin});
  const double spacing = radius / 200.0;
  return std::max(one_sided(a_in, b_out, spacing), one_sided(b_in, a_out, spacing));
}

TangentLabel classify_tangent(const FlowTrajectory& traj, const Point2& y, double s, const ClassifyConfig& config) {
  if (traj.snapshots.empty()) throw Error("classify_tangent: empty trajectory");
  if (!(config.tau0 > 0.0)) throw Error("classify_tangent: tau0 must be positive");
  const double tol = time_tolerance(traj);
  if (s - config.tau0 < traj.t_first() - tol || s > traj.t_last() + tol) {
    throw Error(fmt::format("classify_tangent: window [{}, {}] not inside trajectory range [{}, {}]", s - config.tau0,
                            s, traj.t_first(), traj.t_last()));
  }
  TangentLabel label;
  const std::vector<double> taus{config.tau0, config.tau0 / 2.0, config.tau0 / 4.0};
  label.profile = density_limit(traj, y, s, taus);
  label.theta_star = label.profile.extrapolated;
  const double tau_min = taus.back();

  // Staticity: rescaled supports at rescaled times -1 and -1/4.
  const double lambda = std::sqrt(tau_min);
  const Network early = transform(snapshot_at(traj, s - tau_min).net, y, lambda);
  const Network late = transform(snapshot_at(traj, s - tau_min / 4.0).net, y, lambda);
  label.hausdorff = support_distance(early, late, {}, 1.0, 0.5);
  label.static_score = std::isfinite(label.hausdorff) ? 1.0 / (1.0 + label.hausdorff / config.static_tol) : 0.0;

  // Spine: directions around y at radius 2 sqrt(tau_min) whose density stays within spine_tol.
  constexpr int kDirections = 16;
  const double center_value = label.profile.values.back();
  std::vector<bool> spine(kDirections, false);
  int spine_count = 0;
  if (center_value > 0.0) {
    for (int k = 0; k < kDirections; ++k) {
      const double a = 2.0 * pi * k / kDirections;
      const Point2 p = y + 2.0 * std::sqrt(tau_min) * Point2{std::cos(a), std::sin(a)};
      if (gaussian_density(traj, p, s, tau_min) >= center_value - config.spine_tol) {
        spine[static_cast<std::size_t>(k)] = true;
        ++spine_count;
      }
    }
  }
  if (spine_count > kDirections / 2) {
    label.spine_dim_estimate = 2;
  } else {
    for (int k = 0; k < kDirections / 2; ++k) {
      if (spine[static_cast<std::size_t>(k)] && spine[static_cast<std::size_t>(k + kDirections / 2)]) {
        label.spine_dim_estimate = 1;
      }
    }
  }

  const double theta = label.theta_star;
  if (theta < 0.5) {
    label.kind = TangentKind::empty;
    return label;
  }
  if (label.is_static()) {
    // Density loss just after s marks a quasi-static tangent flow.
    if (s + tau_min <= traj.t_last() + tol) {
      const double after = gaussian_density(traj, y, s + 2.0 * tau_min, tau_min);
      if (theta - after >= config.quasi_drop) {
        label.kind = TangentKind::quasi_static;
        return label;
      }
    }
    if (theta < config.regular_below) {
      label.kind = TangentKind::static_line;
    } else if (theta < config.junction_below) {
      label.kind = theta >= 1.4 && theta <= 1.6 ? TangentKind::static_triple_junction : TangentKind::unresolved;
    } else if (theta >= config.singular_from) {
      label.kind = TangentKind::static_density_ge2;
    } else {
      label.kind = TangentKind::unresolved;
    }
    return label;
  }
  // Not static: self-similar shrinking when 2 * support(-1/4) matches support(-1) in B_2.
  const Network late2 = transform(late, {}, 0.5);
  const double shrink = support_distance(early, late2, {}, 2.0, 1.0);
  label.kind = shrink <= config.shrink_tol ? TangentKind::shrinking : TangentKind::unresolved;
  return label;
}

std::vector<StratumPoint> stratify(const FlowTrajectory& traj, const SpaceTimeGrid& grid, const ClassifyConfig& config) {
  if (grid.nx < 1 || grid.ny < 1 || grid.nt < 1) throw Error("stratify: grid counts must be positive");
  if (!(grid.hi.x > grid.lo.x) || !(grid.hi.y > grid.lo.y)) throw Error("stratify: empty spatial grid");
  if (grid.nt > 1 && !(grid.t_hi > grid.t_lo)) throw Error("stratify: empty time range");
  const double dx = (grid.hi.x - grid.lo.x) / grid.nx;
  const double dy = (grid.hi.y - grid.lo.y) / grid.ny;

  struct Candidate {
    Point2 y;
    double s;
  };
  std::vector<Candidate> candidates;
  for (int k = 0; k < grid.nt; ++k) {
    const double s = grid.nt == 1 ? grid.t_lo : grid.t_lo + (grid.t_hi - grid.t_lo) * k / (grid.nt - 1);
    const Network net = snapshot_at(traj, s).net;
    auto cell_of = [&](const Point2& p) -> std::optional<std::pair<int, int>> {
      const int i = static_cast<int>(std::floor((p.x - grid.lo.x) / dx));
      const int j = static_cast<int>(std::floor((p.y - grid.lo.y) / dy));
      if (i < 0 || j < 0 || i >= grid.nx || j >= grid.ny) return std::nullopt;
      return std::pair{i, j};
    };
    std::map<std::pair<int, int>, std::vector<Point2>> junctions;
    for (const auto& [id, pos] : net.junctions) {
      if (auto c = cell_of(pos)) junctions[*c].push_back(pos);
    }
    std::map<std::pair<int, int>, Point2> nearest;
    for (const auto& curve : net.curves) {
      for (const auto& p : curve.nodes) {
        auto c = cell_of(p);
        if (!c || junctions.contains(*c)) continue;
        const Point2 centre{grid.lo.x + (c->first + 0.5) * dx, grid.lo.y + (c->second + 0.5) * dy};
        auto it = nearest.find(*c);
        if (it == nearest.end() || norm2(p - centre) < norm2(it->second - centre)) nearest[*c] = p;
      }
    }
    std::set<std::pair<double, double>> seen;
    auto add = [&](const Point2& p) {
      if (seen.insert({p.x, p.y}).second) candidates.push_back({p, s});
    };
    for (const auto& [cell, pts] : junctions) {
      Point2 c{};
      for (const auto& p : pts) c += p;
      add(c / static_cast<double>(pts.size()));
    }
    for (const auto& [cell, p] : nearest) add(p);
  }

  const std::vector<double> taus{config.tau0, config.tau0 / 2.0, config.tau0 / 4.0};
  std::vector<std::optional<StratumPoint>> results(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t i) {
    const auto& c = candidates[i];
    const auto profile = density_limit(traj, c.y, c.s, taus);
    if (profile.extrapolated < config.regular_below) return;
    StratumPoint p;
    p.y = c.y;
    p.s = c.s;
    p.label = classify_tangent(traj, c.y, c.s, config);
    p.dimension = p.label.dimension();
    results[i] = std::move(p);
  });
  // A density bump is as wide as the kernel, so cells around a singular point pass the threshold
  // too. Keep only the densest candidate within sqrt(tau0) at each time.
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i]) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& pa = *results[a];
    const auto& pb = *results[b];
    if (pa.s != pb.s) return pa.s < pb.s;
    return pa.label.theta_star > pb.label.theta_star;
  });
  const double radius = std::sqrt(config.tau0);
  std::vector<StratumPoint> out;
  for (const std::size_t i : order) {
    const auto& p = *results[i];
    const bool shadowed = std::any_of(out.begin(), out.end(), [&](const StratumPoint& q) {
      return q.s == p.s && distance(q.y, p.y) < radius;
    });
    if (!shadowed) out.push_back(p);
  }
  return out;
}

}  // namespace triodlab
