#include "triodlab/flowsim.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/core.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_linalg.h>
#include <gsl/gsl_vector.h>

namespace triodlab {

namespace {

constexpr double kDegenerateGap = 1e-14;

struct GslQuiet {
  GslQuiet() { gsl_set_error_handler_off(); }
};
const GslQuiet gsl_quiet;

Point2 unit(const Point2& v) {
  const double n = norm(v);
  return n > 0.0 ? v / n : Point2{};
}

// Solves A x = rhs for one coordinate; A given by sub/diag/super of each row.
// Row i reads sub[i]*x[i-1] + diag[i]*x[i] + super[i]*x[i+1]; cyclic wraps indices.
std::vector<double> solve_rows(const std::vector<double>& sub, const std::vector<double>& diag,
                               const std::vector<double>& super, const std::vector<double>& rhs, bool cyclic) {
  const std::size_t m = diag.size();
  std::vector<double> x(m, 0.0);
  if (m == 1) {
    if (diag[0] == 0.0) throw Error("tridiagonal solve: zero pivot");
    x[0] = rhs[0] / diag[0];
    return x;
  }
  std::vector<double> d = diag;
  std::vector<double> e(cyclic ? m : m - 1);
  std::vector<double> f(cyclic ? m : m - 1);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    e[i] = super[i];    // A(i, i+1)
    f[i] = sub[i + 1];  // A(i+1, i)
  }
  if (cyclic) {
    e[m - 1] = super[m - 1];  // A(m-1, 0)
    f[m - 1] = sub[0];        // A(0, m-1)
  }
  std::vector<double> b = rhs;
  gsl_vector_view dv = gsl_vector_view_array(d.data(), m);
  gsl_vector_view ev = gsl_vector_view_array(e.data(), e.size());
  gsl_vector_view fv = gsl_vector_view_array(f.data(), f.size());
  gsl_vector_view bv = gsl_vector_view_array(b.data(), m);
  gsl_vector_view xv = gsl_vector_view_array(x.data(), m);
  int status = 0;
  if (cyclic) {
    if (m < 3) throw Error("tridiagonal solve: cyclic system needs at least 3 unknowns");
    status = gsl_linalg_solve_cyc_tridiag(&dv.vector, &ev.vector, &fv.vector, &bv.vector, &xv.vector);
  } else {
    status = gsl_linalg_solve_tridiag(&dv.vector, &ev.vector, &fv.vector, &bv.vector, &xv.vector);
  }
  if (status != 0) throw Error(fmt::format("tridiagonal solve failed: {}", gsl_strerror(status)));
  for (double v : x) {
    if (!std::isfinite(v)) throw Error("tridiagonal solve produced non-finite values");
  }
  return x;
}

// Interior update of one curve with its end nodes held fixed.
void implicit_curve_update(Curve& curve, const ForcingField& forcing, double t, double dt, int index) {
  const std::size_t n = curve.nodes.size();
  const bool closed = curve.closed;
  if (!closed && n < 3) return;
  if (closed && n < 3) throw Error(fmt::format("step: closed curve {} has fewer than 3 nodes", index));

  const std::size_t first = closed ? 0 : 1;
  const std::size_t last = closed ? n - 1 : n - 2;
  const std::size_t m = last - first + 1;
  std::vector<double> sub(m), diag(m), super(m), rx(m), ry(m);
  const auto& X = curve.nodes;

  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t i = first + r;
    const std::size_t im = (i + n - 1) % n;
    const std::size_t ip = (i + 1) % n;
    const double a = distance(X[i], X[im]);
    const double b = distance(X[ip], X[i]);
    if (a < kDegenerateGap || b < kDegenerateGap) {
      throw Error(fmt::format("step: degenerate spacing on curve {} at node {} (gaps {:.3g}, {:.3g})", index, i, a, b));
    }
    const double cm = 2.0 / (a * (a + b));
    const double cp = 2.0 / (b * (a + b));
    sub[r] = -dt * cm;
    super[r] = -dt * cp;
    diag[r] = 1.0 + dt * (cm + cp);
    Point2 rhs = X[i];
    if (!forcing.is_zero()) {
      const Point2 u = forcing(X[i], t);
      const Point2 tangent = unit(unit(X[ip] - X[i]) + unit(X[i] - X[im]));
      rhs += dt * (u - dot(u, tangent) * tangent);
    }
    if (!closed && r == 0) {
      rhs += dt * cm * X[0];
      sub[r] = 0.0;
    }
    if (!closed && r == m - 1) {
      rhs += dt * cp * X[n - 1];
      super[r] = 0.0;
    }
    rx[r] = rhs.x;
    ry[r] = rhs.y;
  }
  const auto nx = solve_rows(sub, diag, super, rx, closed);
  const auto ny = solve_rows(sub, diag, super, ry, closed);
  for (std::size_t r = 0; r < m; ++r) curve.nodes[first + r] = {nx[r], ny[r]};
}

}  // namespace

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::collision_precursor:
      return "collision_precursor";
    case EventKind::junction_collision:
      return "junction_collision";
    case EventKind::vanishing_loop:
      return "vanishing_loop";
  }
  return "unknown";
}

EventKind event_kind_from_string(const std::string& s) {
  if (s == "collision_precursor") return EventKind::collision_precursor;
  if (s == "junction_collision") return EventKind::junction_collision;
  if (s == "vanishing_loop") return EventKind::vanishing_loop;
  throw Error(fmt::format("unknown event kind '{}'", s));
}

void Scenario::check() const {
  if (!(dt > 0.0)) throw Error("scenario: dt must be positive");
  if (!(t_end > t_start)) throw Error("scenario: t_end must exceed t_start");
  if (snapshot_stride < 1) throw Error("scenario: snapshot_stride must be a positive integer");
  if (!(h_target > 0.0)) throw Error("scenario: h_target must be positive");
  if (!(eps_len > 0.0) || !(eps_col > 0.0)) throw Error("scenario: event thresholds must be positive");
  if (dt > 0.5 * h_target * h_target * (1.0 + 1e-12)) {
    throw Error(fmt::format("scenario: dt = {} exceeds h_target^2/2 = {}", dt, 0.5 * h_target * h_target));
  }
  const auto violations = validate(initial);
  if (!violations.empty()) throw Error("scenario: initial network is invalid: " + violations.front().message);
}

std::vector<Point2> discrete_curvature(const Curve& curve) {
  const std::size_t n = curve.nodes.size();
  if (n < 3) throw Error("discrete_curvature: curve needs at least 3 nodes");
  const std::size_t first = curve.closed ? 0 : 1;
  const std::size_t last = curve.closed ? n - 1 : n - 2;
  std::vector<Point2> out;
  out.reserve(last - first + 1);
  const auto& X = curve.nodes;
  for (std::size_t i = first; i <= last; ++i) {
    const std::size_t im = (i + n - 1) % n;
    const std::size_t ip = (i + 1) % n;
    const double a = distance(X[i], X[im]);
    const double b = distance(X[ip], X[i]);
    if (a < kDegenerateGap || b < kDegenerateGap) {
      throw Error(fmt::format("discrete_curvature: degenerate spacing at node {}", i));
    }
    out.push_back(2.0 * ((X[ip] - X[i]) / b - (X[i] - X[im]) / a) / (a + b));
  }
  return out;
}

Point2 fermat_point(const Point2& a, const Point2& b, const Point2& c, const Point2& start) {
  const std::array<Point2, 3> v{a, b, c};
  // A vertex with an angle of at least 120 degrees is the minimizer.
  for (int k = 0; k < 3; ++k) {
    const Point2 u = v[(k + 1) % 3] - v[k];
    const Point2 w = v[(k + 2) % 3] - v[k];
    const double nu = norm(u);
    const double nw = norm(w);
    if (nu == 0.0 || nw == 0.0) return v[k];
    if (dot(u, w) / (nu * nw) <= -0.5) return v[k];
  }
  auto objective = [&](const Point2& p) { return distance(p, a) + distance(p, b) + distance(p, c); };
  Point2 p = start;
  if (!is_finite(p) || p == a || p == b || p == c) p = (a + b + c) / 3.0;
  const double scale = std::max({distance(a, b), distance(b, c), distance(a, c)});
  for (int it = 0; it < 100; ++it) {
    Point2 g{};
    double jxx = 0.0, jxy = 0.0, jyy = 0.0;
    bool at_vertex = false;
    for (const auto& q : v) {
      const Point2 d = p - q;
      const double r = norm(d);
      if (r == 0.0) {
        at_vertex = true;
        break;
      }
      const Point2 e = d / r;
      g += e;
      jxx += (1.0 - e.x * e.x) / r;
      jxy += -e.x * e.y / r;
      jyy += (1.0 - e.y * e.y) / r;
    }
    if (at_vertex) {
      p = (a + b + c) / 3.0;
      continue;
    }
    if (norm(g) < 1e-15) break;
    const double det = jxx * jyy - jxy * jxy;
    Point2 delta = det > 0.0 ? Point2{-(jyy * g.x - jxy * g.y) / det, -(-jxy * g.x + jxx * g.y) / det} : -g * 1e-3 * scale;
    const double f0 = objective(p);
    double lambda = 1.0;
    Point2 trial = p + delta;
    while (objective(trial) > f0 && lambda > 1e-12) {
      lambda *= 0.5;
      trial = p + lambda * delta;
    }
    const double moved = norm(trial - p);
    p = trial;
    if (moved <= 1e-17 * std::max(1.0, scale)) break;
  }
  return p;
}

Network step(const Network& net, const ForcingField& forcing, double t, double dt) {
  if (!(dt > 0.0)) throw Error("step: dt must be positive");
  Network out = net;

  for (std::size_t c = 0; c < out.curves.size(); ++c) {
    implicit_curve_update(out.curves[c], forcing, t, dt, static_cast<int>(c));
  }

  // Junctions move to the Fermat point of their three neighbouring nodes.
  for (auto& [id, pos] : out.junctions) {
    const auto ends = junction_ends(out, id);
    if (ends.size() != 3) throw Error(fmt::format("step: junction {} has valence {}", id, ends.size()));
    std::array<Point2, 3> nb{};
    for (int k = 0; k < 3; ++k) {
      const auto [c, e] = ends[k];
      const auto& nodes = out.curves[c].nodes;
      if (nodes.size() >= 3) {
        nb[k] = e == 0 ? nodes[1] : nodes[nodes.size() - 2];
      } else {
        const EndTag& other = out.curves[c].ends[1 - e];
        nb[k] = other.kind == EndKind::junction ? net.junctions.at(other.junction)
                                                 : (e == 0 ? nodes[1] : nodes[0]);
      }
    }
    const Point2 p = fermat_point(nb[0], nb[1], nb[2], pos);
    pos = p;
    for (int k = 0; k < 3; ++k) {
      const auto [c, e] = ends[k];
      auto& nodes = out.curves[c].nodes;
      if (e == 0) {
        nodes.front() = p;
        if (nodes.size() >= 3 && nodes[1] == p) nodes.erase(nodes.begin() + 1);
      } else {
        nodes.back() = p;
        if (nodes.size() >= 3 && nodes[nodes.size() - 2] == p) nodes.erase(nodes.end() - 2);
      }
    }
  }

  // Free ends follow the displacement of their neighbour.
  for (std::size_t c = 0; c < out.curves.size(); ++c) {
    auto& curve = out.curves[c];
    if (curve.closed) continue;
    const auto& old_nodes = net.curves[c].nodes;
    if (curve.nodes.size() != old_nodes.size()) continue;
    const std::size_t n = curve.nodes.size();
    if (curve.ends[0].kind == EndKind::free) curve.nodes[0] = old_nodes[0] + (curve.nodes[1] - old_nodes[1]);
    if (curve.ends[1].kind == EndKind::free) {
      curve.nodes[n - 1] = old_nodes[n - 1] + (curve.nodes[n - 2] - old_nodes[n - 2]);
    }
  }
  return out;
}

bool needs_regrid(const Curve& curve, double h_target) {
  if (!curve.closed && curve.nodes.size() == 2 && curve.length() < 2.0 * h_target) return false;
  if (curve.closed && curve.nodes.size() <= 3 && curve.length() < 6.0 * h_target) return false;
  const double lo = 0.5 * h_target;
  const double hi = 2.0 * h_target;
  for (std::size_t k = 0; k < curve.segment_count(); ++k) {
    const auto [a, b] = curve.segment(k);
    const double len = distance(a, b);
    if (len < lo || len > hi) return true;
  }
  return false;
}

Curve regrid(const Curve& curve, double h_target) {
  if (!(h_target > 0.0)) throw Error("regrid: h_target must be positive");
  const std::size_t nseg_old = curve.segment_count();
  if (nseg_old == 0) return curve;
  std::vector<double> cum(nseg_old + 1, 0.0);
  for (std::size_t k = 0; k < nseg_old; ++k) {
    const auto [a, b] = curve.segment(k);
    cum[k + 1] = cum[k] + distance(a, b);
  }
  const double total = cum.back();
  const long min_seg = curve.closed ? 3 : 1;
  const long nseg = std::max(min_seg, std::lround(total / h_target));
  Curve out;
  out.ends = curve.ends;
  out.closed = curve.closed;
  const long count = curve.closed ? nseg : nseg + 1;
  out.nodes.reserve(static_cast<std::size_t>(count));
  std::size_t k = 0;
  for (long j = 0; j < count; ++j) {
    const double s = total * static_cast<double>(j) / static_cast<double>(nseg);
    while (k + 1 < nseg_old && cum[k + 1] < s) ++k;
    const auto [a, b] = curve.segment(k);
    const double span = cum[k + 1] - cum[k];
    const double w = span > 0.0 ? std::clamp((s - cum[k]) / span, 0.0, 1.0) : 0.0;
    out.nodes.push_back(a + w * (b - a));
  }
  out.nodes.front() = curve.nodes.front();
  if (!curve.closed) out.nodes.back() = curve.nodes.back();
  return out;
}

std::vector<Event> detect_events(const Network& net, double eps_len, double eps_col) {
  std::vector<Event> out;
  for (int c = 0; c < static_cast<int>(net.curves.size()); ++c) {
    const auto& curve = net.curves[c];
    const double len = curve.length();
    if (curve.closed) {
      if (len < eps_len) {
        Point2 centroid{};
        for (const auto& p : curve.nodes) centroid += p;
        out.push_back({0.0, EventKind::vanishing_loop, {c}, {}, len, centroid / static_cast<double>(curve.nodes.size())});
      }
      continue;
    }
    if (curve.ends[0].kind == EndKind::junction && curve.ends[1].kind == EndKind::junction && len < eps_len) {
      out.push_back({0.0,
                     EventKind::collision_precursor,
                     {c},
                     {curve.ends[0].junction, curve.ends[1].junction},
                     len,
                     0.5 * (curve.nodes.front() + curve.nodes.back())});
    }
  }
  for (auto i = net.junctions.begin(); i != net.junctions.end(); ++i) {
    for (auto j = std::next(i); j != net.junctions.end(); ++j) {
      const double d = distance(i->second, j->second);
      if (d < eps_col) {
        out.push_back({0.0, EventKind::junction_collision, {}, {i->first, j->first}, d, 0.5 * (i->second + j->second)});
      }
    }
  }
  return out;
}

FlowTrajectory run(const Scenario& scenario) {
  scenario.check();
  FlowTrajectory traj;
  traj.forcing = scenario.forcing;
  Network net = scenario.initial;
  traj.snapshots.push_back({scenario.t_start, net});

  const bool moving_clamps = scenario.clamp_velocity != Point2{};
  std::vector<std::array<Point2, 2>> clamp_origin(net.curves.size());
  for (std::size_t c = 0; c < net.curves.size(); ++c) {
    clamp_origin[c] = {net.curves[c].nodes.front(), net.curves[c].nodes.back()};
  }

  const long nsteps = std::max(1L, std::lround((scenario.t_end - scenario.t_start) / scenario.dt));
  for (long k = 1; k <= nsteps; ++k) {
    const double t = scenario.t_start + static_cast<double>(k - 1) * scenario.dt;
    const double t_next = scenario.t_start + static_cast<double>(k) * scenario.dt;
    if (moving_clamps) {
      const Point2 shift = (t_next - scenario.t_start) * scenario.clamp_velocity;
      for (std::size_t c = 0; c < net.curves.size(); ++c) {
        auto& curve = net.curves[c];
        if (curve.closed) continue;
        if (curve.ends[0].kind == EndKind::clamped) curve.nodes.front() = clamp_origin[c][0] + shift;
        if (curve.ends[1].kind == EndKind::clamped) curve.nodes.back() = clamp_origin[c][1] + shift;
      }
    }
    try {
      net = step(net, scenario.forcing, t, scenario.dt);
    } catch (const Error& e) {
      throw Error(fmt::format("run: step failed at t = {:.17g}: {}", t, e.what()));
    }
    if (scenario.regrid) {
      for (auto& curve : net.curves) {
        if (needs_regrid(curve, scenario.h_target)) curve = regrid(curve, scenario.h_target);
      }
    }
    auto events = detect_events(net, scenario.eps_len, scenario.eps_col);
    if (!events.empty()) {
      for (auto& e : events) e.t = t_next;
      traj.snapshots.push_back({t_next, net});
      traj.events = std::move(events);
      return traj;
    }
    if (k % scenario.snapshot_stride == 0 || k == nsteps) traj.snapshots.push_back({t_next, net});
  }
  return traj;
}

}  // namespace triodlab
