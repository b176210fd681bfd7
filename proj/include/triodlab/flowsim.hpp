#pragma once

// Front-tracking integrator for v = h + u_perp on networks with triple junctions.

#include <string>
#include <vector>

#include "triodlab/forcing.hpp"
#include "triodlab/netgeom.hpp"

namespace triodlab {

enum class EventKind { collision_precursor, junction_collision, vanishing_loop };

std::string to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& s);

struct Event {
  double t = 0.0;
  EventKind kind = EventKind::collision_precursor;
  std::vector<int> curves;
  std::vector<int> junctions;
  double measure = 0.0;  // offending length or distance
  Point2 where{};
};

struct Snapshot {
  double t = 0.0;
  Network net;
};

struct FlowTrajectory {
  std::vector<Snapshot> snapshots;
  ForcingField forcing;
  std::vector<Event> events;

  double t_first() const { return snapshots.front().t; }
  double t_last() const { return snapshots.back().t; }
  bool halted() const { return !events.empty(); }
};

struct Scenario {
  Network initial;
  ForcingField forcing;
  double t_start = 0.0;
  double dt = 1e-5;
  double t_end = 0.1;
  int snapshot_stride = 100;
  double h_target = 0.01;
  double eps_len = 0.05;
  double eps_col = 0.05;
  /// Prescribed velocity of clamped endpoints; zero keeps them fixed.
  Point2 clamp_velocity{};
  /// Regrid when a curve's spacing leaves [h_target/2, 2*h_target].
  bool regrid = true;

  /// Throws Error when the scenario invariants do not hold.
  void check() const;
};

/// Arclength second difference at interior nodes (closed curves: every node).
std::vector<Point2> discrete_curvature(const Curve& curve);

/// Fermat point of three points: the position where unit vectors towards them sum to zero.
/// When one angle of the triangle is >= 120 degrees the answer is that vertex.
Point2 fermat_point(const Point2& a, const Point2& b, const Point2& c, const Point2& start);

/// One semi-implicit time step; clamped endpoints are left where they are.
Network step(const Network& net, const ForcingField& forcing, double t, double dt);

/// Uniform arclength resampling with segment count round(L / h_target); endpoints kept.
Curve regrid(const Curve& curve, double h_target);

/// True when some segment of the curve is outside [h_target/2, 2*h_target].
bool needs_regrid(const Curve& curve, double h_target);

std::vector<Event> detect_events(const Network& net, double eps_len, double eps_col);

FlowTrajectory run(const Scenario& scenario);

}  // namespace triodlab
