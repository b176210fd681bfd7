#pragma once

// Planar networks, the standard triple junction and its similarity class.

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace triodlab {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Point2& operator+=(const Point2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Point2& operator-=(const Point2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr Point2& operator*=(double s) {
    x *= s;
    y *= s;
    return *this;
  }
  friend constexpr bool operator==(const Point2&, const Point2&) = default;
};

constexpr Point2 operator+(Point2 a, const Point2& b) { return a += b; }
constexpr Point2 operator-(Point2 a, const Point2& b) { return a -= b; }
constexpr Point2 operator-(const Point2& a) { return {-a.x, -a.y}; }
constexpr Point2 operator*(Point2 a, double s) { return a *= s; }
constexpr Point2 operator*(double s, Point2 a) { return a *= s; }
constexpr Point2 operator/(Point2 a, double s) { return {a.x / s, a.y / s}; }

constexpr double dot(const Point2& a, const Point2& b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(const Point2& a, const Point2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Point2& a) { return std::hypot(a.x, a.y); }
constexpr double norm2(const Point2& a) { return dot(a, a); }
inline double distance(const Point2& a, const Point2& b) { return norm(a - b); }
/// Counterclockwise quarter turn.
constexpr Point2 perp(const Point2& a) { return {-a.y, a.x}; }
inline Point2 rotate(const Point2& a, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * a.x - s * a.y, s * a.x + c * a.y};
}
inline bool is_finite(const Point2& a) { return std::isfinite(a.x) && std::isfinite(a.y); }

/// Element R_theta(J) + xi of the similarity class of the standard triod J.
///
/// The triod is invariant under rotation by 2*pi/3, so theta is kept in the
/// canonical range (-pi/3, pi/3]; fitted angles are only meaningful modulo
/// that symmetry.
class TriodFrame {
 public:
  TriodFrame() = default;
  /// Normalizes theta into (-pi/3, pi/3].
  TriodFrame(double theta, Point2 xi);

  double theta() const { return theta_; }
  const Point2& xi() const { return xi_; }

  /// Unit direction of ray j in {0, 1, 2}.
  Point2 ray(int j) const;

  /// Maps a point into frame coordinates: R_{-theta}(x - xi).
  Point2 to_local(const Point2& x) const { return rotate(x - xi_, -theta_); }
  Point2 to_world(const Point2& local) const { return rotate(local, theta_) + xi_; }

  static double normalize_angle(double theta);

 private:
  double theta_ = 0.0;
  Point2 xi_{};
};

enum class EndKind { free, clamped, junction };

struct EndTag {
  EndKind kind = EndKind::free;
  int junction = -1;  // valid only for EndKind::junction

  static EndTag free_end() { return {EndKind::free, -1}; }
  static EndTag clamped() { return {EndKind::clamped, -1}; }
  static EndTag at_junction(int id) { return {EndKind::junction, id}; }
  friend bool operator==(const EndTag&, const EndTag&) = default;
};

/// Polyline curve. Closed curves store each node once and ignore end tags.
struct Curve {
  std::vector<Point2> nodes;
  std::array<EndTag, 2> ends{};
  bool closed = false;

  std::size_t segment_count() const {
    if (nodes.size() < 2) return 0;
    return closed ? nodes.size() : nodes.size() - 1;
  }
  /// Endpoints of segment k.
  std::pair<Point2, Point2> segment(std::size_t k) const {
    return {nodes[k], nodes[(k + 1) % nodes.size()]};
  }
  double length() const;
};

struct Network {
  std::vector<Curve> curves;
  std::map<int, Point2> junctions;

  double total_length() const;
};

/// Three polyline rays of the given extent from frame.xi(), clamped at the outer ends.
Network standard_triod(const TriodFrame& frame, double extent, double h);

/// Euclidean distance from x to the three-ray set R_theta(J) + xi.
double dist_to_triod(const Point2& x, const TriodFrame& frame);

/// max{R^-1 |xi1 - xi2|, |theta1 - theta2|}, angles taken modulo 2*pi/3.
double d_metric(const TriodFrame& a, const TriodFrame& b, double R);

struct Violation {
  std::string invariant;  // "finite", "node_count", "distinct_nodes", "valence", "junction_position", "embeddedness"
  std::vector<int> curves;
  std::vector<int> junctions;
  std::vector<Point2> where;
  std::string message;
};

std::vector<Violation> validate(const Network& net);

/// Unit tangents at each junction, pointing from the junction to the first interior node,
/// summed; returns the largest norm of that sum over all junctions (0 with no junctions).
double herring_residual(const Network& net);

/// Node positions of curve endpoints that sit on the junction `id`: (curve index, end index).
std::vector<std::pair<int, int>> junction_ends(const Network& net, int id);

/// Segment intersection test used for embeddedness checks. Shared endpoints do not count.
bool segments_intersect(const Point2& a0, const Point2& a1, const Point2& b0, const Point2& b1);

}  // namespace triodlab
