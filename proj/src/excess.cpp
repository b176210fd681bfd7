#include "triodlab/excess.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/core.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <limits>
#include <map>
#include <numbers>

#include "triodlab/parallel.hpp"

namespace triodlab {

namespace {

using std::numbers::pi;
constexpr double kTwoPiThird = 2.0 * pi / 3.0;
constexpr double kSliceTolerance = 1e-9;

std::string describe(const Window& w) {
  return fmt::format("window (center = ({}, {}), s = {}, R = {})", w.center.x, w.center.y, w.s, w.R);
}

Network normalize(const Network& net, const Point2& c, double R) {
  Network out = net;
  for (auto& curve : out.curves) {
    for (auto& p : curve.nodes) p = (p - c) / R;
  }
  for (auto& [id, pos] : out.junctions) pos = (pos - c) / R;
  return out;
}

TriodFrame normalize(const TriodFrame& f, const Point2& c, double R) { return {f.theta(), (f.xi() - c) / R}; }

// Squared distance to a triod with precomputed ray directions.
struct FastTriod {
  Point2 xi;
  std::array<Point2, 3> rays;

  explicit FastTriod(const TriodFrame& f) : xi(f.xi()), rays{f.ray(0), f.ray(1), f.ray(2)} {}

  double dist2(const Point2& x) const {
    const Point2 p = x - xi;
    const double t = std::max({0.0, dot(p, rays[0]), dot(p, rays[1]), dot(p, rays[2])});
    return std::max(0.0, norm2(p) - t * t);
  }
};

struct WeightedPoint {
  Point2 p;
  double w;
};

std::vector<WeightedPoint> excess_samples(const std::vector<NormalizedSlice>& slices) {
  std::vector<WeightedPoint> out;
  for (const auto& slice : slices) {
    for (const auto& a : to_varifold(slice.net, Ball{{}, 4.0}).atoms) out.push_back({a.midpoint, slice.weight * a.weight});
  }
  return out;
}

double objective(const std::vector<WeightedPoint>& pts, const TriodFrame& f) {
  const FastTriod t(f);
  double s = 0.0;
  for (const auto& q : pts) s += q.w * t.dist2(q.p);
  return s;
}

// Merges samples into square cells (weighted centroids) for the coarse search.
std::vector<WeightedPoint> decimate(const std::vector<WeightedPoint>& pts, double cell) {
  std::map<std::pair<long, long>, WeightedPoint> bins;
  for (const auto& q : pts) {
    const std::pair<long, long> key{static_cast<long>(std::floor(q.p.x / cell)),
                                    static_cast<long>(std::floor(q.p.y / cell))};
    auto& b = bins[key];
    b.p += q.w * q.p;
    b.w += q.w;
  }
  std::vector<WeightedPoint> out;
  out.reserve(bins.size());
  for (const auto& [key, b] : bins) {
    if (b.w > 0.0) out.push_back({b.p / b.w, b.w});
  }
  return out;
}

struct NelderMeadData {
  const std::vector<WeightedPoint>* pts;
};

double penalized(const std::vector<WeightedPoint>& pts, double theta, Point2 xi) {
  const double r = norm(xi);
  double extra = 0.0;
  if (r > 1.0) {
    extra = 1e6 * (r - 1.0) * (r - 1.0);
    xi = xi / r;
  }
  return objective(pts, TriodFrame(theta, xi)) + extra;
}

double nm_function(const gsl_vector* v, void* params) {
  const auto* data = static_cast<NelderMeadData*>(params);
  return penalized(*data->pts, gsl_vector_get(v, 0), {gsl_vector_get(v, 1), gsl_vector_get(v, 2)});
}

std::pair<TriodFrame, double> refine(const std::vector<WeightedPoint>& pts, const TriodFrame& start,
                                     const FitConfig& config) {
  NelderMeadData data{&pts};
  gsl_multimin_function fn{&nm_function, 3, &data};
  gsl_vector* x = gsl_vector_alloc(3);
  gsl_vector* step = gsl_vector_alloc(3);
  gsl_vector_set(x, 0, start.theta());
  gsl_vector_set(x, 1, start.xi().x);
  gsl_vector_set(x, 2, start.xi().y);
  gsl_vector_set(step, 0, 0.5 * config.theta_step);
  gsl_vector_set(step, 1, 0.5 * config.xi_step);
  gsl_vector_set(step, 2, 0.5 * config.xi_step);
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 3);
  gsl_multimin_fminimizer_set(s, &fn, x, step);
  for (int it = 0; it < config.max_iterations; ++it) {
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), config.tolerance) == GSL_SUCCESS) break;
  }
  const gsl_vector* best = gsl_multimin_fminimizer_x(s);
  Point2 xi{gsl_vector_get(best, 1), gsl_vector_get(best, 2)};
  if (norm(xi) > 1.0) xi = xi / norm(xi);
  const TriodFrame frame(gsl_vector_get(best, 0), xi);
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(step);
  gsl_vector_free(x);
  return {frame, objective(pts, frame)};
}

// Spacing of the last snapshot strictly before t0 and its predecessor.
double spacing_before(const FlowTrajectory& traj, double t0) {
  const auto& snaps = traj.snapshots;
  for (std::size_t k = snaps.size(); k-- > 1;) {
    if (snaps[k].t <= t0) return snaps[k].t - snaps[k - 1].t;
  }
  return snaps.size() > 1 ? snaps[1].t - snaps[0].t : 0.0;
}

double linear_slope(const std::vector<double>& x, const std::vector<double>& y, double* intercept) {
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw Error("least squares: degenerate abscissae");
  const double slope = sxy / sxx;
  if (intercept) *intercept = my - slope * mx;
  return slope;
}

}  // namespace

void check_window(const FlowTrajectory& traj, const Window& w) {
  if (!(w.R > 0.0) || !std::isfinite(w.R) || !is_finite(w.center) || !std::isfinite(w.s)) {
    throw Error(fmt::format("invalid {}", describe(w)));
  }
  if (traj.snapshots.empty()) throw Error(fmt::format("{}: empty trajectory", describe(w)));
  const double tol = kSliceTolerance * w.R * w.R;
  const double lo = w.s - 2.0 * w.R * w.R;
  const double hi = w.s + 2.0 * w.R * w.R;
  if (lo < traj.t_first() - tol || hi > traj.t_last() + tol) {
    throw Error(fmt::format("{} exceeds the time range [{}, {}]", describe(w), traj.t_first(), traj.t_last()));
  }
  const double r2 = 16.0 * w.R * w.R;
  for (const auto& snap : traj.snapshots) {
    if (snap.t < lo - tol || snap.t > hi + tol) continue;
    for (const auto& curve : snap.net.curves) {
      if (curve.closed || curve.nodes.empty()) continue;
      for (int e = 0; e < 2; ++e) {
        if (curve.ends[static_cast<std::size_t>(e)].kind == EndKind::junction) continue;
        const Point2& p = e == 0 ? curve.nodes.front() : curve.nodes.back();
        if (norm2(p - w.center) < r2) {
          throw Error(fmt::format("{}: curve end ({}, {}) inside B_4R at t = {}", describe(w), p.x, p.y, snap.t));
        }
      }
    }
  }
}

std::vector<NormalizedSlice> normalized_slices(const FlowTrajectory& traj, const Window& w, double t_lo, double t_hi) {
  std::vector<NormalizedSlice> out;
  const double R2 = w.R * w.R;
  for (const auto& snap : traj.snapshots) {
    const double t = (snap.t - w.s) / R2;
    if (t < t_lo - kSliceTolerance || t > t_hi + kSliceTolerance) continue;
    out.push_back({t, 0.0, normalize(snap.net, w.center, w.R)});
  }
  for (std::size_t k = 1; k < out.size(); ++k) {
    const double dt = out[k].t - out[k - 1].t;
    out[k - 1].weight += 0.5 * dt;
    out[k].weight += 0.5 * dt;
  }
  return out;
}

double l2_excess(const FlowTrajectory& traj, const Window& w, const TriodFrame& frame) {
  check_window(traj, w);
  const auto slices = normalized_slices(traj, w, -2.0, 2.0);
  if (slices.size() < 2) throw Error(fmt::format("l2_excess: fewer than two snapshots in {}", describe(w)));
  return std::sqrt(objective(excess_samples(slices), normalize(frame, w.center, w.R)));
}

double u_norm(const FlowTrajectory& traj, const Window& w, const ForcingField& forcing) {
  check_window(traj, w);
  const auto slices = normalized_slices(traj, w, -2.0, 2.0);
  if (slices.size() < 2) throw Error(fmt::format("u_norm: fewer than two snapshots in {}", describe(w)));
  if (forcing.is_zero()) return 0.0;
  const ForcingField u = forcing.rescaled(w.center, w.s, w.R);
  const double p = forcing.p();
  const double q = forcing.q();
  double total = 0.0;
  for (const auto& slice : slices) {
    double inner = 0.0;
    for (const auto& a : to_varifold(slice.net, Ball{{}, 4.0}).atoms) {
      inner += std::pow(norm(u(a.midpoint, slice.t)), p) * a.weight;
    }
    total += slice.weight * std::pow(inner, q / p);
  }
  return std::pow(total, 1.0 / q);
}

FitResult fit_frame(const FlowTrajectory& traj, const Window& w, const FitConfig& config) {
  check_window(traj, w);
  if (!(config.theta_step > 0.0) || !(config.xi_step > 0.0) || config.candidates < 1) {
    throw Error("fit_frame: invalid configuration");
  }
  const auto slices = normalized_slices(traj, w, -2.0, 2.0);
  if (slices.size() < 2) throw Error(fmt::format("fit_frame: fewer than two snapshots in {}", describe(w)));
  const auto pts = excess_samples(slices);
  double mass = 0.0;
  for (const auto& q : pts) mass += q.w;
  if (!(mass > 0.0)) throw Error(fmt::format("fit_frame: no mass in {}", describe(w)));

  // Coarse stage on binned samples.
  const auto coarse = decimate(pts, 0.025);
  std::vector<double> thetas;
  for (double th = -pi / 3.0 + config.theta_step; th <= pi / 3.0 + 1e-12; th += config.theta_step) thetas.push_back(th);
  std::vector<Point2> xis;
  const int m = static_cast<int>(std::floor(1.0 / config.xi_step + 1e-9));
  for (int i = -m; i <= m; ++i) {
    for (int j = -m; j <= m; ++j) {
      const Point2 xi{i * config.xi_step, j * config.xi_step};
      if (norm2(xi) <= 1.0 + 1e-12) xis.push_back(xi);
    }
  }
  std::vector<double> values(thetas.size() * xis.size());
  parallel_for(thetas.size(), [&](std::size_t a) {
    for (std::size_t b = 0; b < xis.size(); ++b) values[a * xis.size() + b] = objective(coarse, TriodFrame(thetas[a], xis[b]));
  });
  std::vector<std::size_t> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<TriodFrame> starts;
  for (std::size_t idx : order) {
    const TriodFrame f(thetas[idx / xis.size()], xis[idx % xis.size()]);
    bool distinct = true;
    for (const auto& g : starts) {
      if (std::abs(TriodFrame::normalize_angle(f.theta() - g.theta())) < 2.5 * config.theta_step &&
          distance(f.xi(), g.xi()) < 2.5 * config.xi_step) {
        distinct = false;
      }
    }
    if (distinct) starts.push_back(f);
    if (static_cast<int>(starts.size()) >= config.candidates) break;
  }

  // Local refinement on the full data.
  TriodFrame best;
  double best_value = std::numeric_limits<double>::infinity();
  for (const auto& f : starts) {
    auto [frame, value] = refine(pts, f, config);
    if (value < best_value) {
      best_value = value;
      best = frame;
    }
  }
  return {TriodFrame(best.theta(), w.center + w.R * best.xi()), std::sqrt(best_value)};
}

DecayProfile decay_profile(const FlowTrajectory& traj, const Point2& center, double s,
                           const std::vector<double>& scales, const FitConfig& config) {
  if (scales.size() < 3) throw Error("decay_profile: need at least 3 scales");
  for (std::size_t k = 1; k < scales.size(); ++k) {
    if (!(scales[k] > 0.0) || scales[k] > 0.5 * scales[k - 1] * (1.0 + 1e-12)) {
      throw Error("decay_profile: consecutive scales must shrink by a factor of at least 2");
    }
  }
  DecayProfile p;
  p.center = center;
  p.s = s;
  for (double scale : scales) {
    const auto fit = fit_frame(traj, Window{center, s, scale}, config);
    p.entries.push_back({scale, fit.frame, fit.mu, 0.0});
  }
  for (auto& e : p.entries) e.drift = d_metric(e.frame, p.entries.front().frame, e.scale);
  std::vector<double> lx, ly;
  for (const auto& e : p.entries) {
    if (e.mu > kExcessNoiseFloor) {
      lx.push_back(std::log(e.scale));
      ly.push_back(std::log(e.mu));
    }
  }
  if (lx.size() < 2) {
    p.exponent_defined = false;
    p.exponent = std::numeric_limits<double>::quiet_NaN();
  } else {
    p.exponent = linear_slope(lx, ly, nullptr);
  }
  return p;
}

JunctionTrack track_junctions(const FlowTrajectory& traj, const Ball& region, const TrackConfig& config) {
  JunctionTrack track;
  for (const auto& snap : traj.snapshots) {
    track.times.push_back(snap.t);
    std::optional<Point2> found;
    if (!snap.net.junctions.empty()) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& [id, pos] : snap.net.junctions) {
        const double d = norm2(pos - region.center);
        if (region.contains(pos) && d < best) {
          best = d;
          found = pos;
        }
      }
    } else {
      // Untagged data: maximize the local Gaussian mass over the nodes in the region, then refine.
      const double tau = config.tau;
      const double rt = 6.0 * std::sqrt(tau);
      auto density = [&](const Point2& x) { return gaussian_mass(snap.net, x, snap.t + tau, snap.t, rt); };
      double best = -1.0;
      Point2 arg{};
      for (const auto& curve : snap.net.curves) {
        for (const auto& p : curve.nodes) {
          if (!region.contains(p)) continue;
          const double v = density(p);
          if (v > best) {
            best = v;
            arg = p;
          }
        }
      }
      if (best >= 0.0) {
        double h = std::sqrt(tau);
        const int n = std::max(3, config.grid / 4);
        for (int pass = 0; pass < 3; ++pass) {
          const Point2 c = arg;
          for (int i = -n; i <= n; ++i) {
            for (int j = -n; j <= n; ++j) {
              const Point2 x = c + (h / n) * Point2{static_cast<double>(i), static_cast<double>(j)};
              if (!region.contains(x)) continue;
              const double v = density(x);
              if (v > best) {
                best = v;
                arg = x;
              }
            }
          }
          h /= n;
        }
        if (best >= 1.25) found = arg;
      }
    }
    track.gaps.push_back(!found.has_value());
    track.positions.push_back(found.value_or(Point2{std::numeric_limits<double>::quiet_NaN(),
                                                    std::numeric_limits<double>::quiet_NaN()}));
  }
  return track;
}

double default_holder_gap(const JunctionTrack& track) {
  std::vector<double> t;
  for (std::size_t i = 0; i < track.times.size(); ++i) {
    if (!track.gaps[i]) t.push_back(track.times[i]);
  }
  if (t.size() < 2) return 0.0;
  std::vector<double> d;
  for (std::size_t i = 1; i < t.size(); ++i) d.push_back(t[i] - t[i - 1]);
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
  return 4.0 * d[d.size() / 2];
}

HolderFit holder_exponent(const JunctionTrack& track, double t_min_gap) {
  if (track.times.size() != track.positions.size() || track.times.size() != track.gaps.size()) {
    throw Error("holder_exponent: track fields differ in length");
  }
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < track.times.size(); ++i) {
    if (!track.gaps[i]) idx.push_back(i);
  }
  if (idx.size() < 10) throw Error(fmt::format("holder_exponent: {} non-gap samples, need at least 10", idx.size()));
  HolderFit fit;
  std::vector<double> lx, ly;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      const double dt = std::abs(track.times[idx[b]] - track.times[idx[a]]);
      if (dt < t_min_gap || dt == 0.0) {
        ++fit.pairs_below_gap;
        continue;
      }
      const double da = distance(track.positions[idx[b]], track.positions[idx[a]]);
      if (da <= kHolderFloor) {
        ++fit.pairs_below_floor;
        continue;
      }
      lx.push_back(std::log(dt));
      ly.push_back(std::log(da));
    }
  }
  fit.pairs_used = lx.size();
  if (lx.empty() && fit.pairs_below_floor > 0) {
    fit.infinite_regularity = true;
    fit.exponent = std::numeric_limits<double>::infinity();
    return fit;
  }
  if (lx.size() < 2) throw Error(fmt::format("holder_exponent: too few valid pairs ({})", lx.size()));
  double intercept = 0.0;
  fit.exponent = linear_slope(lx, ly, &intercept);
  fit.constant = std::exp(intercept);
  return fit;
}

CurvatureEnergy curvature_energy(const FlowTrajectory& traj, const Window& w) {
  if (!(w.R > 0.0)) throw Error(fmt::format("invalid {}", describe(w)));
  // Spatial validity only: the time range is clipped to the data.
  const auto slices = normalized_slices(traj, w, -1.0, 1.0);
  if (slices.size() < 2) throw Error(fmt::format("curvature_energy: fewer than two snapshots in {}", describe(w)));
  for (const auto& slice : slices) {
    for (const auto& curve : slice.net.curves) {
      if (curve.closed || curve.nodes.empty()) continue;
      for (int e = 0; e < 2; ++e) {
        if (curve.ends[static_cast<std::size_t>(e)].kind == EndKind::junction) continue;
        const Point2& p = e == 0 ? curve.nodes.front() : curve.nodes.back();
        if (norm2(p) < 16.0) throw Error(fmt::format("{}: curve end inside B_4R", describe(w)));
      }
    }
  }
  const auto phi = phi_rad();
  CurvatureEnergy out;
  for (const auto& slice : slices) {
    double mass = 0.0;
    double energy = 0.0;
    for (const auto& a : curved_atoms(slice.net, Ball{{}, 1.5})) {
      const double f = phi(a.midpoint);
      mass += f * f * a.weight;
      energy += norm2(a.curvature) * f * f * a.weight;
    }
    out.mass_defect_sup = std::max(out.mass_defect_sup, std::abs(mass - kPhiRadMass));
    out.energy += slice.weight * energy;
  }
  return out;
}

double shrinker_energy(const FlowTrajectory& traj, double t0, const Window& w) {
  if (!(w.R > 0.0)) throw Error(fmt::format("invalid {}", describe(w)));
  if (traj.snapshots.empty() || !(t0 > traj.t_first())) throw Error("shrinker_energy: t0 must follow the first snapshot");
  const double R2 = w.R * w.R;
  const double guard = 0.999 * spacing_before(traj, t0);
  const double t0n = (t0 - w.s) / R2;
  const double hi = std::min(2.0, (t0 - guard - w.s) / R2);
  auto slices = normalized_slices(traj, w, -2.0, hi);
  slices.erase(std::remove_if(slices.begin(), slices.end(), [&](const NormalizedSlice& s) { return !(s.t < t0n); }),
               slices.end());
  if (slices.size() < 2) throw Error(fmt::format("shrinker_energy: fewer than two snapshots before t0 in {}", describe(w)));
  double total = 0.0;
  for (const auto& slice : slices) {
    const double d = t0n - slice.t;
    double inner = 0.0;
    for (const auto& a : curved_atoms(slice.net, Ball{{}, 1.0})) {
      const Point2 x = a.midpoint;
      const Point2 xperp = x - dot(x, a.tangent) * a.tangent;
      inner += norm2(a.curvature + xperp / (2.0 * d)) * rho({}, t0n, x, slice.t) * a.weight;
    }
    total += slice.weight * inner;
  }
  return total;
}

NonconResult weighted_noncon(const FlowTrajectory& traj, double t0, const Point2& center, double kappa,
                             const TriodFrame& frame, double R, double horizon) {
  if (!(kappa >= 0.0 && kappa < 1.0)) throw Error("weighted_noncon: kappa must lie in [0, 1)");
  if (!(R > 0.0) || !(horizon > 0.0)) throw Error("weighted_noncon: R and horizon must be positive");
  if (traj.snapshots.empty() || !(t0 > traj.t_first())) throw Error("weighted_noncon: t0 must follow the first snapshot");
  const Window w{center, t0, R};
  const double guard = 0.999 * spacing_before(traj, t0);
  auto slices = normalized_slices(traj, w, -horizon, -guard / (R * R));
  slices.erase(std::remove_if(slices.begin(), slices.end(), [](const NormalizedSlice& s) { return !(s.t < 0.0); }),
               slices.end());
  if (slices.empty()) throw Error("weighted_noncon: no snapshots before t0");
  const FastTriod triod(normalize(frame, center, R));
  NonconResult out;
  out.value = -1.0;
  for (const auto& slice : slices) {
    double inner = 0.0;
    for (const auto& a : to_varifold(slice.net, Ball{{}, 0.75}).atoms) {
      inner += rho({}, 0.0, a.midpoint, slice.t) * triod.dist2(a.midpoint) * a.weight;
    }
    const double v = std::pow(-slice.t, -kappa) * inner;
    if (v > out.value) {
      out.value = v;
      out.t_worst = t0 + slice.t * R * R;
    }
  }
  return out;
}

GraphSamples graph_extract(const Network& net, const TriodFrame& frame, int j, double a, double b, int samples,
                           double height) {
  if (j < 1 || j > 3) throw Error(fmt::format("graph_extract: ray index {} not in 1..3", j));
  if (!(a > 0.0) || !(b > a) || samples < 2 || !(height > 0.0)) throw Error("graph_extract: invalid interval");
  GraphSamples out;
  const double rot = -kTwoPiThird * (j - 1);
  std::vector<std::vector<Point2>> local;
  for (const auto& curve : net.curves) {
    std::vector<Point2> pts;
    pts.reserve(curve.nodes.size() + 1);
    for (const auto& p : curve.nodes) pts.push_back(rotate(frame.to_local(p), rot));
    if (curve.closed && !pts.empty()) pts.push_back(pts.front());
    local.push_back(std::move(pts));
  }
  auto inside = [&](const Point2& p) { return p.x >= a && p.x <= b && std::abs(p.y) <= height; };
  // Folds: direction reversals in x along runs of nodes inside the strip.
  for (const auto& pts : local) {
    int sign = 0;
    for (std::size_t k = 1; k < pts.size(); ++k) {
      if (!inside(pts[k - 1]) || !inside(pts[k])) {
        sign = 0;
        continue;
      }
      const double dx = pts[k].x - pts[k - 1].x;
      const int sk = dx > 0.0 ? 1 : (dx < 0.0 ? -1 : 0);
      if (sk == 0 || (sign != 0 && sk != sign)) {
        out.reason = fmt::format("not a graph: fold near x = {}", pts[k].x);
        return out;
      }
      sign = sk;
    }
  }
  const double scale = std::max(1.0, std::abs(b));
  for (int i = 0; i < samples; ++i) {
    const double x = a + (b - a) * i / (samples - 1);
    std::vector<double> ys;
    for (const auto& pts : local) {
      for (std::size_t k = 1; k < pts.size(); ++k) {
        const Point2& p = pts[k - 1];
        const Point2& q = pts[k];
        if (x < std::min(p.x, q.x) || x > std::max(p.x, q.x)) continue;
        if (p.x == q.x) {
          if (std::abs(p.y) <= height || std::abs(q.y) <= height) {
            out.reason = fmt::format("not a graph: vertical segment at x = {}", x);
            return out;
          }
          continue;
        }
        const double y = p.y + (q.y - p.y) * (x - p.x) / (q.x - p.x);
        if (std::abs(y) > height) continue;
        bool dup = false;
        for (double v : ys) dup = dup || std::abs(v - y) <= 1e-12 * scale;
        if (!dup) ys.push_back(y);
      }
    }
    if (ys.size() != 1) {
      out.reason = ys.empty() ? fmt::format("no curve over x = {}", x)
                              : fmt::format("multi-valued at x = {} ({} values)", x, ys.size());
      return out;
    }
    out.x.push_back(x);
    out.f.push_back(ys.front());
  }
  out.ok = true;
  return out;
}

std::optional<double> junction_slope(const Network& net, const TriodFrame& frame, int j) {
  if (j < 1 || j > 3) throw Error(fmt::format("junction_slope: ray index {} not in 1..3", j));
  if (net.junctions.empty()) return std::nullopt;
  int id = -1;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [k, pos] : net.junctions) {
    const double d = norm2(pos - frame.xi());
    if (d < best) {
      best = d;
      id = k;
    }
  }
  const double rot = -kTwoPiThird * (j - 1);
  std::optional<double> slope;
  double best_align = -2.0;
  for (const auto& [c, e] : junction_ends(net, id)) {
    const auto& nodes = net.curves[static_cast<std::size_t>(c)].nodes;
    if (nodes.size() < 2) continue;
    const Point2 p = rotate(frame.to_local(e == 0 ? nodes[0] : nodes.back()), rot);
    const Point2 q = rotate(frame.to_local(e == 0 ? nodes[1] : nodes[nodes.size() - 2]), rot);
    const Point2 d = q - p;
    const double align = d.x / norm(d);
    if (align > best_align && d.x > 0.0) {
      best_align = align;
      slope = d.y / d.x;
    }
  }
  return slope;
}

HeatResidual heat_residual(const FlowTrajectory& traj, const TriodFrame& frame, int j, double a, double b,
                           const Window& w, double spacing) {
  check_window(traj, w);
  if (!(spacing > 0.0)) throw Error("heat_residual: spacing must be positive");
  const int n = static_cast<int>(std::lround((b - a) / spacing)) + 1;
  if (n < 3) throw Error("heat_residual: interval too short for the spacing");
  // Graphs are extracted from the normalized slices, so a, b scale by 1/R and the strip height is 1/2.
  const TriodFrame fn = normalize(frame, w.center, w.R);
  const double an = a / w.R;
  const double bn = b / w.R;
  const double dx = (bn - an) / (n - 1);
  std::vector<double> times;
  std::vector<std::vector<double>> f;
  for (const auto& slice : normalized_slices(traj, w, -2.0, 2.0)) {
    auto g = graph_extract(slice.net, fn, j, an, bn, n, 0.5);
    if (!g.ok) {
      throw Error(fmt::format("heat_residual: graph extraction failed at t = {}: {}", w.s + slice.t * w.R * w.R,
                              g.reason));
    }
    times.push_back(slice.t);
    f.push_back(std::move(g.f));
  }
  if (times.size() < 3) throw Error(fmt::format("heat_residual: fewer than three snapshots in {}", describe(w)));
  double sum = 0.0;
  for (std::size_t k = 1; k + 1 < times.size(); ++k) {
    const double span = times[k + 1] - times[k - 1];
    for (int i = 1; i + 1 < n; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      const double ft = (f[k + 1][ii] - f[k - 1][ii]) / span;
      const double fxx = (f[k][ii + 1] - 2.0 * f[k][ii] + f[k][ii - 1]) / (dx * dx);
      const double r = ft - fxx;
      sum += r * r * dx * 0.5 * span;
    }
  }
  HeatResidual out;
  out.raw = std::sqrt(sum);
  out.mu = fit_frame(traj, w).mu;
  out.normalized = out.mu > kExcessNoiseFloor ? out.raw / out.mu : out.raw;
  return out;
}

double two_triod_gap(const TriodFrame& frame1, const TriodFrame& frame2) {
  if (std::abs(TriodFrame::normalize_angle(frame1.theta() - frame2.theta())) > 1e-12) {
    throw Error("two_triod_gap: frames must share theta");
  }
  const Point2 xi = frame2.xi() - frame1.xi();
  const double len = norm(xi);
  if (!(len > 0.0)) throw Error("two_triod_gap: frames coincide (|xi| = 0)");
  const FastTriod j1(frame1);
  const FastTriod j2(frame2);
  const FastTriod bisector(TriodFrame(frame1.theta() + pi / 3.0, frame1.xi()));
  constexpr int kAngles = 720;  // multiple of 3 keeps the grid invariant under the triod symmetry
  constexpr int kRadii = 400;
  std::array<double, 3> worst{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                              std::numeric_limits<double>::infinity()};
  for (int m = 0; m < kAngles; ++m) {
    const double phi = 2.0 * pi * (m + 0.5) / kAngles;
    const int component = (m * 3) / kAngles;  // sector of ray `component`, centred at its direction
    const double a = frame1.theta() + phi - pi / 3.0;
    const Point2 dir{std::cos(a), std::sin(a)};
    for (int i = 0; i < kRadii; ++i) {
      const double r = 10.0 * len * (i + 0.5) / kRadii;
      const Point2 x = frame1.xi() + r * dir;
      if (bisector.dist2(x) <= len * len) continue;
      const double ratio = (std::sqrt(j1.dist2(x)) + std::sqrt(j2.dist2(x))) / len;
      auto& w = worst[static_cast<std::size_t>(component)];
      w = std::min(w, ratio);
    }
  }
  double best = 0.0;
  for (double w : worst) {
    if (std::isfinite(w)) best = std::max(best, w);
  }
  return best;
}

}  // namespace triodlab
