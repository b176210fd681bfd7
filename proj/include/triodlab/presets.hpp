#pragma once

// Named initial networks used by scenario files and tests.

#include <functional>
#include <map>
#include <string>

#include "triodlab/netgeom.hpp"

namespace triodlab::presets {

/// Samples a parametric curve densely on [0, 1] and resamples it to arclength spacing h.
Curve sample_curve(const std::function<Point2(double)>& path, double h, std::array<EndTag, 2> ends,
                   int dense_samples = 20000);

/// Triod with graph perturbations f_j(x) = a*(sin(pi x) + beta_j sin^2(pi x)) over ray j.
/// All three curves leave the junction with slope a*pi, so the initial angles are 120 degrees.
Network perturbed_triod(double amplitude, double extent, double h, std::array<double, 3> beta = {0.0, 1.0, -1.0});

Network circle(double radius, int nodes, Point2 center = {});

/// Graph y = t - ln cos x over [-half_width, half_width], clamped ends.
Network grim_reaper(double half_width, double h, double t = 0.0);

/// Two junctions at (-d, 0) and (d, 0) joined by a straight bridge; four arms leave at
/// 120 degrees and bend towards clamped ends at (+-w, +-height).
Network lens(double d, double w, double height, double h);

/// Straight clamped segment from (-length/2, 0) to (length/2, 0).
Network segment(double length, double h);

/// Two clamped segments crossing at `center` (a four-ray cross; not a valid network).
Network cross(double extent, double h, double angle = std::numbers::pi / 2.0, Point2 center = {});

/// Builds a preset from its name and parameters; unknown keys are rejected.
Network build(const std::string& name, const std::map<std::string, double>& params, double h);

}  // namespace triodlab::presets
