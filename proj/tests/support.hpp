#pragma once

// Shared fixtures for the unit tests.

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <filesystem>
#include <functional>
#include <string>

#include "triodlab/flowsim.hpp"

namespace testing {

using namespace triodlab;

/// Adaptive 1-D quadrature (QAGS) of f over [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-12) {
  gsl_set_error_handler_off();
  gsl_integration_workspace* ws = gsl_integration_workspace_alloc(2000);
  gsl_function F;
  F.function = [](double x, void* p) { return (*static_cast<const std::function<double(double)>*>(p))(x); };
  F.params = const_cast<std::function<double(double)>*>(&f);
  double result = 0.0;
  double err = 0.0;
  gsl_integration_qags(&F, a, b, tol, tol, 2000, ws, &result, &err);
  gsl_integration_workspace_free(ws);
  return result;
}

/// Trajectory holding the same network at n + 1 evenly spaced times in [t0, t1].
inline FlowTrajectory constant_traj(const Network& net, double t0, double t1, int n) {
  FlowTrajectory traj;
  for (int k = 0; k <= n; ++k) traj.snapshots.push_back({t0 + (t1 - t0) * k / n, net});
  return traj;
}

inline double max_displacement(const Network& a, const Network& b) {
  double worst = 0.0;
  for (std::size_t c = 0; c < a.curves.size(); ++c) {
    for (std::size_t k = 0; k < a.curves[c].nodes.size(); ++k) {
      worst = std::max(worst, distance(a.curves[c].nodes[k], b.curves[c].nodes[k]));
    }
  }
  return worst;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("triodlab_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
