#pragma once

// Command-line front end: run, diagnose, classify, decay, export.

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "triodlab/excess.hpp"

namespace triodlab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitHalted = 2;

/// Parses "a,b,c" into exactly `count` numbers (any count when count is 0).
std::vector<double> parse_list(const std::string& text, std::size_t count, const std::string& what);

/// Window used when --window is not given: centred on the junction nearest the origin at the
/// middle snapshot (the origin without junctions), s at mid-time, R as large as the data allows.
Window default_window(const FlowTrajectory& traj);

/// One row of the diagnostics report.
struct DiagnosticRow {
  std::string quantity;
  std::string params;
  double value = 0.0;
};

std::vector<DiagnosticRow> diagnose(const FlowTrajectory& traj, const Window& w, double kappa);

/// CSV text with columns quantity, window_center_x, window_center_y, window_s, window_R, params, value.
std::string diagnostics_csv(const std::vector<DiagnosticRow>& rows, const Window& w);

/// CSV text with columns y_x, y_y, s, theta_star, static_score, label, D.
std::string classification_csv(const std::vector<StratumPoint>& points);

/// Entry point; returns the process exit code.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace triodlab::cli
