#pragma once

// File formats: JSON Lines trajectories, event records, forcing metadata, scenario files.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "triodlab/flowsim.hpp"

namespace triodlab::io {

namespace fs = std::filesystem;

nlohmann::json to_json(const Network& net, double t);
Snapshot snapshot_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ForcingField& forcing);
ForcingField forcing_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Event& event);
Event event_from_json(const nlohmann::json& j);

/// Paths of the files that make up one stored trajectory.
struct TrajectoryFiles {
  fs::path snapshots;  // <stem>.traj.jsonl
  fs::path events;     // <stem>.events.jsonl
  fs::path meta;       // <stem>.meta.json

  static TrajectoryFiles for_stem(const fs::path& stem);
  /// Sibling files of a snapshot file named <stem>.traj.jsonl (or <stem>.jsonl).
  static TrajectoryFiles for_snapshots(const fs::path& snapshots);
};

void write_trajectory(const FlowTrajectory& traj, const TrajectoryFiles& files);

/// Reads the snapshot file and, when present, the events and meta siblings.
/// Malformed lines raise Error naming the file and line number.
FlowTrajectory read_trajectory(const fs::path& snapshots);

std::vector<Snapshot> read_snapshots(const fs::path& path);

/// Loads a scenario description (YAML key-value file).
Scenario load_scenario(const fs::path& path);

}  // namespace triodlab::io
