#include "triodlab/io.hpp"

#include <fmt/core.h>
#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>

#include "triodlab/presets.hpp"

namespace triodlab::io {

namespace {

using nlohmann::json;

json point_json(const Point2& p) { return json::array({p.x, p.y}); }

Point2 point_from(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw Error("expected a point [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

std::string tag_string(const EndTag& tag, bool closed) {
  if (closed) return "closed";
  switch (tag.kind) {
    case EndKind::free:
      return "free";
    case EndKind::clamped:
      return "clamped";
    case EndKind::junction:
      return fmt::format("junction:{}", tag.junction);
  }
  return "free";
}

EndTag tag_from(const std::string& s) {
  if (s == "free") return EndTag::free_end();
  if (s == "clamped") return EndTag::clamped();
  if (s.rfind("junction:", 0) == 0) {
    try {
      std::size_t used = 0;
      const int id = std::stoi(s.substr(9), &used);
      if (used == s.size() - 9) return EndTag::at_junction(id);
    } catch (const std::exception&) {
    }
  }
  throw Error(fmt::format("unknown end tag '{}'", s));
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open '{}'", path.string()));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

json to_json(const Network& net, double t) {
  json curves = json::array();
  json tags = json::array();
  for (const auto& c : net.curves) {
    json nodes = json::array();
    for (const auto& p : c.nodes) nodes.push_back(point_json(p));
    curves.push_back(std::move(nodes));
    tags.push_back(json::array({tag_string(c.ends[0], c.closed), tag_string(c.ends[1], c.closed)}));
  }
  json junctions = json::object();
  for (const auto& [id, p] : net.junctions) junctions[std::to_string(id)] = point_json(p);
  return json{{"t", t}, {"curves", std::move(curves)}, {"end_tags", std::move(tags)}, {"junctions", std::move(junctions)}};
}

Snapshot snapshot_from_json(const json& j) {
  if (!j.is_object()) throw Error("snapshot must be a JSON object");
  for (const char* key : {"t", "curves", "end_tags", "junctions"}) {
    if (!j.contains(key)) throw Error(fmt::format("snapshot is missing '{}'", key));
  }
  Snapshot snap;
  if (!j["t"].is_number()) throw Error("'t' must be a number");
  snap.t = j["t"].get<double>();
  const auto& curves = j["curves"];
  const auto& tags = j["end_tags"];
  if (!curves.is_array() || !tags.is_array() || curves.size() != tags.size()) {
    throw Error("'curves' and 'end_tags' must be arrays of equal length");
  }
  for (std::size_t c = 0; c < curves.size(); ++c) {
    Curve curve;
    if (!curves[c].is_array()) throw Error(fmt::format("curve {} must be an array of points", c));
    for (const auto& p : curves[c]) curve.nodes.push_back(point_from(p));
    const auto& pair = tags[c];
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() || !pair[1].is_string()) {
      throw Error(fmt::format("end_tags[{}] must be a pair of strings", c));
    }
    const auto t0 = pair[0].get<std::string>();
    const auto t1 = pair[1].get<std::string>();
    if (t0 == "closed" || t1 == "closed") {
      if (t0 != t1) throw Error(fmt::format("end_tags[{}]: 'closed' must be used for both ends", c));
      curve.closed = true;
    } else {
      curve.ends = {tag_from(t0), tag_from(t1)};
    }
    snap.net.curves.push_back(std::move(curve));
  }
  if (!j["junctions"].is_object()) throw Error("'junctions' must be an object");
  for (const auto& [key, value] : j["junctions"].items()) {
    int id = 0;
    try {
      std::size_t used = 0;
      id = std::stoi(key, &used);
      if (used != key.size()) throw Error("");
    } catch (const std::exception&) {
      throw Error(fmt::format("junction id '{}' is not an integer", key));
    }
    snap.net.junctions[id] = point_from(value);
  }
  return snap;
}

json to_json(const ForcingField& f) {
  json j{{"p", f.p()}, {"q", f.q()}};
  switch (f.kind()) {
    case ForcingKind::zero:
      j["kind"] = "zero";
      break;
    case ForcingKind::constant:
      j["kind"] = "constant";
      j["value"] = point_json(f.constant_value());
      break;
    case ForcingKind::preset:
      j["kind"] = "preset";
      j["name"] = f.preset_name();
      j["params"] = f.params();
      break;
  }
  if (f.rescale_factor() != 1.0 || f.rescale_origin() != Point2{} || f.rescale_time() != 0.0) {
    j["rescaling"] = json{{"origin", point_json(f.rescale_origin())}, {"time", f.rescale_time()},
                          {"scale", f.rescale_factor()}};
  }
  return j;
}

ForcingField forcing_from_json(const json& j) {
  const double p = j.value("p", 2.0);
  const double q = j.value("q", 8.0);
  const std::string kind = j.value("kind", std::string("zero"));
  ForcingField f;
  if (kind == "zero") {
    f = ForcingField::zero(p, q);
  } else if (kind == "constant") {
    f = ForcingField::constant(point_from(j.at("value")), p, q);
  } else if (kind == "preset") {
    f = ForcingField::preset(j.at("name").get<std::string>(), j.value("params", std::map<std::string, double>{}), p,
                             q);
  } else {
    throw Error(fmt::format("unknown forcing kind '{}'", kind));
  }
  if (j.contains("rescaling")) {
    const auto& r = j["rescaling"];
    f.set_rescaling(point_from(r.at("origin")), r.at("time").get<double>(), r.at("scale").get<double>());
  }
  return f;
}

json to_json(const Event& e) {
  return json{{"t", e.t},
              {"kind", to_string(e.kind)},
              {"data", {{"curves", e.curves}, {"junctions", e.junctions}, {"measure", e.measure}, {"where", point_json(e.where)}}}};
}

Event event_from_json(const json& j) {
  Event e;
  e.t = j.at("t").get<double>();
  e.kind = event_kind_from_string(j.at("kind").get<std::string>());
  const auto& d = j.at("data");
  e.curves = d.value("curves", std::vector<int>{});
  e.junctions = d.value("junctions", std::vector<int>{});
  e.measure = d.value("measure", 0.0);
  if (d.contains("where")) e.where = point_from(d["where"]);
  return e;
}

TrajectoryFiles TrajectoryFiles::for_stem(const fs::path& stem) {
  const std::string s = stem.string();
  return {s + ".traj.jsonl", s + ".events.jsonl", s + ".meta.json"};
}

TrajectoryFiles TrajectoryFiles::for_snapshots(const fs::path& snapshots) {
  std::string s = snapshots.string();
  for (const std::string suffix : {".traj.jsonl", ".jsonl"}) {
    if (s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
      s.resize(s.size() - suffix.size());
      break;
    }
  }
  TrajectoryFiles files = for_stem(s);
  files.snapshots = snapshots;
  return files;
}

void write_trajectory(const FlowTrajectory& traj, const TrajectoryFiles& files) {
  {
    std::ofstream out(files.snapshots);
    if (!out) throw Error(fmt::format("cannot write '{}'", files.snapshots.string()));
    for (const auto& s : traj.snapshots) out << to_json(s.net, s.t).dump() << '\n';
  }
  {
    std::ofstream out(files.events);
    if (!out) throw Error(fmt::format("cannot write '{}'", files.events.string()));
    for (const auto& e : traj.events) out << to_json(e).dump() << '\n';
  }
  std::ofstream out(files.meta);
  if (!out) throw Error(fmt::format("cannot write '{}'", files.meta.string()));
  out << json{{"forcing", to_json(traj.forcing)}}.dump(2) << '\n';
}

std::vector<Snapshot> read_snapshots(const fs::path& path) {
  const auto lines = read_lines(path);
  std::vector<Snapshot> out;
  for (std::size_t k = 0; k < lines.size(); ++k) {
    if (lines[k].find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(snapshot_from_json(json::parse(lines[k])));
    } catch (const std::exception& e) {
      throw Error(fmt::format("{}:{}: {}", path.string(), k + 1, e.what()));
    }
    if (out.size() >= 2 && !(out.back().t > out[out.size() - 2].t)) {
      throw Error(fmt::format("{}:{}: snapshot times must be strictly increasing", path.string(), k + 1));
    }
  }
  if (out.empty()) throw Error(fmt::format("{}: no snapshots", path.string()));
  return out;
}

FlowTrajectory read_trajectory(const fs::path& snapshots) {
  FlowTrajectory traj;
  traj.snapshots = read_snapshots(snapshots);
  const auto files = TrajectoryFiles::for_snapshots(snapshots);
  if (fs::exists(files.events)) {
    const auto lines = read_lines(files.events);
    for (std::size_t k = 0; k < lines.size(); ++k) {
      if (lines[k].find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        traj.events.push_back(event_from_json(json::parse(lines[k])));
      } catch (const std::exception& e) {
        throw Error(fmt::format("{}:{}: {}", files.events.string(), k + 1, e.what()));
      }
    }
  }
  if (fs::exists(files.meta)) {
    try {
      std::ifstream in(files.meta);
      const json meta = json::parse(in);
      if (meta.contains("forcing")) traj.forcing = forcing_from_json(meta["forcing"]);
    } catch (const std::exception& e) {
      throw Error(fmt::format("{}: {}", files.meta.string(), e.what()));
    }
  }
  return traj;
}

Scenario load_scenario(const fs::path& path) {
  if (!fs::exists(path)) throw Error(fmt::format("scenario file '{}' does not exist", path.string()));
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw Error(fmt::format("{}: {}", path.string(), e.what()));
  }
  static const std::set<std::string> known{"preset",  "preset_params", "initial",         "forcing",  "t_start",
                                           "dt",      "t_end",         "snapshot_stride", "h_target", "eps_len",
                                           "eps_col", "clamp_velocity", "regrid"};
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    if (!known.contains(key)) throw Error(fmt::format("{}: unknown key '{}'", path.string(), key));
  }
  try {
    Scenario sc;
    sc.h_target = root["h_target"] ? root["h_target"].as<double>() : 0.01;
    sc.dt = root["dt"] ? root["dt"].as<double>() : 0.5 * sc.h_target * sc.h_target;
    sc.t_start = root["t_start"] ? root["t_start"].as<double>() : 0.0;
    if (!root["t_end"]) throw Error("missing 't_end'");
    sc.t_end = root["t_end"].as<double>();
    sc.snapshot_stride = root["snapshot_stride"] ? root["snapshot_stride"].as<int>() : 100;
    sc.eps_len = root["eps_len"] ? root["eps_len"].as<double>() : 5.0 * sc.h_target;
    sc.eps_col = root["eps_col"] ? root["eps_col"].as<double>() : 5.0 * sc.h_target;
    sc.regrid = root["regrid"] ? root["regrid"].as<bool>() : true;
    if (root["clamp_velocity"]) {
      const auto v = root["clamp_velocity"].as<std::vector<double>>();
      if (v.size() != 2) throw Error("'clamp_velocity' must be [vx, vy]");
      sc.clamp_velocity = {v[0], v[1]};
    }
    if (root["preset"] && root["initial"]) throw Error("give either 'preset' or 'initial', not both");
    if (root["preset"]) {
      std::map<std::string, double> params;
      if (root["preset_params"]) params = root["preset_params"].as<std::map<std::string, double>>();
      sc.initial = presets::build(root["preset"].as<std::string>(), params, sc.h_target);
    } else if (root["initial"]) {
      fs::path init = root["initial"].as<std::string>();
      if (init.is_relative()) init = path.parent_path() / init;
      auto snaps = read_snapshots(init);
      sc.initial = snaps.front().net;
      if (!root["t_start"]) sc.t_start = snaps.front().t;
    } else {
      throw Error("missing 'preset' or 'initial'");
    }
    if (root["forcing"]) {
      const auto f = root["forcing"];
      const double p = f["p"] ? f["p"].as<double>() : 2.0;
      const double q = f["q"] ? f["q"].as<double>() : 8.0;
      const auto kind = f["kind"] ? f["kind"].as<std::string>() : std::string("zero");
      if (kind == "zero") {
        sc.forcing = ForcingField::zero(p, q);
      } else if (kind == "constant") {
        const auto v = f["value"].as<std::vector<double>>();
        if (v.size() != 2) throw Error("forcing 'value' must be [ux, uy]");
        sc.forcing = ForcingField::constant({v[0], v[1]}, p, q);
      } else if (kind == "preset") {
        std::map<std::string, double> params;
        if (f["params"]) params = f["params"].as<std::map<std::string, double>>();
        sc.forcing = ForcingField::preset(f["name"].as<std::string>(), params, p, q);
      } else {
        throw Error(fmt::format("unknown forcing kind '{}'", kind));
      }
    }
    sc.check();
    return sc;
  } catch (const YAML::Exception& e) {
    throw Error(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const Error& e) {
    throw Error(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace triodlab::io
