#include "triodlab/cli.hpp"

#include <CLI11.hpp>
#include <fmt/core.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "triodlab/io.hpp"

namespace triodlab::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string num(double v) { return fmt::format("{:.17g}", v); }

std::string stem_of(const fs::path& p) {
  std::string name = p.filename().string();
  for (const std::string suffix : {".traj.jsonl", ".jsonl", ".yaml", ".yml"}) {
    if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      return name.substr(0, name.size() - suffix.size());
    }
  }
  return p.stem().string();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw Error(fmt::format("write to '{}' failed", path.string()));
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(fmt::format("cannot create output directory '{}'", dir.string()));
}

FlowTrajectory load_traj(const std::string& path) {
  if (!fs::exists(path)) throw Error(fmt::format("trajectory file '{}' does not exist", path));
  auto traj = io::read_trajectory(path);
  if (traj.snapshots.empty()) throw Error(fmt::format("trajectory file '{}' has no snapshots", path));
  return traj;
}

Window window_from(const std::string& text) {
  const auto v = parse_list(text, 4, "--window");
  return {{v[0], v[1]}, v[2], v[3]};
}

// Evenly spaced subset of at most `count` snapshots inside [lo, hi].
FlowTrajectory thin(const FlowTrajectory& traj, double lo, double hi, std::size_t count) {
  std::vector<const Snapshot*> in;
  for (const auto& s : traj.snapshots) {
    if (s.t >= lo && s.t <= hi) in.push_back(&s);
  }
  FlowTrajectory out;
  out.forcing = traj.forcing;
  const std::size_t n = in.size();
  const std::size_t step = n > count ? (n + count - 1) / count : 1;
  for (std::size_t k = 0; k < n; k += step) out.snapshots.push_back(*in[k]);
  return out;
}

json point(const Point2& p) { return json::array({p.x, p.y}); }

json profile_json(const DensityProfile& p) {
  return {{"center", point(p.center)}, {"s", p.s},
          {"taus", p.taus},           {"values", p.values},
          {"extrapolated", p.extrapolated}, {"monotone", p.monotone}};
}

}  // namespace

std::vector<double> parse_list(const std::string& text, std::size_t count, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw Error(fmt::format("{}: '{}' is not a number", what, item));
    }
  }
  if (count != 0 && out.size() != count) {
    throw Error(fmt::format("{}: expected {} comma-separated numbers, got '{}'", what, count, text));
  }
  if (out.empty()) throw Error(fmt::format("{}: empty list", what));
  return out;
}

Window default_window(const FlowTrajectory& traj) {
  const double s = 0.5 * (traj.t_first() + traj.t_last());
  const Network& mid = traj.snapshots[traj.snapshots.size() / 2].net;
  Point2 c{};
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [id, pos] : mid.junctions) {
    if (norm2(pos) < best) {
      best = norm2(pos);
      c = pos;
    }
  }
  double reach = std::numeric_limits<double>::infinity();
  for (const auto& snap : traj.snapshots) {
    for (const auto& curve : snap.net.curves) {
      if (curve.closed || curve.nodes.empty()) continue;
      for (int e = 0; e < 2; ++e) {
        if (curve.ends[static_cast<std::size_t>(e)].kind == EndKind::junction) continue;
        reach = std::min(reach, distance(e == 0 ? curve.nodes.front() : curve.nodes.back(), c));
      }
    }
  }
  double R = std::sqrt(0.25 * (traj.t_last() - traj.t_first()));
  if (std::isfinite(reach)) R = std::min(R, 0.25 * reach);
  if (!(R > 0.0)) throw Error("cannot choose a default window: trajectory has no time extent or no room");
  return {c, s, 0.999 * R};
}

std::vector<DiagnosticRow> diagnose(const FlowTrajectory& traj, const Window& w, double kappa) {
  check_window(traj, w);
  std::vector<DiagnosticRow> rows;
  const double R2 = w.R * w.R;
  const auto fit = fit_frame(traj, w);
  rows.push_back({"l2_excess", "frame=fitted", fit.mu});
  rows.push_back({"fit_theta", "", fit.frame.theta()});
  rows.push_back({"fit_xi_x", "", fit.frame.xi().x});
  rows.push_back({"fit_xi_y", "", fit.frame.xi().y});
  const double un = u_norm(traj, w, traj.forcing);
  rows.push_back({"u_norm", fmt::format("p={};q={}", num(traj.forcing.p()), num(traj.forcing.q())), un});

  const auto ce = curvature_energy(traj, w);
  rows.push_back({"curvature_energy", "", ce.energy});
  rows.push_back({"mass_defect_sup", "", ce.mass_defect_sup});

  const double t0 = w.s + R2;
  rows.push_back({"shrinker_energy", fmt::format("t0={}", num(t0)), shrinker_energy(traj, t0, w)});
  const auto nc = weighted_noncon(traj, t0, w.center, kappa, fit.frame, w.R);
  rows.push_back({"weighted_noncon", fmt::format("kappa={};t0={};t_worst={}", num(kappa), num(t0), num(nc.t_worst)),
                  nc.value});

  {
    Network net = snapshot_at(traj, w.s).net;
    for (auto& c : net.curves) {
      for (auto& p : c.nodes) p = (p - w.center) / w.R;
    }
    const auto d = length_defect(to_varifold(net, Ball{{}, 2.0}), fit.mu, 1.0, un);
    const std::string params = fmt::format("mu_hat={};alpha_hat=1;beta_hat={}", num(fit.mu), num(un));
    rows.push_back({"length_defect1", params, d.defect1});
    rows.push_back({"length_defect2", params, d.defect2});
    rows.push_back({"length_defect_bound", params, d.bound_scale});
  }
  {
    const double t1 = w.s - 2.0 * R2;
    const double t2 = w.s + 2.0 * R2;
    const auto b = brakke_residual(traj, SpaceTimeTest::radial(w.center, w.R), t1, t2);
    rows.push_back({"brakke_residual", fmt::format("phi=phi_rad(R);t1={};t2={};integrable={}", num(t1), num(t2),
                                                   b.integrable ? 1 : 0),
                    b.value()});
  }
  {
    double worst = 0.0;
    for (const auto& snap : traj.snapshots) {
      if (snap.t >= w.s - 2.0 * R2 && snap.t <= w.s + 2.0 * R2) worst = std::max(worst, herring_residual(snap.net));
    }
    rows.push_back({"herring_residual_max", "", worst});
  }
  {
    const auto sub = thin(traj, w.s - 2.0 * R2, w.s + 2.0 * R2, 20);
    rows.push_back({"measured_E1", "radii=R/4,R/2,R;snapshots<=20",
                    measured_e1(sub, {0.25 * w.R, 0.5 * w.R, w.R})});
  }
  {
    const auto v = to_varifold(snapshot_at(traj, w.s - 2.0 * R2).net);
    for (int j = 1; j <= 3; ++j) {
      rows.push_back({fmt::format("phi_j_mass_{}", j), fmt::format("t={};frame=fitted", num(w.s - 2.0 * R2)),
                      weigh(v, phi_j(j, fit.frame, w.R)) / w.R});
    }
  }
  {
    const double tau0 = 0.25 * R2;
    DiagnosticRow row{"gaussian_density", fmt::format("taus={},{},{}", num(tau0), num(tau0 / 2), num(tau0 / 4)), 0.0};
    try {
      row.value = density_limit(traj, w.center, w.s, {tau0, tau0 / 2.0, tau0 / 4.0}).extrapolated;
    } catch (const Error& e) {
      row.value = std::numeric_limits<double>::quiet_NaN();
      row.params += ";unavailable";
    }
    rows.push_back(row);
  }
  return rows;
}

std::string diagnostics_csv(const std::vector<DiagnosticRow>& rows, const Window& w) {
  std::string out = "quantity,window_center_x,window_center_y,window_s,window_R,params,value\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{}\n", r.quantity, num(w.center.x), num(w.center.y), num(w.s), num(w.R),
                       r.params, num(r.value));
  }
  return out;
}

std::string classification_csv(const std::vector<StratumPoint>& points) {
  std::string out = "y_x,y_y,s,theta_star,static_score,label,D\n";
  for (const auto& p : points) {
    out += fmt::format("{},{},{},{},{},{},{}\n", num(p.y.x), num(p.y.y), num(p.s), num(p.label.theta_star),
                       num(p.label.static_score), to_string(p.label.kind), p.dimension);
  }
  return out;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"triodlab: network curvature flow and regularity diagnostics"};
  app.require_subcommand(1);

  std::string scenario, traj_path, out_dir, run_id, window_text, scales_text = "0.4,0.2,0.1", grid_text = "40,40,10";
  std::string center_text, bounds_text, times_text;
  double kappa = 0.5;
  double tau0 = ClassifyConfig{}.tau0;

  auto* run = app.add_subcommand("run", "Integrate a scenario and write the trajectory");
  run->add_option("--scenario", scenario, "Scenario YAML file")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--run-id", run_id, "Stem of the output files (default: scenario name)");

  auto* diag = app.add_subcommand("diagnose", "Diagnostics report for one window");
  diag->add_option("--traj", traj_path, "Trajectory JSONL file")->required();
  diag->add_option("--out", out_dir, "Output directory")->required();
  diag->add_option("--window", window_text, "cx,cy,s,R");
  diag->add_option("--kappa", kappa, "Time weight exponent of weighted_noncon");
  diag->add_option("--run-id", run_id, "Stem of the output files");

  auto* cls = app.add_subcommand("classify", "Tangent-flow classification over a space-time grid");
  cls->add_option("--traj", traj_path, "Trajectory JSONL file")->required();
  cls->add_option("--out", out_dir, "Output directory")->required();
  cls->add_option("--grid", grid_text, "nx,ny,nt");
  cls->add_option("--tau0", tau0, "Largest kernel scale of the density profile");
  cls->add_option("--bounds", bounds_text, "x0,y0,x1,y1 (default: bounding box of the data)");
  cls->add_option("--times", times_text, "t0,t1 (default: from t_first + tau0 to t_last)");
  cls->add_option("--run-id", run_id, "Stem of the output files");

  auto* dec = app.add_subcommand("decay", "Excess decay profile over dyadic scales");
  dec->add_option("--traj", traj_path, "Trajectory JSONL file")->required();
  dec->add_option("--out", out_dir, "Output directory")->required();
  dec->add_option("--window", window_text, "cx,cy,s,R (centre and time; R is ignored)");
  dec->add_option("--center", center_text, "x,y,s");
  dec->add_option("--scales", scales_text, "s1,s2,... decreasing");
  dec->add_option("--run-id", run_id, "Stem of the output files");

  auto* exp = app.add_subcommand("export", "Export nodes, junction track, Hoelder fit and density profile");
  exp->add_option("--traj", traj_path, "Trajectory JSONL file")->required();
  exp->add_option("--out", out_dir, "Output directory")->required();
  exp->add_option("--tau0", tau0, "Largest kernel scale of the density profile");
  exp->add_option("--run-id", run_id, "Stem of the output files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }

  try {
    if (run->parsed()) {
      const auto sc = io::load_scenario(scenario);
      ensure_dir(out_dir);
      const std::string id = run_id.empty() ? stem_of(scenario) : run_id;
      const auto traj = triodlab::run(sc);
      const auto files = io::TrajectoryFiles::for_stem(fs::path(out_dir) / id);
      io::write_trajectory(traj, files);
      out << fmt::format("wrote {} snapshots to {}\n", traj.snapshots.size(), files.snapshots.string());
      if (traj.halted()) {
        for (const auto& e : traj.events) {
          out << fmt::format("event {} at t = {} near ({}, {})\n", to_string(e.kind), num(e.t), num(e.where.x),
                             num(e.where.y));
        }
        return kExitHalted;
      }
      return kExitOk;
    }

    const auto traj = load_traj(traj_path);
    ensure_dir(out_dir);
    const std::string id = run_id.empty() ? stem_of(traj_path) : run_id;
    const fs::path base = fs::path(out_dir) / id;

    if (diag->parsed()) {
      const Window w = window_text.empty() ? default_window(traj) : window_from(window_text);
      const auto rows = diagnose(traj, w, kappa);
      const fs::path path = base.string() + ".diagnostics.csv";
      write_text(path, diagnostics_csv(rows, w));
      out << fmt::format("wrote {} quantities to {}\n", rows.size(), path.string());
      return kExitOk;
    }

    if (cls->parsed()) {
      const auto g = parse_list(grid_text, 3, "--grid");
      SpaceTimeGrid grid;
      grid.nx = static_cast<int>(g[0]);
      grid.ny = static_cast<int>(g[1]);
      grid.nt = static_cast<int>(g[2]);
      if (!bounds_text.empty()) {
        const auto b = parse_list(bounds_text, 4, "--bounds");
        grid.lo = {b[0], b[1]};
        grid.hi = {b[2], b[3]};
      } else {
        grid.lo = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
        grid.hi = -grid.lo;
        for (const auto& snap : traj.snapshots) {
          for (const auto& c : snap.net.curves) {
            for (const auto& p : c.nodes) {
              grid.lo = {std::min(grid.lo.x, p.x), std::min(grid.lo.y, p.y)};
              grid.hi = {std::max(grid.hi.x, p.x), std::max(grid.hi.y, p.y)};
            }
          }
        }
        const double pad = 1e-9 * std::max(1.0, norm(grid.hi - grid.lo));
        grid.lo -= Point2{pad, pad};
        grid.hi += Point2{pad, pad};
      }
      if (!times_text.empty()) {
        const auto t = parse_list(times_text, 2, "--times");
        grid.t_lo = t[0];
        grid.t_hi = t[1];
      } else {
        grid.t_lo = traj.t_first() + tau0;
        grid.t_hi = traj.t_last();
      }
      ClassifyConfig config;
      config.tau0 = tau0;
      const auto points = stratify(traj, grid, config);
      const fs::path path = base.string() + ".classify.csv";
      write_text(path, classification_csv(points));
      out << fmt::format("wrote {} classified points to {}\n", points.size(), path.string());
      return kExitOk;
    }

    if (dec->parsed()) {
      Point2 c{};
      double s = 0.0;
      if (!center_text.empty()) {
        const auto v = parse_list(center_text, 3, "--center");
        c = {v[0], v[1]};
        s = v[2];
      } else if (!window_text.empty()) {
        const Window w = window_from(window_text);
        c = w.center;
        s = w.s;
      } else {
        const Window w = default_window(traj);
        c = w.center;
        s = w.s;
      }
      const auto profile = decay_profile(traj, c, s, parse_list(scales_text, 0, "--scales"));
      json j;
      j["center"] = point(c);
      j["s"] = s;
      j["entries"] = json::array();
      for (const auto& e : profile.entries) {
        j["entries"].push_back({{"scale", e.scale},
                                {"mu", e.mu},
                                {"theta", e.frame.theta()},
                                {"xi", point(e.frame.xi())},
                                {"drift", e.drift}});
      }
      j["exponent_defined"] = profile.exponent_defined;
      j["exponent"] = profile.exponent_defined ? json(profile.exponent) : json(nullptr);
      const fs::path path = base.string() + ".decay.json";
      write_text(path, j.dump(2) + "\n");
      out << fmt::format("wrote decay profile to {}\n", path.string());
      return kExitOk;
    }

    if (exp->parsed()) {
      std::string nodes = "t,curve,node,x,y\n";
      for (const auto& snap : traj.snapshots) {
        for (std::size_t c = 0; c < snap.net.curves.size(); ++c) {
          const auto& curve = snap.net.curves[c];
          for (std::size_t k = 0; k < curve.nodes.size(); ++k) {
            nodes += fmt::format("{},{},{},{},{}\n", num(snap.t), c, k, num(curve.nodes[k].x), num(curve.nodes[k].y));
          }
        }
      }
      write_text(base.string() + ".nodes.csv", nodes);

      const Window w = default_window(traj);
      const auto track = track_junctions(traj, Ball{w.center, std::numeric_limits<double>::max()});
      std::string tcsv = "t,x,y,gap\n";
      for (std::size_t k = 0; k < track.times.size(); ++k) {
        tcsv += fmt::format("{},{},{},{}\n", num(track.times[k]), num(track.positions[k].x),
                            num(track.positions[k].y), track.gaps[k] ? 1 : 0);
      }
      write_text(base.string() + ".junctions.csv", tcsv);

      json holder;
      const double gap = default_holder_gap(track);
      holder["t_min_gap"] = gap;
      try {
        const auto fit = holder_exponent(track, gap);
        holder["infinite_regularity"] = fit.infinite_regularity;
        holder["exponent"] = fit.infinite_regularity ? json(nullptr) : json(fit.exponent);
        holder["constant"] = fit.constant;
        holder["pairs_used"] = fit.pairs_used;
        holder["pairs_below_floor"] = fit.pairs_below_floor;
        holder["pairs_below_gap"] = fit.pairs_below_gap;
      } catch (const Error& e) {
        holder["error"] = e.what();
      }
      write_text(base.string() + ".holder.json", holder.dump(2) + "\n");

      json density;
      const double s = traj.t_last();
      Point2 y = w.center;
      for (std::size_t k = track.times.size(); k-- > 0;) {
        if (!track.gaps[k]) {
          y = track.positions[k];
          break;
        }
      }
      try {
        density = profile_json(density_limit(traj, y, s, {tau0, tau0 / 2.0, tau0 / 4.0}));
      } catch (const Error& e) {
        density["error"] = e.what();
      }
      write_text(base.string() + ".density.json", density.dump(2) + "\n");
      out << fmt::format("exported {} snapshots to {}.*\n", traj.snapshots.size(), base.string());
      return kExitOk;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}

}  // namespace triodlab::cli
