#include <doctest.h>

#include <bit>
#include <cmath>
#include <fstream>
#include <random>

#include "support.hpp"
#include "triodlab/io.hpp"
#include "triodlab/presets.hpp"

using namespace triodlab;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

bool bit_equal(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

bool bit_equal(const Network& a, const Network& b) {
  if (a.curves.size() != b.curves.size() || a.junctions.size() != b.junctions.size()) return false;
  for (std::size_t c = 0; c < a.curves.size(); ++c) {
    const auto& ca = a.curves[c];
    const auto& cb = b.curves[c];
    if (ca.closed != cb.closed || ca.nodes.size() != cb.nodes.size()) return false;
    if (!ca.closed && ca.ends != cb.ends) return false;
    for (std::size_t k = 0; k < ca.nodes.size(); ++k) {
      if (!bit_equal(ca.nodes[k].x, cb.nodes[k].x) || !bit_equal(ca.nodes[k].y, cb.nodes[k].y)) return false;
    }
  }
  for (const auto& [id, p] : a.junctions) {
    if (!b.junctions.contains(id)) return false;
    const auto& q = b.junctions.at(id);
    if (!bit_equal(p.x, q.x) || !bit_equal(p.y, q.y)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("trajectory write/read is bit-exact") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> jitter(-1e-3, 1e-3);
  FlowTrajectory traj;
  for (int k = 0; k < 5; ++k) {
    Network net = presets::perturbed_triod(0.02, 1.0, 0.05);
    for (auto& c : net.curves)
      for (auto& p : c.nodes) p = p + Point2{jitter(rng), jitter(rng)};
    traj.snapshots.push_back({0.1 * k + 1.0 / 3.0, net});
  }
  traj.snapshots.back().net.curves.push_back(presets::circle(0.3, 17, {5.0, 5.0}).curves[0]);
  traj.forcing = ForcingField::constant({0.1, -1.0 / 7.0}, 4.0, 16.0);
  traj.forcing.set_rescaling({0.25, -0.5}, 0.125, 2.0);
  Event e;
  e.t = 0.4 + 1.0 / 3.0;
  e.kind = EventKind::junction_collision;
  e.curves = {0, 2};
  e.junctions = {0};
  e.measure = std::sqrt(2.0) * 1e-3;
  e.where = {1.0 / 3.0, -2.0 / 3.0};
  traj.events.push_back(e);

  const auto dir = testing::scratch_dir("io_roundtrip");
  const auto files = io::TrajectoryFiles::for_stem(dir / "run");
  io::write_trajectory(traj, files);
  const auto back = io::read_trajectory(files.snapshots);

  REQUIRE(back.snapshots.size() == traj.snapshots.size());
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    CHECK(bit_equal(back.snapshots[k].t, traj.snapshots[k].t));
    CHECK(bit_equal(back.snapshots[k].net, traj.snapshots[k].net));
  }
  CHECK(back.snapshots.back().net.curves.back().closed);
  REQUIRE(back.events.size() == 1);
  CHECK(back.events[0].kind == EventKind::junction_collision);
  CHECK(bit_equal(back.events[0].t, e.t));
  CHECK(bit_equal(back.events[0].measure, e.measure));
  CHECK(bit_equal(back.events[0].where.x, e.where.x));
  CHECK(back.events[0].curves == e.curves);
  CHECK(back.events[0].junctions == e.junctions);
  CHECK(back.forcing.kind() == ForcingKind::constant);
  CHECK(bit_equal(back.forcing.constant_value().y, -1.0 / 7.0));
  CHECK(back.forcing.p() == 4.0);
  CHECK(back.forcing.q() == 16.0);
  CHECK(back.forcing.rescale_factor() == 2.0);
  CHECK(back.forcing({0.3, 0.3}, 0.1).x == traj.forcing({0.3, 0.3}, 0.1).x);

  // Writing the read-back trajectory reproduces the same bytes.
  const auto files2 = io::TrajectoryFiles::for_stem(dir / "again");
  io::write_trajectory(back, files2);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  CHECK(slurp(files.snapshots) == slurp(files2.snapshots));
  CHECK(slurp(files.events) == slurp(files2.events));
}

TEST_CASE("extreme doubles survive the round trip") {
  Network net = presets::segment(1.0, 0.5);
  net.curves[0].nodes[1] = {std::nextafter(0.5, 1.0), 5e-324};
  net.curves[0].nodes[0] = {-1.7976931348623157e308, 2.2250738585072014e-308};
  const auto snap = io::snapshot_from_json(nlohmann::json::parse(io::to_json(net, 0.1).dump()));
  CHECK(bit_equal(snap.net, net));
  CHECK(bit_equal(snap.t, 0.1));
}

TEST_CASE("malformed lines are reported with their line number") {
  const auto dir = testing::scratch_dir("io_malformed");
  const std::string good = io::to_json(presets::segment(1.0, 0.5), 0.0).dump();
  const std::string good2 = io::to_json(presets::segment(1.0, 0.5), 0.5).dump();

  write_text(dir / "a.traj.jsonl", good + "\n" + good2 + "\n{\"t\": 1.0, \"curves\": [\n");
  const auto msg = error_of([&] { io::read_trajectory(dir / "a.traj.jsonl"); });
  CHECK(msg.find("a.traj.jsonl:3") != std::string::npos);

  write_text(dir / "b.traj.jsonl", good + "\n{\"t\": 0.5}\n");
  CHECK(error_of([&] { io::read_trajectory(dir / "b.traj.jsonl"); }).find(":2: snapshot is missing") !=
        std::string::npos);

  write_text(dir / "c.traj.jsonl", good2 + "\n" + good + "\n");
  CHECK(error_of([&] { io::read_trajectory(dir / "c.traj.jsonl"); }).find(":2: snapshot times") != std::string::npos);

  write_text(dir / "d.traj.jsonl", "");
  CHECK(error_of([&] { io::read_trajectory(dir / "d.traj.jsonl"); }).find("no snapshots") != std::string::npos);

  CHECK(error_of([&] { io::read_trajectory(dir / "missing.traj.jsonl"); }).find("missing.traj.jsonl") !=
        std::string::npos);
}

TEST_CASE("end tags") {
  auto j = io::to_json(presets::perturbed_triod(0.0, 1.0, 0.25), 0.0);
  CHECK(j["end_tags"][0][0] == "junction:0");
  CHECK(j["end_tags"][0][1] == "clamped");
  j["end_tags"][0][1] = "free";
  CHECK(io::snapshot_from_json(j).net.curves[0].ends[1] == EndTag::free_end());
  j["end_tags"][0][1] = "junction:x";
  CHECK(error_of([&] { io::snapshot_from_json(j); }).find("unknown end tag") != std::string::npos);

  auto c = io::to_json(presets::circle(1.0, 8), 0.0);
  CHECK(c["end_tags"][0][0] == "closed");
  CHECK(io::snapshot_from_json(c).net.curves[0].closed);
  c["end_tags"][0][1] = "free";
  CHECK(error_of([&] { io::snapshot_from_json(c); }).find("closed") != std::string::npos);
}

TEST_CASE("forcing serialization") {
  const auto f = ForcingField::preset("swirl", {{"c", 0.5}});
  const auto j = io::to_json(f);
  CHECK(j["kind"] == "preset");
  const auto g = io::forcing_from_json(j);
  CHECK(g.preset_name() == "swirl");
  CHECK(g.params() == f.params());
  CHECK(g({0.3, 0.7}, 0.2).y == f({0.3, 0.7}, 0.2).y);
  CHECK(io::forcing_from_json(io::to_json(ForcingField::zero())).is_zero());
  CHECK(error_of([] { io::forcing_from_json({{"kind", "wind"}}); }).find("wind") != std::string::npos);
}

TEST_CASE("bundled scenarios load") {
  const fs::path dir = fs::path(TRIODLAB_SOURCE_DIR) / "scenarios";
  int count = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".yaml") continue;
    CAPTURE(entry.path().string());
    const auto sc = io::load_scenario(entry.path());
    CHECK(sc.t_end > sc.t_start);
    CHECK(validate(sc.initial).empty());
    ++count;
  }
  CHECK(count >= 6);
  const auto gr = io::load_scenario(dir / "grim_reaper.yaml");
  CHECK(gr.clamp_velocity.y == 1.0);
  CHECK_FALSE(io::load_scenario(dir / "circle.yaml").regrid);
}

TEST_CASE("scenario errors") {
  const auto dir = testing::scratch_dir("io_scenario");
  CHECK(error_of([&] { io::load_scenario(dir / "nope.yaml"); }).find("nope.yaml") != std::string::npos);

  write_text(dir / "typo.yaml", "preset: segment\npreset_params: {length: 1.0}\nt_end: 0.1\ndtt: 1.0e-5\n");
  CHECK(error_of([&] { io::load_scenario(dir / "typo.yaml"); }).find("unknown key 'dtt'") != std::string::npos);

  write_text(dir / "noend.yaml", "preset: segment\npreset_params: {length: 1.0}\n");
  CHECK(error_of([&] { io::load_scenario(dir / "noend.yaml"); }).find("missing 't_end'") != std::string::npos);

  write_text(dir / "both.yaml", "preset: segment\ninitial: x.jsonl\nt_end: 0.1\n");
  CHECK(error_of([&] { io::load_scenario(dir / "both.yaml"); }).find("not both") != std::string::npos);

  write_text(dir / "badpreset.yaml", "preset: hexagon\nt_end: 0.1\n");
  CHECK_FALSE(error_of([&] { io::load_scenario(dir / "badpreset.yaml"); }).empty());
}

TEST_CASE("scenario from a stored snapshot") {
  const auto dir = testing::scratch_dir("io_initial");
  const Network net = presets::segment(1.0, 0.1);
  FlowTrajectory traj;
  traj.snapshots.push_back({0.25, net});
  io::write_trajectory(traj, io::TrajectoryFiles::for_stem(dir / "start"));
  write_text(dir / "resume.yaml", "initial: start.traj.jsonl\nt_end: 0.5\nh_target: 0.1\n");
  const auto sc = io::load_scenario(dir / "resume.yaml");
  CHECK(sc.t_start == 0.25);
  CHECK(bit_equal(sc.initial, net));
}
