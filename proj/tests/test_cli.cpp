#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "support.hpp"
#include "triodlab/cli.hpp"
#include "triodlab/io.hpp"

using namespace triodlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "triodlab");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string scenario(const std::string& name) {
  return (fs::path(TRIODLAB_SOURCE_DIR) / "scenarios" / (name + ".yaml")).string();
}

std::vector<std::string> csv_lines(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::map<std::string, double> diagnostic_values(const fs::path& p) {
  std::map<std::string, double> values;
  const auto lines = csv_lines(p);
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto name = lines[k].substr(0, lines[k].find(','));
    values[name] = std::stod(lines[k].substr(lines[k].rfind(',') + 1));
  }
  return values;
}

}  // namespace

TEST_CASE("parse_list") {
  CHECK(cli::parse_list("1, 2.5,-3", 3, "window") == std::vector<double>{1.0, 2.5, -3.0});
  CHECK(cli::parse_list("0.4,0.2", 0, "scales").size() == 2);
  CHECK_THROWS_AS(cli::parse_list("1,2", 3, "window"), Error);
  CHECK_THROWS_AS(cli::parse_list("1,x,3", 3, "window"), Error);
  CHECK_THROWS_AS(cli::parse_list("", 0, "scales"), Error);
}

TEST_CASE("run, diagnose, export on the static triod") {
  const auto dir = testing::scratch_dir("cli_triod");
  const auto res = invoke({"run", "--scenario", scenario("triod"), "--out", dir.string()});
  REQUIRE(res.code == cli::kExitOk);
  const auto traj = io::read_trajectory(dir / "triod.traj.jsonl");
  CHECK(traj.snapshots.size() == 11);
  CHECK(traj.events.empty());
  CHECK(slurp(dir / "triod.events.jsonl").empty());

  const auto traj_path = (dir / "triod.traj.jsonl").string();
  REQUIRE(invoke({"diagnose", "--traj", traj_path, "--out", dir.string()}).code == cli::kExitOk);
  const auto first = slurp(dir / "triod.diagnostics.csv");
  const auto v = diagnostic_values(dir / "triod.diagnostics.csv");
  CHECK(v.at("l2_excess") <= 1e-6);
  CHECK(v.at("u_norm") == 0.0);
  CHECK(v.at("curvature_energy") <= 1e-12);
  CHECK(v.at("shrinker_energy") <= 1e-12);
  CHECK(v.at("weighted_noncon") <= 1e-12);
  CHECK(std::abs(v.at("brakke_residual")) <= 1e-10);
  CHECK(v.at("herring_residual_max") <= 1e-8);
  CHECK(v.at("length_defect1") <= 1e-10);
  CHECK(v.at("measured_E1") == doctest::Approx(1.5).epsilon(1e-6));
  for (const char* m : {"phi_j_mass_1", "phi_j_mass_2", "phi_j_mass_3"}) CHECK(v.at(m) == doctest::Approx(0.75).epsilon(1e-4));

  REQUIRE(invoke({"diagnose", "--traj", traj_path, "--out", dir.string()}).code == cli::kExitOk);
  CHECK(slurp(dir / "triod.diagnostics.csv") == first);

  const auto bad = invoke({"diagnose", "--traj", traj_path, "--out", dir.string(), "--window", "0,0,0.05,2"});
  CHECK(bad.code == cli::kExitError);
  CHECK(bad.err.find("R = 2") != std::string::npos);
  CHECK(bad.err.find("s = 0.05") != std::string::npos);

  REQUIRE(invoke({"export", "--traj", traj_path, "--out", dir.string()}).code == cli::kExitOk);
  const auto holder = nlohmann::json::parse(slurp(dir / "triod.holder.json"));
  CHECK(holder["infinite_regularity"] == true);
  const auto density = nlohmann::json::parse(slurp(dir / "triod.density.json"));
  // Snapshots every 0.01 are too sparse for the default kernel scales.
  CHECK(density["error"].get<std::string>().find("snapshot spacing") != std::string::npos);
  CHECK(csv_lines(dir / "triod.nodes.csv").front() == "t,curve,node,x,y");
  CHECK(csv_lines(dir / "triod.junctions.csv").size() == 12);
}

TEST_CASE("missing inputs and usage errors") {
  const auto dir = testing::scratch_dir("cli_errors");
  const auto missing = invoke({"run", "--scenario", (dir / "nope.yaml").string(), "--out", dir.string()});
  CHECK(missing.code == cli::kExitError);
  CHECK(missing.err.find("nope.yaml") != std::string::npos);

  std::ofstream(dir / "broken.traj.jsonl") << "{\"t\": 0.0, \"curves\": []\n";
  const auto broken = invoke({"diagnose", "--traj", (dir / "broken.traj.jsonl").string(), "--out", dir.string()});
  CHECK(broken.code == cli::kExitError);
  CHECK(broken.err.find("broken.traj.jsonl:1") != std::string::npos);

  CHECK(invoke({"run"}).code == cli::kExitError);
  CHECK(invoke({"frobnicate"}).code == cli::kExitError);
  CHECK(invoke({"--help"}).code == cli::kExitOk);
}

TEST_CASE("lens: halt, classify") {
  const auto dir = testing::scratch_dir("cli_lens");
  const auto res = invoke({"run", "--scenario", scenario("lens"), "--out", dir.string(), "--run-id", "L"});
  CHECK(res.code == cli::kExitHalted);
  CHECK(res.out.find("junction_collision") != std::string::npos);
  const auto events = slurp(dir / "L.events.jsonl");
  CHECK(events.find("\"junction_collision\"") != std::string::npos);

  REQUIRE(invoke({"classify", "--traj", (dir / "L.traj.jsonl").string(), "--out", dir.string()}).code ==
          cli::kExitOk);
  int ge2 = 0;
  for (const auto& line : csv_lines(dir / "L.classify.csv")) ge2 += line.find("static_density_ge2") != std::string::npos;
  CHECK(ge2 == 1);
}

TEST_CASE("classify on a smooth curve is empty") {
  const auto dir = testing::scratch_dir("cli_circle");
  REQUIRE(invoke({"run", "--scenario", scenario("circle"), "--out", dir.string()}).code == cli::kExitOk);
  REQUIRE(invoke({"classify", "--traj", (dir / "circle.traj.jsonl").string(), "--out", dir.string()}).code ==
          cli::kExitOk);
  CHECK(csv_lines(dir / "circle.classify.csv") ==
        std::vector<std::string>{"y_x,y_y,s,theta_star,static_score,label,D"});
}

TEST_CASE("decay on the perturbed triod") {
  const auto dir = testing::scratch_dir("cli_decay");
  REQUIRE(invoke({"run", "--scenario", scenario("perturbed_triod"), "--out", dir.string(), "--run-id", "P"}).code ==
          cli::kExitOk);
  REQUIRE(invoke({"decay", "--traj", (dir / "P.traj.jsonl").string(), "--out", dir.string()}).code == cli::kExitOk);
  const auto j = nlohmann::json::parse(slurp(dir / "P.decay.json"));
  REQUIRE(j["entries"].size() >= 3);
  for (const auto& e : j["entries"]) CHECK(e["mu"].get<double>() > 0.0);
  CHECK(j["exponent_defined"] == true);
  CHECK(j["exponent"].is_number());
}
