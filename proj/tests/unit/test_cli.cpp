#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "l0flow/cli.hpp"
#include "l0flow/config.hpp"

using namespace l0flow;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "l0flow");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  std::filesystem::path path;
  TempDir() : path(std::filesystem::temp_directory_path() / "l0flow_cli_test") {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("distance on the torus prints the closed form") {
  const auto r = cli({"distance", "--model", "torus", "--L", "1", "--d", "2", "--tp", "0", "--tq", "0.5",
                      "--p", "0,0", "--q", "0.3,0"});
  CHECK(r.code == kExitOk);
  CHECK(r.out == "0.09\n");
}

TEST_CASE("exit codes for configuration errors") {
  CHECK(cli({}).code == kExitConfig);
  CHECK(cli({"frobnicate"}).code == kExitConfig);
  CHECK(cli({"distance", "--model", "cube"}).code == kExitConfig);
  CHECK(cli({"distance", "--model", "torus", "--p", "0,0"}).code == kExitConfig);  // no q
  CHECK(cli({"distance", "--model", "sphere", "--p", "1,0", "--q", "0,1"}).code == kExitConfig);
  CHECK(cli({"couple", "--model", "torus", "--p", "0,0", "--q", "0.1,0"}).code == kExitConfig);
  CHECK(cli({"distance", "--config", "/nonexistent/config.json"}).code == kExitConfig);

  TempDir dir;
  const auto bad = dir / "bad.json";
  std::ofstream(bad) << R"({"flow": {"modle": "torus"}})";
  const auto r = cli({"distance", "--config", bad});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("modle") != std::string::npos);
}

TEST_CASE("invariants suite exits 0") {
  CHECK(cli({"invariants", "--model", "torus", "--d", "2", "--seed", "7"}).code == kExitOk);
}

TEST_CASE("flags override the config file and the resolved config round-trips") {
  TempDir dir;
  const auto path = dir / "c.json";
  std::ofstream(path) << R"({"flow": {"model": "torus", "d": 3, "L": 2, "T": 1},
                            "points": {"tp": 0.1, "tq": 0.4}})";
  const auto r = cli({"geodesic", "--config", path, "--d", "2", "--dump-config"});
  REQUIRE(r.code == kExitOk);
  const auto c = config_from_json(nlohmann::json::parse(r.out));
  CHECK(c.kind == ExperimentKind::geodesic);
  CHECK(c.flow.model == Model::torus);
  CHECK(c.flow.d == 2);
  CHECK(c.flow.side == 2.0);
  CHECK(c.points.t_dprime == 0.4);

  const auto again = dir / "again.json";
  std::ofstream(again) << r.out;
  CHECK(cli({"geodesic", "--config", again, "--dump-config"}).out == r.out);
}

TEST_CASE("batch distance table") {
  TempDir dir;
  const auto in = dir / "pairs.csv";
  const auto out = dir / "out.csv";
  std::ofstream(in) << "t_prime,t_dprime,p_0,p_1,q_0,q_1\n0,0.5,0,0,0.3,0\n0.1,0.3,0.9,0.9,0.1,0.2\n";
  const auto r = cli({"distance", "--model", "torus", "--batch", in, "--csv", out});
  REQUIRE(r.code == kExitOk);
  std::istringstream lines(slurp(out));
  std::string header, first, second, extra;
  std::getline(lines, header);
  std::getline(lines, first);
  std::getline(lines, second);
  CHECK_FALSE(std::getline(lines, extra));
  CHECK(header.rfind("t_prime,t_dprime,p_0,p_1,q_0,q_1,action", 0) == 0);
  CHECK(first.rfind("0,0.5,0,0,0.3,0,0.09,", 0) == 0);
  // Minimal image: displacement (0.2, 0.3) over 0.2 -> 0.13 / 0.4.
  CHECK(second.find(",0.325,") != std::string::npos);
}

TEST_CASE("couple output is independent of the thread count") {
  TempDir dir;
  std::vector<std::string> outputs;
  for (const char* threads : {"1", "3"}) {
    const auto csv = dir / (std::string("traj_") + threads + ".csv");
    const auto r = cli({"couple", "--model", "sphere", "--d", "2", "--T", "0.2", "--t1p", "0.15",
                        "--t1q", "0.17", "--S", "0.01", "--eps", "0.05", "--p", "0,0,1", "--q",
                        "0.6,0,0.8", "--paths", "6", "--seed", "3", "--threads", threads, "--csv", csv});
    REQUIRE(r.code == kExitOk);
    outputs.push_back(slurp(csv) + r.out);
  }
  CHECK(outputs[0] == outputs[1]);
  CHECK(outputs[0].find("path,s,x_0") == 0);
}

TEST_CASE("trajectory directory holds one file per path") {
  TempDir dir;
  const auto r = cli({"couple", "--model", "torus", "--d", "2", "--t1p", "0.5", "--t1q", "0.6", "--S",
                      "0.04", "--eps", "0.1", "--p", "0,0", "--q", "0.2,0", "--paths", "3", "--seed",
                      "1", "--trajectory-dir", dir / "traj"});
  REQUIRE(r.code == kExitOk);
  for (int i = 0; i < 3; ++i) {
    const auto text = slurp(dir / ("traj/path_" + std::to_string(i) + ".csv"));
    CHECK(text.rfind("s,x_0,x_1,y_0,y_1,lambda,multiplicity_hit\n", 0) == 0);
  }
}

TEST_CASE("verify-sm and verify-mono on the flat torus pass") {
  TempDir dir;
  const auto sm = cli({"verify-sm", "--model", "torus", "--d", "2", "--L", "10", "--t1p", "0.5",
                       "--t1q", "0.6", "--S", "0.05", "--eps", "0.1", "--p", "0,0", "--q", "1,0",
                       "--paths", "100", "--seed", "5", "--json", dir / "sm.json"});
  CHECK(sm.code == kExitOk);
  const auto j = nlohmann::json::parse(slurp(dir / "sm.json"));
  CHECK(j.contains("p_value"));
  CHECK(j["per_step"].size() == 5);

  TempDir dir2;
  std::ofstream(dir2 / "mono.json") << R"({
    "flow": {"model": "torus", "d": 2, "L": 10},
    "schedule": {"t1_prime": 0.5, "t1_dprime": 0.6, "S": 0.04, "epsilon": 0.1},
    "measures": {"n": 8, "center_prime": [0, 0], "center_dprime": [1, 1], "radius": 0.5,
                 "checkpoints": 3, "bootstrap": 5}})";
  const auto mono = cli({"verify-mono", "--config", dir2 / "mono.json", "--seed", "2", "--csv",
                         dir2 / "mono.csv"});
  CHECK(mono.code == kExitOk);
  CHECK(slurp(dir2 / "mono.csv").rfind("s,cost,stderr,flag", 0) == 0);
}
