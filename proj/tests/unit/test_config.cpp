#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "l0flow/config.hpp"

using namespace l0flow;

TEST_CASE("config round trip through JSON") {
  ExperimentConfig c;
  c.kind = ExperimentKind::verify_monotonicity;
  c.flow = FlowSpec{Model::torus, 3, 2.5, 0.7};
  c.schedule.t1_prime = 0.3;
  c.schedule.t1_dprime = 0.45;
  c.schedule.horizon = 0.2;
  c.schedule.epsilon = 0.1 / 3.0;
  c.solver.steps = 96;
  c.solver.multi_start = 5;
  c.solver.tol_residual = 1e-12;
  c.solver.direct_stage = false;
  c.coupling.cut_fraction = 0.25;
  c.ensemble.n_paths = 17;
  c.ensemble.master_seed = 0xFFFF'FFFF'FFFF'FFF1ULL;
  c.ensemble.threads = 3;
  c.points.p = {0.1, 0.2, 0.3};
  c.points.q = {1.0 / 3.0, 0.0, 2.0};
  c.measures.phi = "capped:17";
  c.measures.center_prime = {0.0, 0.0, 0.0};
  c.output.csv = "out.csv";
  c.output.long_format = false;

  const auto text = config_to_json(c).dump();
  const auto back = config_from_json(nlohmann::json::parse(text));
  CHECK(back == c);
  CHECK(config_to_json(back).dump() == text);
}

TEST_CASE("config defaults survive an empty object") {
  const auto c = config_from_json(nlohmann::json::object());
  CHECK(c == ExperimentConfig{});
  CHECK_FALSE(c.ensemble.master_seed.has_value());
}

TEST_CASE("config rejects unknown keys and bad values") {
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"flw": {}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"flow": {"dim": 2}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"flow": {"d": "two"}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"flow": {"model": "cube"}})")),
                  ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"experiment": "nope"})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse("[1, 2]")), ConfigError);
}

TEST_CASE("experiment names") {
  CHECK(parse_kind("verify-sm") == ExperimentKind::verify_supermartingale);
  CHECK(parse_kind("verify-supermartingale") == ExperimentKind::verify_supermartingale);
  CHECK(kind_name(ExperimentKind::transport_check) == "transport-check");
  CHECK(subcommand_name(ExperimentKind::distance_table) == "distance");
}

TEST_CASE("validation") {
  ExperimentConfig c;
  CHECK_NOTHROW(validate_config(c));

  SUBCASE("stochastic runs need a seed") {
    for (auto kind : {ExperimentKind::couple, ExperimentKind::verify_supermartingale,
                      ExperimentKind::verify_monotonicity, ExperimentKind::invariants}) {
      c.kind = kind;
      CHECK_THROWS_AS(validate_config(c), ConfigError);
      c.ensemble.master_seed = 1;
      CHECK_NOTHROW(validate_config(c));
      c.ensemble.master_seed.reset();
    }
  }
  SUBCASE("schedule must stay inside the flow") {
    c.kind = ExperimentKind::couple;
    c.ensemble.master_seed = 1;
    c.schedule.t1_dprime = 0.25;
    CHECK_THROWS_AS(validate_config(c), ConfigError);
    c.schedule.t1_dprime = 0.17;
    c.schedule.horizon = 0.2;
    CHECK_THROWS_AS(validate_config(c), ConfigError);
    c.schedule.horizon = 0.1;
    c.schedule.epsilon = 1e-5;
    CHECK_THROWS_AS(validate_config(c), ConfigError);
  }
  SUBCASE("flow parameters") {
    c.flow.d = 1;
    CHECK_THROWS_AS(validate_config(c), ConfigError);
    c.flow.d = 2;
    c.flow.horizon = 0.0;
    CHECK_THROWS_AS(validate_config(c), ConfigError);
  }
}

TEST_CASE("load_config reports missing and malformed files") {
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
  const std::string path = "l0flow_test_bad_config.json";
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  CHECK_THROWS_AS(load_config(path), ConfigError);
  std::remove(path.c_str());
}
