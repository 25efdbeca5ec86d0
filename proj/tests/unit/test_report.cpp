#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "l0flow/model_flows.hpp"
#include "l0flow/report.hpp"

using namespace l0flow;

TEST_CASE("numbers use 12 significant digits") {
  CHECK(format_number(0.09) == "0.09");
  CHECK(format_number(1.0 / 3.0) == "0.333333333333");
  CHECK(format_number(-2.5e-13) == "-2.5e-13");
  CHECK(format_number(123456789012345.0) == "1.23456789012e+14");
}

TEST_CASE("empty results give a header-only CSV") {
  CHECK(distance_table({}, 2).to_csv() ==
        "t_prime,t_dprime,p_0,p_1,q_0,q_1,action,v0_0,v0_1,converged,multiplicity_flag,residual,"
        "upper_bound\n");
  CHECK(trajectory_table({}, 3, true).to_csv() ==
        "path,s,x_0,x_1,x_2,y_0,y_1,y_2,lambda,multiplicity_hit\n");
  CHECK(supermartingale_table(SupermartingaleReport{}).to_csv() == "s,mean,stderr,upper99\n");
}

TEST_CASE("monotonicity table schema") {
  MonotonicityReport rep;
  rep.rows.push_back(MonotonicityRow{0.0, 0, 1.5, 0.25, 0.0, 0.0, false, 1.5, 0.25, false, true});
  rep.rows.push_back(MonotonicityRow{0.1, 5, 1.75, 0.25, 0.25, 0.1, true, 1.6, 0.2, false, true});
  const auto t = monotonicity_table(rep);
  REQUIRE(t.header.size() >= 4);
  CHECK(t.header[0] == "s");
  CHECK(t.header[1] == "cost");
  CHECK(t.header[2] == "stderr");
  CHECK(t.header[3] == "flag");
  CHECK(t.rows[1][0] == "0.1");
  CHECK(t.rows[1][3] == "1");
  CHECK(t.rows[0][3] == "0");
}

TEST_CASE("row width must match the header") {
  Table t;
  t.header = {"a", "b"};
  CHECK_THROWS(t.add_row({"1"}));
}

TEST_CASE("identical inputs give identical text") {
  const auto fam = MetricFamily::torus(2, 1.0, 1.0);
  Vec p(2), q(2);
  p << 0.1, 0.2;
  q << 0.4, 0.9;
  const auto a = l0_distance(fam, 0.0, 0.5, fam.make_point(p), fam.make_point(q));
  const auto b = l0_distance(fam, 0.0, 0.5, fam.make_point(p), fam.make_point(q));
  CHECK(distance_table({a}, 2).to_csv() == distance_table({b}, 2).to_csv());
  CHECK(dump_json(geodesic_json(a)) == dump_json(geodesic_json(b)));
  CHECK(geodesic_table(fam, a).to_csv() == geodesic_table(fam, b).to_csv());
}

TEST_CASE("write_file") {
  const std::string path = "l0flow_test_report.csv";
  write_file(path, "a,b\n1,2\n");
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == "a,b\n1,2\n");
  std::remove(path.c_str());
  CHECK_THROWS_AS(write_file("/nonexistent/dir/out.csv", "x"), IoError);
}
