#include <doctest.h>

#include "l0flow/invariants.hpp"

using namespace l0flow;

TEST_CASE("invariant suite passes on both models") {
  for (const auto& fam : {MetricFamily::sphere(2, 0.2), MetricFamily::sphere(3, 0.1),
                          MetricFamily::torus(2, 1.0, 1.0)}) {
    InvariantOptions opts;
    opts.pairs = 30;
    opts.solver_pairs = 4;
    opts.hessian_pairs = 2;
    const auto rep = run_invariants(fam, 7, opts);
    CAPTURE(model_name(fam.model()));
    CHECK(rep.checks.size() == 13);
    for (const auto& c : rep.checks) {
      CAPTURE(c.name);
      CAPTURE(c.detail);
      CHECK(c.passed);
      CHECK(c.samples > 0);
      CHECK(c.worst <= c.tolerance);
    }
    CHECK(rep.all_passed());
  }
}

TEST_CASE("bounds suite is reproducible from the seed") {
  const auto fam = MetricFamily::sphere(2, 0.2);
  const auto a = l0_bounds_suite(fam, 11, 10);
  const auto b = l0_bounds_suite(fam, 11, 10);
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(a[i].worst == b[i].worst);
    CHECK(a[i].samples == 10);
  }
}

TEST_CASE("a failing check is reported") {
  InvariantReport rep;
  rep.checks.push_back(InvariantCheck{"ok", true, 0.0, 1.0, 1, ""});
  CHECK(rep.all_passed());
  rep.checks.push_back(InvariantCheck{"bad", false, 2.0, 1.0, 1, "x"});
  CHECK_FALSE(rep.all_passed());
}
