#include <doctest.h>

#include <cmath>
#include <random>

#include "l0flow/l0_geometry.hpp"
#include "l0flow/model_flows.hpp"
#include "support/oracles.hpp"

using namespace l0flow;
using namespace l0flow::testing;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

const Point kNorth{Model::sphere, (Vec(3) << 0.0, 0.0, 1.0).finished()};

std::vector<double> grid(double a, double b, int n) {
  std::vector<double> t(n + 1);
  for (int k = 0; k <= n; ++k) t[k] = a + (b - a) * k / n;
  return t;
}

}  // namespace

TEST_CASE("l0_action on simple curves") {
  const auto torus = MetricFamily::torus(2, 1.0, 1.0);
  const Point p{Model::torus, vec({0.0, 0.0})};
  SpaceTimeCurve still(torus, grid(0.0, 0.5, 16), std::vector<Point>(17, p));
  CHECK(l0_action(torus, still) == 0.0);

  const auto line = geodesic_interpolant(torus, 0.0, 0.5, p, Point{Model::torus, vec({0.3, 0.0})}, 256);
  CHECK(l0_action(torus, line) == doctest::Approx(0.09).epsilon(1e-6));

  const auto sphere = MetricFamily::sphere(2, 0.2);
  SpaceTimeCurve rest(sphere, grid(0.0, 0.1, 128), std::vector<Point>(129, kNorth));
  CHECK(l0_action(sphere, rest) == doctest::Approx(sphere_time_integral(2, 0.0, 0.1)).epsilon(1e-6));

  SUBCASE("second-order convergence of the quadrature") {
    auto err = [&](int n) {
      SpaceTimeCurve c(sphere, grid(0.0, 0.15, n), std::vector<Point>(n + 1, kNorth));
      return std::abs(l0_action(sphere, c) - sphere_time_integral(2, 0.0, 0.15));
    };
    const double ratio = err(32) / err(64);
    CHECK(ratio == doctest::Approx(4.0).epsilon(0.02));
  }
  SUBCASE("invalid curves") {
    CHECK_THROWS_AS(SpaceTimeCurve(torus, grid(0.0, 0.5, 4), std::vector<Point>(5, p)), DomainError);
    CHECK_THROWS_AS(SpaceTimeCurve(torus, grid(0.5, 1.5, 16), std::vector<Point>(17, p)), DomainError);
    auto t = grid(0.0, 0.5, 16);
    std::swap(t[3], t[4]);
    CHECK_THROWS_AS(SpaceTimeCurve(torus, t, std::vector<Point>(17, p)), DomainError);
  }
}

TEST_CASE("l0_geodesic_ivp") {
  SUBCASE("torus: straight line") {
    const auto torus = MetricFamily::torus(2, 1.0, 1.0);
    const Point p{Model::torus, vec({0.7, 0.2})};
    const TangentVec v{p, vec({0.8, -0.5})};
    const auto c = l0_geodesic_ivp(torus, 0.1, 0.6, p, v, 64);
    const Point end = c.points().back();
    CHECK(end.coords[0] == doctest::Approx(std::fmod(0.7 + 0.4, 1.0)));
    CHECK(end.coords[1] == doctest::Approx(0.2 - 0.25 + 1.0));
    for (const auto& vel : c.velocities()) CHECK((vel.components - v.components).norm() < 1e-12);
  }
  SUBCASE("sphere: great circle with a(t) u' constant") {
    const auto sphere = MetricFamily::sphere(2, 0.2);
    const TangentVec v{kNorth, vec({3.0, 4.0, 0.0})};
    const Vec normal = vec({4.0, -3.0, 0.0}) / 5.0;  // plane of the great circle
    const auto c = l0_geodesic_ivp(sphere, 0.0, 0.15, kNorth, v, 256);
    double max_off_plane = 0.0;
    for (const auto& p : c.points()) max_off_plane = std::max(max_off_plane, std::abs(p.coords.dot(normal)));
    CHECK(max_off_plane < 1e-8);
    // Integrated speed law: u(t) = |v| int_{0}^{t} a(0)/a(s) ds.
    const auto& pts = c.points();
    const auto& ts = c.times();
    for (std::size_t k = 0; k < pts.size(); k += 32) {
      const double u = std::atan2(pts[k].coords.head<2>().norm(), pts[k].coords[2]);
      const double expected = 5.0 * sphere_time_integral(2, 0.0, ts[k]);
      CHECK(u == doctest::Approx(expected).epsilon(1e-8));
    }
    // a(t) * du/dt constant along the computed curve (midpoint differences).
    const auto& vel = c.velocities();
    for (std::size_t k = 0; k < vel.size(); k += 16) {
      const double tm = 0.5 * (ts[k] + ts[k + 1]);
      CHECK(sphere.conformal_factor(tm) * vel[k].components.norm() == doctest::Approx(5.0).epsilon(1e-6));
    }
  }
  SUBCASE("sphere: zero velocity stays put") {
    const auto sphere = MetricFamily::sphere(3, 0.2);
    const Point p{Model::sphere, vec({0.0, 0.6, 0.0, 0.8})};
    const auto c = l0_geodesic_ivp(sphere, 0.0, 0.1, p, TangentVec{p, Vec::Zero(4)}, 32);
    for (const auto& q : c.points()) CHECK((q.coords - p.coords).norm() == 0.0);
  }
  SUBCASE("errors") {
    const auto sphere = MetricFamily::sphere(2, 0.2);
    const TangentVec v{kNorth, vec({1.0, 0.0, 0.0})};
    CHECK_THROWS_AS(l0_geodesic_ivp(sphere, 0.0, 0.1, kNorth, v, 4), DomainError);
    CHECK_THROWS_AS(l0_geodesic_ivp(sphere, 0.1, 0.1, kNorth, v, 32), DomainError);
    CHECK_THROWS_AS(l0_geodesic_ivp(sphere, 0.1, 0.3, kNorth, v, 32), DomainError);
  }
}

TEST_CASE("l0_exp examples") {
  const auto torus = MetricFamily::torus(2, 1.0, 1.0);
  const Point o{Model::torus, vec({0.0, 0.0})};
  CHECK((l0_exp(torus, 0.0, 0.5, o, TangentVec{o, Vec::Zero(2)}).coords - o.coords).norm() == 0.0);
  const Point e = l0_exp(torus, 0.0, 0.5, o, TangentVec{o, vec({0.6, 0.0})});
  CHECK(e.coords[0] == doctest::Approx(0.3));
  CHECK(e.coords[1] == doctest::Approx(0.0));
  const auto sphere = MetricFamily::sphere(2, 0.2);
  CHECK((l0_exp(sphere, 0.0, 0.1, kNorth, TangentVec{kNorth, Vec::Zero(3)}).coords - kNorth.coords).norm() == 0.0);
}

TEST_CASE("l0_distance on the torus") {
  const auto torus = MetricFamily::torus(2, 1.0, 1.0);
  const Point p{Model::torus, vec({0.0, 0.0})};
  const Point q{Model::torus, vec({0.3, 0.0})};
  const auto r = l0_distance(torus, 0.0, 0.5, p, q);
  REQUIRE(r.converged);
  CHECK(r.action == doctest::Approx(0.09).epsilon(1e-6));
  CHECK(r.v0.components[0] == doctest::Approx(0.6));
  CHECK(std::abs(r.v0.components[1]) < 1e-12);
  CHECK_FALSE(r.multiplicity_flag);

  SUBCASE("min-image direction") {
    const auto w = l0_distance(torus, 0.0, 0.1, Point{Model::torus, vec({0.05, 0.5})},
                               Point{Model::torus, vec({0.95, 0.5})});
    CHECK(w.action == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(w.v0.components[0] == doctest::Approx(-1.0));
  }
  SUBCASE("half-side separation is a genuine tie") {
    const auto h = l0_distance(torus, 0.0, 0.5, p, Point{Model::torus, vec({0.5, 0.0})});
    CHECK(h.multiplicity_flag);
    CHECK(h.action == doctest::Approx(0.25));
    // Deterministic lexicographic selection: the -x direction.
    CHECK(h.v0.components[0] < 0.0);
  }
}

TEST_CASE("l0_distance on the sphere") {
  const auto sphere = MetricFamily::sphere(2, 0.2);
  const Point e{Model::sphere, vec({1.0, 0.0, 0.0})};
  const auto r = l0_distance(sphere, 0.0, 0.1, kNorth, e);
  REQUIRE(r.converged);
  const double exact = sphere_l0_distance(2, 0.0, 0.1, kNorth, e).value;
  CHECK(r.action == doctest::Approx(exact).epsilon(1e-4));
  CHECK(r.action == doctest::Approx(11.170).epsilon(1e-4));
  CHECK_FALSE(r.multiplicity_flag);
  REQUIRE(r.direct_action.has_value());
  CHECK(*r.direct_action == doctest::Approx(r.action).epsilon(1e-6));
  CHECK(r.action <= r.upper_bound + 1e-12);

  SUBCASE("antipodal pair is flagged") {
    const Point s{Model::sphere, vec({0.0, 0.0, -1.0})};
    const auto a = l0_distance(sphere, 0.0, 0.1, kNorth, s);
    CHECK(a.converged);
    CHECK(a.multiplicity_flag);
    CHECK(a.action == doctest::Approx(sphere_l0_distance(2, 0.0, 0.1, kNorth, s).value).epsilon(1e-6));
    CHECK_THROWS_AS(l0_spatial_gradients(a), DomainError);
  }
  SUBCASE("coincident endpoints: constant minimizer") {
    const auto c = l0_distance(sphere, 0.05, 0.15, kNorth, kNorth);
    CHECK(c.converged);
    CHECK(c.action == doctest::Approx(sphere_time_integral(2, 0.05, 0.15)).epsilon(1e-10));
    const auto [gp, gq] = l0_spatial_gradients(c);
    CHECK(gp.components.norm() < 1e-10);
    CHECK(gq.components.norm() < 1e-10);
    const auto [dtp, dtq] = l0_time_partials(sphere, c);
    CHECK(dtp == doctest::Approx(-0.5 * scalar_curvature(sphere, 0.05, kNorth)));
    CHECK(dtq == doctest::Approx(0.5 * scalar_curvature(sphere, 0.15, kNorth)));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(l0_distance(sphere, 0.1, 0.05, kNorth, e), DomainError);
    CHECK_THROWS_AS(l0_distance(sphere, 0.1, 0.25, kNorth, e), DomainError);
  }
}

TEST_CASE("derivative formulas against finite differences") {
  const auto torus = MetricFamily::torus(2, 1.0, 1.0);
  const Point p{Model::torus, vec({0.0, 0.0})};
  const auto r = l0_distance(torus, 0.0, 0.5, p, Point{Model::torus, vec({0.3, 0.0})});
  const auto [gp, gq] = l0_spatial_gradients(r);
  CHECK(gp.components[0] == doctest::Approx(-0.6));
  CHECK(gq.components[0] == doctest::Approx(0.6));
  const auto [dtp, dtq] = l0_time_partials(torus, r);
  CHECK(dtp == doctest::Approx(0.18));
  CHECK(dtq == doctest::Approx(-0.18));

  const auto sphere = MetricFamily::sphere(2, 0.2);
  std::mt19937_64 rng(44);
  for (int i = 0; i < 4; ++i) {
    const Point a = random_sphere_point(rng, 2);
    const Point b = sphere_point_at_angle(rng, a, 0.3 + 0.5 * i);
    const double tp = 0.02, tq = 0.12;
    const auto base = l0_distance(sphere, tp, tq, a, b);
    REQUIRE(base.converged);
    const auto [dp, dq] = l0_time_partials(sphere, base);
    const double h = 1e-5;
    auto closed = [&](double x, double y) { return sphere_l0_distance(2, x, y, a, b).value; };
    CHECK(dp == doctest::Approx((closed(tp + h, tq) - closed(tp - h, tq)) / (2 * h)).epsilon(1e-5));
    CHECK(dq == doctest::Approx((closed(tp, tq + h) - closed(tp, tq - h)) / (2 * h)).epsilon(1e-5));
  }
}

TEST_CASE("Hessian probe") {
  const auto torus = MetricFamily::torus(2, 1.0, 1.0);
  const auto t = nonpos_hessian_probe(torus, 0.0, 0.5, Point{Model::torus, vec({0.1, 0.2})},
                                      Point{Model::torus, vec({0.3, 0.1})});
  CHECK(std::abs(t.lhs) < 1e-6);
  CHECK(t.rhs == doctest::Approx(0.0).epsilon(1e-12));

  const auto sphere = MetricFamily::sphere(2, 0.2);
  std::mt19937_64 rng(8);
  for (int i = 0; i < 3; ++i) {
    const Point a = random_sphere_point(rng, 2);
    const Point b = sphere_point_at_angle(rng, a, 0.4 + 0.7 * i);
    const auto probe = nonpos_hessian_probe(sphere, 0.03, 0.13, a, b);
    CHECK(probe.lhs <= probe.rhs + 1e-3);
  }
}
