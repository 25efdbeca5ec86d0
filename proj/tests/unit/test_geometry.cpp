#include <doctest.h>

#include <cmath>
#include <random>

#include "l0flow/geometry.hpp"
#include "support/oracles.hpp"

using namespace l0flow;
using l0flow::testing::random_point;
using l0flow::testing::random_tangent;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Point north(int d) {
  Vec x = Vec::Zero(d + 1);
  x[d] = 1.0;
  return Point{Model::sphere, x};
}

// R of c * g_std on S^d from the sectional curvature 1/c, computed from the
// intrinsic circle-circumference defect of a small geodesic circle:
// C(r) = 2 pi r (1 - K r^2 / 6 + ...).
double scalar_curvature_from_circles(double c, int d) {
  const double r = 1e-3;
  const double std_radius = r / std::sqrt(c);
  const double circumference = 2.0 * M_PI * std::sin(std_radius) * std::sqrt(c);
  const double sectional = 6.0 * (1.0 - circumference / (2.0 * M_PI * r)) / (r * r);
  return d * (d - 1) * sectional;
}

}  // namespace

TEST_CASE("metric_inner on the model flows") {
  const auto torus = MetricFamily::torus(2, 1.0, 1.0);
  const Point p{Model::torus, vec({0.2, 0.7})};
  const TangentVec u{p, vec({1.0, 0.0})};
  CHECK(metric_inner(torus, 0.3, u, u) == doctest::Approx(1.0));

  const auto sphere = MetricFamily::sphere(2, 0.2);
  const Point n = north(2);
  const TangentVec e{n, vec({1.0, 0.0, 0.0})};
  CHECK(metric_inner(sphere, 0.0, e, e) == doctest::Approx(1.0));
  // a(0.1) = 1 - 2 * 0.1
  CHECK(metric_inner(sphere, 0.1, e, e) == doctest::Approx(0.8).epsilon(1e-15));

  SUBCASE("errors") {
    const TangentVec other{Point{Model::torus, vec({0.5, 0.5})}, vec({1.0, 0.0})};
    CHECK_THROWS_AS(metric_inner(torus, 0.1, u, other), DomainError);
    CHECK_THROWS_AS(metric_inner(torus, 1.5, u, u), DomainError);
    CHECK_THROWS_AS(metric_inner(sphere, -0.1, e, e), DomainError);
  }
}

TEST_CASE("scalar curvature matches the circle-defect oracle") {
  const auto torus = MetricFamily::torus(3, 2.0, 1.0);
  const Point p{Model::torus, vec({0.1, 0.2, 0.3})};
  CHECK(scalar_curvature(torus, 0.5, p) == 0.0);

  const auto sphere = MetricFamily::sphere(2, 0.2);
  CHECK(scalar_curvature(sphere, 0.0, north(2)) == doctest::Approx(2.0));
  CHECK(scalar_curvature(sphere, 0.1, north(2)) == doctest::Approx(2.5).epsilon(1e-14));
  for (double t : {0.0, 0.05, 0.1, 0.19}) {
    const double oracle = scalar_curvature_from_circles(1.0 - 2.0 * t, 2);
    CHECK(scalar_curvature(sphere, t, north(2)) == doctest::Approx(oracle).epsilon(1e-6));
  }
  const auto sphere3 = MetricFamily::sphere(3, 0.2);
  const double oracle3 = scalar_curvature_from_circles(1.0 - 4.0 * 0.15, 3);
  CHECK(scalar_curvature(sphere3, 0.15, north(3)) == doctest::Approx(oracle3).epsilon(1e-6));
}

TEST_CASE("grad R vanishes and agrees with finite differences of R") {
  std::mt19937_64 rng(11);
  for (const auto& fam : {MetricFamily::torus(2, 1.0, 1.0), MetricFamily::sphere(3, 0.2)}) {
    for (int i = 0; i < 20; ++i) {
      const Point p = random_point(rng, fam);
      const TangentVec v = random_tangent(rng, fam, p);
      const double t = 0.1;
      CHECK(grad_scalar_curvature(fam, t, p).components.norm() == 0.0);
      const double h = 1e-4;
      const double fd = (scalar_curvature(fam, t, exp_map(fam, t, TangentVec{p, h * v.components})) -
                         scalar_curvature(fam, t, exp_map(fam, t, TangentVec{p, -h * v.components}))) /
                        (2 * h);
      CHECK(std::abs(fd - metric_inner(fam, t, grad_scalar_curvature(fam, t, p), v)) < 1e-8);
    }
  }
}

TEST_CASE("ricci raised with g(t)") {
  const auto sphere = MetricFamily::sphere(2, 0.2);
  const TangentVec v{north(2), vec({0.0, 1.0, 0.0})};
  CHECK((ricci(sphere, 0.0, v).components - v.components).norm() < 1e-15);
  CHECK((ricci(sphere, 0.1, v).components - 1.25 * v.components).norm() < 1e-14);
  const auto torus = MetricFamily::torus(2, 1.0, 1.0);
  const TangentVec u{Point{Model::torus, vec({0.1, 0.1})}, vec({1.0, 2.0})};
  CHECK(ricci(torus, 0.4, u).components.norm() == 0.0);
}

TEST_CASE("Ricci flow equation dg/dt = -2 Ric on random samples") {
  std::mt19937_64 rng(3);
  for (const auto& fam : {MetricFamily::torus(2, 1.0, 1.0), MetricFamily::sphere(2, 0.2),
                          MetricFamily::sphere(3, 0.2)}) {
    std::uniform_real_distribution<double> tdist(0.01, fam.horizon() - 0.01);
    for (int i = 0; i < 100; ++i) {
      const double t = tdist(rng);
      const Point p = random_point(rng, fam);
      const TangentVec v = random_tangent(rng, fam, p);
      const double h = 1e-4;
      const double fd = (metric_inner(fam, t + h, v, v) - metric_inner(fam, t - h, v, v)) / (2 * h);
      const double ric = ricci_form(fam, t, v, v);
      CHECK(std::abs(fd + 2.0 * ric) < 1e-6);
      CHECK(std::abs(metric_time_derivative(fam, t, v, v) + 2.0 * ric) < 1e-10);
    }
  }
}

TEST_CASE("dR/dt = Laplacian R + 2|Ric|^2 and the contracted identities") {
  const auto sphere = MetricFamily::sphere(3, 0.2);
  const Point p = north(3);
  for (double t : {0.02, 0.1, 0.18}) {
    const double h = 1e-5;
    const double fd = (scalar_curvature(sphere, t + h, p) - scalar_curvature(sphere, t - h, p)) / (2 * h);
    CHECK(fd == doctest::Approx(2.0 * ricci_norm_squared(sphere, t, p)).epsilon(1e-7));
    CHECK(bianchi_defect(sphere, t, p).components.norm() == 0.0);
    CHECK(trace_identity_defect(sphere, t, p) == 0.0);
  }
}

TEST_CASE("metric and distance comparison under the flow") {
  std::mt19937_64 rng(5);
  for (const auto& fam : {MetricFamily::torus(2, 1.0, 1.0), MetricFamily::sphere(2, 0.2)}) {
    std::uniform_real_distribution<double> tdist(0.0, fam.horizon());
    const double km = fam.bounds().k_minus;
    for (int i = 0; i < 100; ++i) {
      double s = tdist(rng), t = tdist(rng);
      if (s > t) std::swap(s, t);
      const Point p = random_point(rng, fam);
      const Point q = random_point(rng, fam);
      const TangentVec v = random_tangent(rng, fam, p);
      CHECK(metric_inner(fam, t, v, v) <= std::exp(2 * km * (t - s)) * metric_inner(fam, s, v, v) + 1e-14);
      CHECK(dist(fam, t, p, q) <= std::exp(km * (t - s)) * dist(fam, s, p, q) + 1e-14);
      if (fam.model() == Model::sphere && t > s + 1e-3) {
        CHECK(metric_inner(fam, t, v, v) < metric_inner(fam, s, v, v));
      }
    }
  }
}

TEST_CASE("exp_map examples") {
  const auto torus = MetricFamily::torus(2, 1.0, 1.0);
  const Point p{Model::torus, vec({0.9, 0.5})};
  const Point q = exp_map(torus, 0.0, TangentVec{p, vec({0.2, 0.0})});
  CHECK(q.coords[0] == doctest::Approx(0.1));
  CHECK(q.coords[1] == doctest::Approx(0.5));
  CHECK((exp_map(torus, 0.0, TangentVec{p, Vec::Zero(2)}).coords - p.coords).norm() == 0.0);

  const auto sphere = MetricFamily::sphere(2, 0.2);
  const Point n = north(2);
  const Point e = exp_map(sphere, 0.1, TangentVec{n, vec({0.0, M_PI / 2, 0.0})});
  CHECK((e.coords - vec({0.0, 1.0, 0.0})).norm() < 1e-15);
  CHECK((exp_map(sphere, 0.1, TangentVec{n, Vec::Zero(3)}).coords - n.coords).norm() == 0.0);
}

TEST_CASE("dist examples") {
  const auto torus = MetricFamily::torus(2, 1.0, 1.0);
  const Point a{Model::torus, vec({0.05, 0.0})};
  const Point b{Model::torus, vec({0.95, 0.0})};
  CHECK(dist(torus, 0.0, a, a) == 0.0);
  CHECK(dist(torus, 0.0, a, b) == doctest::Approx(0.1));

  const auto sphere = MetricFamily::sphere(2, 0.2);
  const Point n = north(2);
  Point s = n;
  s.coords[2] = -1.0;
  CHECK(dist(sphere, 0.1, n, s) == doctest::Approx(std::sqrt(0.8) * M_PI).epsilon(1e-15));

  // Oracle: length of a fine polygon along the meridian, scaled by sqrt(a).
  const int m = 20000;
  double length = 0.0;
  for (int k = 0; k < m; ++k) {
    const double a0 = M_PI * k / m, a1 = M_PI * (k + 1) / m;
    length += std::hypot(std::sin(a1) - std::sin(a0), std::cos(a1) - std::cos(a0));
  }
  CHECK(dist(sphere, 0.1, n, s) == doctest::Approx(std::sqrt(0.8) * length).epsilon(1e-8));
}

TEST_CASE("exp and dist are consistent inside the injectivity radius") {
  std::mt19937_64 rng(9);
  for (const auto& fam : {MetricFamily::torus(3, 1.0, 1.0), MetricFamily::sphere(2, 0.2),
                          MetricFamily::sphere(3, 0.2)}) {
    for (int i = 0; i < 100; ++i) {
      const double t = 0.05;
      const Point p = random_point(rng, fam);
      TangentVec v = random_tangent(rng, fam, p);
      const double n = metric_norm(fam, t, v);
      const double target = 0.9 * fam.injectivity_radius(t) * std::uniform_real_distribution<>(0, 1)(rng);
      v.components *= target / n;
      const Point q = exp_map(fam, t, v);
      CHECK(std::abs(dist(fam, t, p, q) - metric_norm(fam, t, v)) < 1e-9);
      const TangentVec back = log_map(fam, p, q);
      CHECK((back.components - v.components).norm() < 1e-9);
    }
  }
}

TEST_CASE("exp_map keeps sphere points normalized over long chains") {
  std::mt19937_64 rng(17);
  const auto fam = MetricFamily::sphere(3, 0.2);
  Point p = north(3);
  for (int i = 0; i < 10000; ++i) p = exp_map(fam, 0.1, random_tangent(rng, fam, p, 0.1));
  CHECK(std::abs(p.coords.norm() - 1.0) < 1e-12);
  CHECK_NOTHROW(fam.check_point(p));
}

TEST_CASE("orthonormal frame is deterministic and g(t)-orthonormal") {
  std::mt19937_64 rng(21);
  const auto fam = MetricFamily::sphere(3, 0.2);
  for (int i = 0; i < 20; ++i) {
    const Point p = random_point(rng, fam);
    const Mat f = orthonormal_frame(fam, 0.1, p);
    REQUIRE(f.cols() == 3);
    const Mat gram = fam.conformal_factor(0.1) * (f.transpose() * f);
    CHECK((gram - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((f.transpose() * p.coords).norm() < 1e-14);
    CHECK((orthonormal_frame(fam, 0.1, p) - f).norm() == 0.0);
  }
  // Degenerate ambient direction is skipped at the pole.
  const Mat f = orthonormal_frame(fam, 0.0, north(3));
  CHECK((f - Mat::Identity(4, 3)).norm() < 1e-15);
}

TEST_CASE("construction errors") {
  CHECK_THROWS_AS(MetricFamily::torus(1, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(MetricFamily::torus(2, -1.0, 1.0), DomainError);
  CHECK_THROWS_AS(MetricFamily::sphere(2, 0.5), DomainError);
  CHECK_THROWS_AS(MetricFamily::sphere(3, 0.25), DomainError);
  CHECK_NOTHROW(MetricFamily::sphere(3, 0.2));
  const auto fam = MetricFamily::sphere(2, 0.2);
  CHECK_THROWS_AS(fam.make_point(vec({1.0, 0.0})), DomainError);
  CHECK_THROWS_AS(fam.make_point(vec({2.0, 0.0, 0.0})), DomainError);
  CHECK_THROWS_AS(fam.make_tangent(north(2), vec({0.0, 0.0, 1.0})), DomainError);
  const auto torus = MetricFamily::torus(2, 1.0, 1.0);
  const Point wrapped = torus.make_point(vec({1.25, -0.25}));
  CHECK(wrapped.coords[0] == doctest::Approx(0.25));
  CHECK(wrapped.coords[1] == doctest::Approx(0.75));
}
