#include "l0flow/invariants.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "l0flow/coupling.hpp"
#include "l0flow/model_flows.hpp"
#include "l0flow/ot_verify.hpp"
#include "l0flow/transport.hpp"

namespace l0flow {

namespace {

// Stream ids for the suite's own draws, far from ensemble path indices.
constexpr std::uint64_t kBoundsStream = 0xB0B0'0000'0000'0001ULL;
constexpr std::uint64_t kSuiteStream = 0xB0B0'0000'0000'0002ULL;

Point draw_point(const MetricFamily& fam, RngStream& rng) {
  Vec x(fam.ambient_dim());
  if (fam.model() == Model::sphere) {
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.normal();
    return fam.make_point(x / x.norm());
  }
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = fam.side() * rng.uniform();
  return fam.make_point(x);
}

TangentVec draw_tangent(const MetricFamily& fam, const Point& p, RngStream& rng) {
  Vec v(fam.ambient_dim());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  return TangentVec{p, fam.project_tangent(p.coords, v)};
}

// A window [t', t''] inside [0, T] of length at least 2% of the remainder.
std::pair<double, double> draw_window(const MetricFamily& fam, RngStream& rng) {
  const double tp = 0.9 * fam.horizon() * rng.uniform();
  const double tq = tp + (0.02 + 0.98 * rng.uniform()) * (fam.horizon() - tp);
  return {tp, tq};
}

// Keeps the pair away from the sphere's cut locus.
Point draw_partner(const MetricFamily& fam, const Point& p, RngStream& rng, double max_angle) {
  for (;;) {
    Point q = draw_point(fam, rng);
    if (fam.model() != Model::sphere) return q;
    if (std::acos(std::clamp(p.coords.dot(q.coords), -1.0, 1.0)) <= max_angle) return q;
  }
}

struct Tracker {
  InvariantCheck check;

  Tracker(std::string name, double tolerance) {
    check.name = std::move(name);
    check.tolerance = tolerance;
    check.worst = 0.0;
  }
  // `excess` is the violation measure: passes while <= tolerance.
  void record(double excess, const std::string& detail) {
    ++check.samples;
    if (!std::isfinite(excess) || excess > check.worst) check.worst = excess;
    if (!(excess <= check.tolerance)) {
      if (check.passed) check.detail = detail;
      check.passed = false;
    }
  }
  void fail(const std::string& detail) {
    ++check.samples;
    if (check.passed) check.detail = detail;
    check.passed = false;
  }
};

std::string describe(double tp, double tq, const Point& p, const Point& q) {
  std::ostringstream os;
  os.precision(12);
  os << "t'=" << tp << " t''=" << tq << " m'=(" << p.coords.transpose() << ") m''=("
     << q.coords.transpose() << ")";
  return os.str();
}

// Largest Ric(u, u) / g(u, u) along the g(t')-geodesic from p to q over the
// window, sampled on a grid.
double ricci_upper_along(const MetricFamily& fam, double tp, double tq, const Point& p,
                         const Point& q) {
  const TangentVec dir = log_map(fam, p, q);
  double k = -std::numeric_limits<double>::infinity();
  const int samples = 16;
  for (int i = 0; i <= samples; ++i) {
    const double s = static_cast<double>(i) / samples;
    const Point x = exp_map(fam, tp, TangentVec{p, s * dir.components});
    const double t = tp + s * (tq - tp);
    const Mat frame = orthonormal_frame(fam, t, x);
    for (Eigen::Index j = 0; j < frame.cols(); ++j) {
      const TangentVec e{x, frame.col(j)};
      k = std::max(k, ricci_form(fam, t, e, e));
    }
  }
  return k;
}

}  // namespace

bool InvariantReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

std::vector<InvariantCheck> l0_bounds_suite(const MetricFamily& fam, std::uint64_t seed, int pairs,
                                            const SolverOptions& opts) {
  const double tol = 1e-8;
  Tracker lower("l0_lower_bound", tol);
  Tracker upper("l0_upper_bound", tol);
  Tracker speed("l0_speed_bound", 1e-6);
  RngStream rng(seed, kBoundsStream);
  const int d = fam.dim();
  const double km = fam.bounds().k_minus;
  SolverOptions solver = opts;
  solver.record_curve = true;

  for (int i = 0; i < pairs; ++i) {
    const auto [tp, tq] = draw_window(fam, rng);
    const Point p = draw_point(fam, rng);
    const Point q = draw_point(fam, rng);
    const std::string where = describe(tp, tq, p, q);
    const auto r = l0_distance(fam, tp, tq, p, q, solver);
    if (!r.converged) {
      lower.fail("solver did not converge at " + where);
      upper.fail("solver did not converge at " + where);
      speed.fail("solver did not converge at " + where);
      continue;
    }
    const double dt = tq - tp;
    const double l0 = r.action;
    const double scale = 1.0 + std::abs(l0);

    // L0 >= e^{-K_ dt} rho_{g(t'')}^2 / (2 dt) - d K_ dt / 2.
    const double rq = dist(fam, tq, p, q);
    const double lb = 0.5 * std::exp(-km * dt) * rq * rq / dt - 0.5 * d * km * dt;
    lower.record((lb - l0) / scale, where);

    // L0 <= rho_{g(t')}^2 / (2 dt^2) * (e^{2 K_ dt} - 1) / (2 K_) + d K_+(c) dt / 2.
    const double rp = dist(fam, tp, p, q);
    const double growth = km > 0.0 ? std::expm1(2.0 * km * dt) / (2.0 * km) : dt;
    const double kplus = std::max(0.0, ricci_upper_along(fam, tp, tq, p, q));
    const double ub = rp * rp / (2.0 * dt * dt) * growth + 0.5 * d * kplus * dt;
    upper.record((l0 - ub) / scale, where);

    // Some t* has |gamma'(t*)|^2 / 2 <= L0 / dt + d K_ / 2.
    double slowest = 0.5 * fam.conformal_factor(tp) * r.v0.components.squaredNorm();
    slowest = std::min(slowest, 0.5 * fam.conformal_factor(tq) * r.v_end.components.squaredNorm());
    const auto& times = r.curve.times();
    const auto& vel = r.curve.velocities();
    for (std::size_t k = 0; k < vel.size(); ++k) {
      const double tm = 0.5 * (times[k] + times[k + 1]);
      slowest = std::min(slowest, 0.5 * fam.conformal_factor(tm) * vel[k].components.squaredNorm());
    }
    const double sb = l0 / dt + 0.5 * d * km;
    speed.record((slowest - sb) / (1.0 + std::abs(sb)), where);
  }
  return {lower.check, upper.check, speed.check};
}

InvariantReport run_invariants(const MetricFamily& fam, std::uint64_t seed,
                               const InvariantOptions& opts) {
  InvariantReport rep;
  rep.model = fam.model();
  rep.d = fam.dim();
  rep.seed = seed;
  RngStream rng(seed, kSuiteStream);
  const double horizon = fam.horizon();

  {
    Tracker flow("flow_equation", 1e-10);
    Tracker bianchi("contracted_bianchi", 1e-10);
    Tracker trace("trace_identity", 1e-10);
    Tracker evolution("scalar_curvature_evolution", 1e-6);
    Tracker roundtrip("exp_log_roundtrip", 1e-10);
    for (int i = 0; i < 200; ++i) {
      const double t = horizon * (0.05 + 0.9 * rng.uniform());
      const Point p = draw_point(fam, rng);
      const TangentVec u = draw_tangent(fam, p, rng);
      const std::string where = "t=" + std::to_string(t);
      const double uu = metric_inner(fam, t, u, u);
      flow.record(std::abs(metric_time_derivative(fam, t, u, u) + 2.0 * ricci_form(fam, t, u, u)) /
                      (1.0 + uu),
                  where);
      bianchi.record(bianchi_defect(fam, t, p).components.norm(), where);
      trace.record(std::abs(trace_identity_defect(fam, t, p)), where);
      // Homogeneous models: dR/dt = 2 |Ric|^2.
      const double h = 1e-5 * horizon;
      const double dr = (scalar_curvature(fam, t + h, p) - scalar_curvature(fam, t - h, p)) / (2 * h);
      const double rhs = 2.0 * ricci_norm_squared(fam, t, p);
      evolution.record(std::abs(dr - rhs) / (1.0 + std::abs(rhs)), where);

      const Point q = draw_partner(fam, p, rng, M_PI - 1e-3);
      const Point back = exp_map(fam, t, log_map(fam, p, q));
      roundtrip.record(dist(fam, t, back, q), where);
    }
    for (auto* t : {&flow, &bianchi, &trace, &evolution, &roundtrip}) rep.checks.push_back(t->check);
  }

  for (auto& c : l0_bounds_suite(fam, seed, opts.pairs, opts.solver)) rep.checks.push_back(c);

  {
    Tracker agree("solver_matches_closed_form", 1e-6);
    Tracker isometry("transport_isometry", 1e-8);
    Tracker orthogonal("transport_orthogonality", 1e-8);
    SolverOptions solver = opts.solver;
    solver.record_curve = false;
    for (int i = 0; i < opts.solver_pairs; ++i) {
      const auto [tp, tq] = draw_window(fam, rng);
      const Point p = draw_point(fam, rng);
      const Point q = draw_partner(fam, p, rng, 2.5);
      const std::string where = describe(tp, tq, p, q);
      const auto r = l0_distance(fam, tp, tq, p, q, solver);
      if (!r.converged) {
        agree.fail("solver did not converge at " + where);
        continue;
      }
      if (const auto exact = closed_form_l0(fam, tp, tq, p, q)) {
        agree.record(std::abs(r.action - *exact) / (1.0 + std::abs(*exact)), where);
      }
      const TangentVec v = draw_tangent(fam, p, rng);
      const TangentVec moved = spacetime_transport(fam, r, v);
      const double n0 = metric_norm(fam, tp, v);
      isometry.record(std::abs(metric_norm(fam, tq, moved) - n0) / std::max(1.0, n0), where);
      const auto map = transport_matrix(fam, r);
      const Eigen::MatrixXd gram = map.matrix.transpose() * map.matrix;
      orthogonal.record(
          (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff(), where);
    }
    for (auto* t : {&agree, &isometry, &orthogonal}) rep.checks.push_back(t->check);
  }

  {
    Tracker hessian("hessian_inequality", 1e-3);
    for (int i = 0; i < opts.hessian_pairs; ++i) {
      const auto [tp, tq] = draw_window(fam, rng);
      const Point p = draw_point(fam, rng);
      const Point q = draw_partner(fam, p, rng, 2.0);
      const std::string where = describe(tp, tq, p, q);
      try {
        const auto probe = nonpos_hessian_probe(fam, tp, tq, p, q, opts.solver);
        hessian.record(probe.lhs - probe.rhs, where);
      } catch (const std::exception& e) {
        hessian.fail(std::string(e.what()) + " at " + where);
      }
    }
    rep.checks.push_back(hessian.check);
  }

  {
    Tracker shape("phi_concave_nondecreasing", 0.0);
    for (const auto& phi : {PhiSpec::identity(), PhiSpec::capped(1.0), PhiSpec::exp_saturating()}) {
      shape.record(phi_is_concave_nondecreasing(phi, -10.0, 50.0) ? 0.0 : 1.0, phi.to_string());
    }
    rep.checks.push_back(shape.check);
  }
  return rep;
}

}  // namespace l0flow
