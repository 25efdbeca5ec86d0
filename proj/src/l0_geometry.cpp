#include "l0flow/l0_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "integrator.hpp"
#include "l0flow/detail/coords.hpp"
#include "l0flow/transport.hpp"

namespace l0flow {

namespace {

using detail::exp_coords;
using detail::log_coords;

void check_window(const MetricFamily& fam, double t_prime, double t_dprime) {
  if (!(t_prime < t_dprime)) throw DomainError("time window requires t' < t''");
  fam.check_time(t_prime);
  fam.check_time(t_dprime);
}

void check_steps(int steps) {
  if (steps < SpaceTimeCurve::kMinIntervals) {
    std::ostringstream os;
    os << "need at least " << SpaceTimeCurve::kMinIntervals << " grid intervals, got " << steps;
    throw DomainError(os.str());
  }
}

std::vector<double> uniform_grid(double t0, double t1, int steps) {
  std::vector<double> times(steps + 1);
  const double h = (t1 - t0) / steps;
  for (int k = 0; k <= steps; ++k) times[k] = t0 + k * h;
  times.back() = t1;
  return times;
}

/// Columns span T_x M, orthonormal for the reference metric.
Mat reference_frame(const MetricFamily& fam, const Point& p) {
  return orthonormal_frame(fam, 0.0, p) * std::sqrt(fam.conformal_factor(0.0));
}

// ---------------------------------------------------------------- shooting

struct ShootOutcome {
  Vec v0;
  detail::GeodesicEnd end;
  double residual = 0.0;
  double action = 0.0;
  bool converged = false;
};

class Shooter {
 public:
  Shooter(const MetricFamily& fam, double t_prime, double t_dprime, const Point& start,
          const Point& target, const SolverOptions& opts)
      : fam_(fam),
        t0_(t_prime),
        t1_(t_dprime),
        start_(start),
        target_(target),
        opts_(opts),
        b_start_(reference_frame(fam, start)),
        b_target_(reference_frame(fam, target)),
        end_scale_(std::sqrt(fam.conformal_factor(t_dprime))) {}

  ShootOutcome solve(const Vec& seed) const {
    Eigen::VectorXd c = b_start_.transpose() * fam_.project_tangent(start_.coords, seed);
    detail::GeodesicEnd end;
    Eigen::VectorXd r = residual(c, end);
    double rnorm = r.norm();
    Eigen::MatrixXd jac = jacobian(c, r);

    // The endpoint moves by roughly |dc| * (t'' - t') per unit change of c;
    // keep each step well inside the injectivity radius.
    const double max_step = 0.5 * fam_.injectivity_radius(0.0) / (t1_ - t0_);
    for (int it = 0; it < opts_.max_iterations; ++it) {
      Eigen::VectorXd step = jac.colPivHouseholderQr().solve(-r);
      if (!step.allFinite()) break;
      if (rnorm * end_scale_ <= opts_.tol_residual) {
        // Converged: one undamped polish step, kept only if it helps.
        detail::GeodesicEnd end_try;
        const Eigen::VectorXd c_try = c + step;
        const Eigen::VectorXd r_try = residual(c_try, end_try);
        if (r_try.norm() < rnorm) {
          c = c_try;
          rnorm = r_try.norm();
          end = end_try;
        }
        break;
      }
      const double sn = step.norm();
      if (sn > max_step) step *= max_step / sn;

      double alpha = 1.0;
      bool accepted = false;
      Eigen::VectorXd c_try, r_try;
      detail::GeodesicEnd end_try;
      for (int bt = 0; bt < 30; ++bt) {
        c_try = c + alpha * step;
        r_try = residual(c_try, end_try);
        if (r_try.norm() < (1.0 - 1e-4 * alpha) * rnorm) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        // Quasi-Newton model went stale; rebuild it once from differences.
        Eigen::MatrixXd fresh = jacobian(c, r);
        if ((fresh - jac).norm() <= 1e-12 * (1.0 + jac.norm())) break;
        jac = std::move(fresh);
        continue;
      }
      const Eigen::VectorXd dc = c_try - c;
      const Eigen::VectorXd dr = r_try - r;
      const double ratio = r_try.norm() / rnorm;
      c = c_try;
      r = r_try;
      end = end_try;
      rnorm = r.norm();
      if (ratio > 0.5) {
        jac = jacobian(c, r);
      } else {
        jac += ((dr - jac * dc) * dc.transpose()) / dc.squaredNorm();
      }
    }

    ShootOutcome out;
    out.v0 = b_start_ * c;
    out.end = end;
    out.residual = rnorm * end_scale_;
    out.converged = out.residual <= opts_.tol_residual;
    // First variation in the endpoint: dL0 = <gamma'(t''), dm''>_{g(t'')}.
    const Vec miss = log_coords(fam_, end.x, target_.coords);
    out.action = end.action + fam_.conformal_factor(t1_) * end.w.dot(miss);
    return out;
  }

 private:
  Eigen::VectorXd residual(const Eigen::VectorXd& c, detail::GeodesicEnd& end) const {
    const Vec v0 = b_start_ * c;
    end = detail::integrate_l0_geodesic(fam_, t0_, t1_, start_.coords, v0, opts_.steps);
    const Vec miss = log_coords(fam_, target_.coords, end.x);
    return b_target_.transpose() * miss;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& c, const Eigen::VectorXd& r) const {
    const int d = static_cast<int>(c.size());
    Eigen::MatrixXd jac(d, d);
    const double h = 1e-7 * std::max(1.0, c.norm());
    detail::GeodesicEnd scratch;
    for (int j = 0; j < d; ++j) {
      Eigen::VectorXd cj = c;
      cj[j] += h;
      jac.col(j) = (residual(cj, scratch) - r) / h;
    }
    return jac;
  }

  const MetricFamily& fam_;
  double t0_;
  double t1_;
  const Point& start_;
  const Point& target_;
  const SolverOptions& opts_;
  Mat b_start_;
  Mat b_target_;
  double end_scale_;
};

// ------------------------------------------------------ direct minimization

struct DirectOutcome {
  std::vector<Vec> x;
  double action = 0.0;
  int iterations = 0;
};

double discrete_action(const MetricFamily& fam, const std::vector<double>& times,
                       const std::vector<Vec>& x) {
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < x.size(); ++k) {
    const double h = times[k + 1] - times[k];
    const double tm = 0.5 * (times[k] + times[k + 1]);
    const Vec step = log_coords(fam, x[k], x[k + 1]);
    const Vec mid = exp_coords(fam, x[k], 0.5 * step);
    total += 0.5 * (fam.conformal_factor(tm) * step.squaredNorm() / h +
                    h * fam.scalar_curvature_at(tm, mid));
  }
  return total;
}

// Gradient descent on the discrete action over interior points, with the
// gradient preconditioned by the discrete H^1 (tridiagonal) operator and an
// Armijo backtracking line search.
DirectOutcome minimize_direct(const MetricFamily& fam, const std::vector<double>& times,
                              std::vector<Vec> x, int max_iterations) {
  const int n = static_cast<int>(x.size()) - 1;  // intervals
  const int m = n - 1;                            // unknowns
  std::vector<double> weight(n);  // a(t_mid) / h per interval
  for (int k = 0; k < n; ++k) {
    const double h = times[k + 1] - times[k];
    weight[k] = fam.conformal_factor(0.5 * (times[k] + times[k + 1])) / h;
  }
  // Thomas factorization of the preconditioner, shared across coordinates.
  std::vector<double> c_prime(m), denom(m);
  for (int i = 0; i < m; ++i) {
    const double diag = weight[i] + weight[i + 1];
    const double lower = i > 0 ? -weight[i] : 0.0;
    denom[i] = diag - (i > 0 ? lower * c_prime[i - 1] : 0.0);
    c_prime[i] = (i + 1 < m ? -weight[i + 1] : 0.0) / denom[i];
  }

  DirectOutcome out;
  double energy = discrete_action(fam, times, x);
  std::vector<Vec> grad(m), dir(m), trial(x.size());
  double alpha = 1.0;
  int it = 0;
  for (; it < max_iterations; ++it) {
    for (int i = 0; i < m; ++i) {
      const int k = i + 1;
      const double hl = times[k] - times[k - 1];
      const double hr = times[k + 1] - times[k];
      Vec g = -weight[k] * log_coords(fam, x[k], x[k + 1]) -
              weight[k - 1] * log_coords(fam, x[k], x[k - 1]);
      g += 0.25 * hl * fam.grad_scalar_curvature_at(0.5 * (times[k - 1] + times[k]), x[k]);
      g += 0.25 * hr * fam.grad_scalar_curvature_at(0.5 * (times[k] + times[k + 1]), x[k]);
      grad[i] = fam.project_tangent(x[k], g);
    }
    // Forward/back substitution, all coordinates at once.
    for (int i = 0; i < m; ++i) {
      Vec rhs = grad[i];
      if (i > 0) rhs += weight[i] * dir[i - 1];
      dir[i] = rhs / denom[i];
    }
    for (int i = m - 2; i >= 0; --i) dir[i] -= c_prime[i] * dir[i + 1];
    double slope = 0.0;
    for (int i = 0; i < m; ++i) {
      dir[i] = fam.project_tangent(x[i + 1], dir[i]);
      slope += grad[i].dot(dir[i]);
    }
    if (!(slope > 1e-30 * (1.0 + std::abs(energy)))) break;

    alpha = std::min(1.0, 2.0 * alpha);
    bool accepted = false;
    double trial_energy = energy;
    for (int bt = 0; bt < 40; ++bt) {
      trial.front() = x.front();
      trial.back() = x.back();
      for (int i = 0; i < m; ++i) {
        Vec moved = exp_coords(fam, x[i + 1], -alpha * dir[i]);
        if (fam.model() == Model::sphere) moved /= moved.norm();
        trial[i + 1] = moved;
      }
      trial_energy = discrete_action(fam, times, trial);
      if (trial_energy <= energy - 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
    const double decrease = energy - trial_energy;
    std::swap(x, trial);
    energy = trial_energy;
    if (decrease <= 1e-15 * std::abs(energy)) break;
  }
  out.x = std::move(x);
  out.action = energy;
  out.iterations = it;
  return out;
}

std::vector<Vec> interpolant_coords(const MetricFamily& fam, const Point& p, const Point& q,
                                    int steps) {
  const Vec dir = log_coords(fam, p.coords, q.coords);
  std::vector<Vec> x(steps + 1);
  for (int k = 0; k <= steps; ++k) {
    Vec y = exp_coords(fam, p.coords, (static_cast<double>(k) / steps) * dir);
    if (fam.model() == Model::sphere) y /= y.norm();
    x[k] = y;
  }
  x.back() = fam.model() == Model::sphere ? q.coords : p.coords + dir;
  return x;
}

// Composite Simpson on the exact constant-speed interpolant.
double interpolant_action(const MetricFamily& fam, double t_prime, double t_dprime,
                          const Point& p, const Point& q, int steps) {
  const Vec dir = log_coords(fam, p.coords, q.coords);
  const double dt = t_dprime - t_prime;
  const double speed2 = dir.squaredNorm() / (dt * dt);
  auto integrand = [&](double t) {
    const Vec y = exp_coords(fam, p.coords, ((t - t_prime) / dt) * dir);
    return 0.5 * (fam.conformal_factor(t) * speed2 + fam.scalar_curvature_at(t, y));
  };
  const double h = dt / steps;
  double total = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double a = t_prime + k * h;
    total += (h / 6.0) * (integrand(a) + 4.0 * integrand(a + 0.5 * h) + integrand(a + h));
  }
  return total;
}

std::vector<Vec> rotated_seeds(const MetricFamily& fam, const Point& p, const Vec& seed, int count) {
  std::vector<Vec> seeds{seed};
  const double sn = seed.norm();
  if (count <= 1 || sn < 1e-12) return seeds;
  const Vec axis = seed / sn;
  const Mat frame = reference_frame(fam, p);
  std::vector<Vec> complement;
  for (Eigen::Index j = 0; j < frame.cols(); ++j) {
    Vec e = frame.col(j);
    e -= axis.dot(e) * axis;
    for (const auto& u : complement) e -= u.dot(e) * u;
    const double en = e.norm();
    if (en > 1e-6) complement.push_back(e / en);
  }
  if (complement.empty()) return seeds;
  for (int r = 1; r < count; ++r) {
    const double theta = 2.0 * M_PI * r / count;
    const Vec& e = complement[(r - 1) % complement.size()];
    seeds.push_back(sn * (std::cos(theta) * axis + std::sin(theta) * e));
  }
  return seeds;
}

bool lexicographic_less(const Vec& a, const Vec& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return true;
    if (a[i] > b[i]) return false;
  }
  return false;
}

}  // namespace

// ------------------------------------------------------------------ curves

SpaceTimeCurve::SpaceTimeCurve(const MetricFamily& fam, std::vector<double> times,
                               std::vector<Point> points)
    : times_(std::move(times)), points_(std::move(points)) {
  if (times_.size() != points_.size()) throw DomainError("curve times and points differ in length");
  check_steps(static_cast<int>(times_.size()) - 1);
  for (std::size_t k = 0; k < times_.size(); ++k) {
    fam.check_time(times_[k]);
    fam.check_point(points_[k]);
    if (k > 0 && !(times_[k] > times_[k - 1])) throw DomainError("curve times must increase");
  }
  velocities_.reserve(times_.size() - 1);
  for (std::size_t k = 0; k + 1 < times_.size(); ++k) {
    const double h = times_[k + 1] - times_[k];
    velocities_.push_back(
        TangentVec{points_[k], log_coords(fam, points_[k].coords, points_[k + 1].coords) / h});
  }
}

double l0_action(const MetricFamily& fam, const SpaceTimeCurve& curve) {
  const auto& times = curve.times();
  const auto& vel = curve.velocities();
  double total = 0.0;
  for (std::size_t k = 0; k < vel.size(); ++k) {
    const double h = times[k + 1] - times[k];
    const double tm = 0.5 * (times[k] + times[k + 1]);
    const Vec mid = exp_coords(fam, vel[k].base.coords, (0.5 * h) * vel[k].components);
    total += 0.5 * h *
             (fam.conformal_factor(tm) * vel[k].components.squaredNorm() +
              fam.scalar_curvature_at(tm, mid));
  }
  return total;
}

SpaceTimeCurve geodesic_interpolant(const MetricFamily& fam, double t_prime, double t_dprime,
                                    const Point& m_prime, const Point& m_dprime, int steps) {
  check_window(fam, t_prime, t_dprime);
  check_steps(steps);
  fam.check_point(m_prime);
  fam.check_point(m_dprime);
  const auto x = interpolant_coords(fam, m_prime, m_dprime, steps);
  std::vector<Point> pts;
  pts.reserve(x.size());
  for (const auto& xi : x) pts.push_back(Point{fam.model(), fam.retract(xi)});
  return SpaceTimeCurve(fam, uniform_grid(t_prime, t_dprime, steps), std::move(pts));
}

SpaceTimeCurve l0_geodesic_ivp(const MetricFamily& fam, double t_prime, double t_dprime,
                               const Point& m_prime, const TangentVec& v0, int steps) {
  check_window(fam, t_prime, t_dprime);
  check_steps(steps);
  fam.check_tangent(v0);
  fam.check_point(m_prime);
  std::vector<Vec> trace;
  detail::integrate_l0_geodesic(fam, t_prime, t_dprime, m_prime.coords, v0.components, steps,
                                nullptr, &trace);
  std::vector<Point> pts;
  pts.reserve(trace.size());
  for (const auto& x : trace) pts.push_back(Point{fam.model(), fam.retract(x)});
  return SpaceTimeCurve(fam, uniform_grid(t_prime, t_dprime, steps), std::move(pts));
}

Point l0_exp(const MetricFamily& fam, double t_prime, double t_dprime, const Point& m_prime,
             const TangentVec& v0, int steps) {
  check_window(fam, t_prime, t_dprime);
  check_steps(steps);
  fam.check_tangent(v0);
  const auto end = detail::integrate_l0_geodesic(fam, t_prime, t_dprime, m_prime.coords,
                                                 v0.components, steps);
  return Point{fam.model(), fam.retract(end.x)};
}

// ---------------------------------------------------------------- distance

L0GeodesicResult l0_distance(const MetricFamily& fam, double t_prime, double t_dprime,
                             const Point& m_prime, const Point& m_dprime,
                             const SolverOptions& opts) {
  check_window(fam, t_prime, t_dprime);
  check_steps(opts.steps);
  fam.check_point(m_prime);
  fam.check_point(m_dprime);
  const double dt = t_dprime - t_prime;

  L0GeodesicResult result;
  result.t_prime = t_prime;
  result.t_dprime = t_dprime;
  result.steps = opts.steps;
  result.start = m_prime;
  result.end = m_dprime;
  result.upper_bound = interpolant_action(fam, t_prime, t_dprime, m_prime, m_dprime, opts.steps);

  std::vector<Vec> seeds;
  if (opts.warm_start) {
    seeds.push_back(*opts.warm_start);
  } else {
    Vec seed = log_coords(fam, m_prime.coords, m_dprime.coords) / dt;
    if (opts.direct_stage) {
      const auto times = uniform_grid(t_prime, t_dprime, opts.steps);
      auto direct = minimize_direct(fam, times, interpolant_coords(fam, m_prime, m_dprime, opts.steps),
                                    opts.direct_max_iterations);
      result.direct_action = direct.action;
      const double h = times[1] - times[0];
      const Vec l1 = log_coords(fam, direct.x[0], direct.x[1]);
      const Vec l2 = log_coords(fam, direct.x[0], direct.x[2]);
      seed = (4.0 * l1 - l2) / (2.0 * h);
    }
    seeds = rotated_seeds(fam, m_prime, seed, opts.multi_start);
  }

  const Shooter shooter(fam, t_prime, t_dprime, m_prime, m_dprime, opts);
  std::vector<ShootOutcome> outcomes;
  outcomes.reserve(seeds.size());
  for (const auto& s : seeds) outcomes.push_back(shooter.solve(s));

  std::vector<const ShootOutcome*> good;
  for (const auto& o : outcomes) {
    if (o.converged) good.push_back(&o);
  }
  result.candidates = static_cast<int>(good.size());

  const ShootOutcome* best = nullptr;
  if (good.empty()) {
    for (const auto& o : outcomes) {
      if (best == nullptr || o.residual < best->residual) best = &o;
    }
  } else {
    double min_action = good.front()->action;
    for (const auto* o : good) min_action = std::min(min_action, o->action);
    const double tol = opts.tol_action * (1.0 + std::abs(min_action));
    for (const auto* o : good) {
      if (o->action > min_action + tol) continue;
      if (best == nullptr || lexicographic_less(o->v0, best->v0)) best = o;
    }
    const double scale = std::sqrt(fam.conformal_factor(t_prime));
    for (const auto* o : good) {
      if (std::abs(o->action - best->action) <= tol &&
          scale * (o->v0 - best->v0).norm() > opts.tol_sep) {
        result.multiplicity_flag = true;
      }
    }
  }

  result.converged = best->converged;
  result.residual = best->residual;
  result.action = best->action;
  result.v0 = TangentVec{m_prime, fam.project_tangent(m_prime.coords, best->v0)};
  result.v_end = TangentVec{m_dprime, fam.project_tangent(m_dprime.coords, best->end.w)};
  if (opts.record_curve) {
    result.curve = l0_geodesic_ivp(fam, t_prime, t_dprime, m_prime, result.v0, opts.steps);
  }
  return result;
}

std::pair<TangentVec, TangentVec> l0_spatial_gradients(const L0GeodesicResult& result) {
  if (!result.converged) throw SolverError("gradient requested for an unconverged solve");
  if (result.multiplicity_flag) throw DomainError("L0 is not differentiable at a cut pair");
  return {TangentVec{result.v0.base, -result.v0.components}, result.v_end};
}

std::pair<double, double> l0_time_partials(const MetricFamily& fam, const L0GeodesicResult& result) {
  if (!result.converged) throw SolverError("time partials requested for an unconverged solve");
  if (result.multiplicity_flag) throw DomainError("L0 is not differentiable at a cut pair");
  const double tp = result.t_prime;
  const double tq = result.t_dprime;
  const double sp = fam.conformal_factor(tp) * result.v0.components.squaredNorm();
  const double sq = fam.conformal_factor(tq) * result.v_end.components.squaredNorm();
  return {0.5 * (sp - scalar_curvature(fam, tp, result.start)),
          -0.5 * (sq - scalar_curvature(fam, tq, result.end))};
}

// ------------------------------------------------------------ Hessian probe

HessianProbe nonpos_hessian_probe(const MetricFamily& fam, double t_prime, double t_dprime,
                                  const Point& m_prime, const Point& m_dprime,
                                  const SolverOptions& opts, double epsilon) {
  SolverOptions base_opts = opts;
  base_opts.record_curve = false;
  const auto base = l0_distance(fam, t_prime, t_dprime, m_prime, m_dprime, base_opts);
  if (base.multiplicity_flag) throw DomainError("Hessian probe at a multiple-minimizer pair");
  if (!base.converged) throw SolverError("Hessian probe: base solve did not converge");

  const Mat frame = orthonormal_frame(fam, t_prime, m_prime);
  const Mat moved = spacetime_transport_columns(fam, base, frame);

  SolverOptions warm = opts;
  warm.warm_start = base.v0.components;
  warm.direct_stage = false;
  warm.multi_start = 1;
  warm.record_curve = false;

  auto value = [&](double eps, Eigen::Index i) {
    const Point p = exp_map(fam, t_prime, TangentVec{m_prime, eps * Vec(frame.col(i))});
    const Point q = exp_map(fam, t_dprime, TangentVec{m_dprime, eps * Vec(moved.col(i))});
    const auto r = l0_distance(fam, t_prime, t_dprime, p, q, warm);
    if (!r.converged) throw SolverError("Hessian probe: perturbed solve did not converge");
    if (r.multiplicity_flag) throw DomainError("Hessian probe stencil reached a cut pair");
    return r.action;
  };

  const double center = value(0.0, 0);
  auto contracted = [&](double eps) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < frame.cols(); ++i) {
      sum += (value(eps, i) - 2.0 * center + value(-eps, i)) / (eps * eps);
    }
    return sum;
  };
  HessianProbe probe;
  probe.lhs = (4.0 * contracted(0.5 * epsilon) - contracted(epsilon)) / 3.0;
  const auto [dtp, dtq] = l0_time_partials(fam, base);
  probe.rhs = dtp + dtq;
  return probe;
}

}  // namespace l0flow
