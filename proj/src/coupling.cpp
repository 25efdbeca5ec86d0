#include "l0flow/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "l0flow/parallel.hpp"
#include "l0flow/transport.hpp"

namespace l0flow {

// ---------------------------------------------------------------- schedule

TimeSchedule TimeSchedule::make(const MetricFamily& fam, double t1_prime, double t1_dprime,
                                double horizon, double epsilon, long max_steps) {
  if (!std::isfinite(epsilon) || epsilon <= 0.0) throw DomainError("epsilon must be positive");
  if (!std::isfinite(horizon) || horizon < 0.0) throw DomainError("horizon S must be >= 0");
  if (!(t1_prime < t1_dprime)) throw DomainError("schedule requires t1' < t1''");
  fam.check_time(t1_prime);
  fam.check_time(t1_dprime);
  fam.check_time(t1_prime - horizon);  // tau'(S) must stay in [0, T]
  TimeSchedule s{t1_prime, t1_dprime, horizon, epsilon};
  const double ratio = horizon / (epsilon * epsilon);
  if (!(ratio <= static_cast<double>(max_steps))) {
    std::ostringstream os;
    os << "schedule needs " << std::ceil(ratio) << " steps, more than the cap " << max_steps;
    throw DomainError(os.str());
  }
  return s;
}

int TimeSchedule::step_count() const {
  const double ratio = horizon / (epsilon * epsilon);
  const double nearest = std::round(ratio);
  // S a multiple of eps^2 up to round-off takes no extra sliver step.
  if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, ratio)) return static_cast<int>(nearest);
  return static_cast<int>(std::ceil(ratio));
}

double TimeSchedule::s_at(int n) const {
  if (n >= step_count()) return horizon;
  return std::min(n * epsilon * epsilon, horizon);
}

// --------------------------------------------------------------------- rng

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : master_seed_(master_seed), stream_id_(stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)};
  engine_.seed(seq);
}

Eigen::VectorXd sample_ball(RngStream& stream, int d) {
  if (d < 1) throw DomainError("ball dimension must be positive");
  Eigen::VectorXd v(d);
  double n2 = 0.0;
  do {
    for (int i = 0; i < d; ++i) v[i] = stream.normal();
    n2 = v.squaredNorm();
  } while (n2 == 0.0);
  const double radius = std::pow(stream.uniform(), 1.0 / d);
  return v * (radius / std::sqrt(n2));
}

// ---------------------------------------------------------------- stepping

L0GeodesicResult solve_coupling_pair(const MetricFamily& fam, const TimeSchedule& schedule,
                                     double s, const Point& x, const Point& y,
                                     const CouplingOptions& opts, CouplingWorkspace* ws) {
  const double tp = schedule.tau_prime(s);
  const double tq = schedule.tau_dprime(s);
  if (ws != nullptr && ws->warm_velocity &&
      dist(fam, tp, x, y) <= opts.cut_fraction * fam.injectivity_radius(tp)) {
    SolverOptions warm = opts.solver;
    warm.warm_start = fam.project_tangent(x.coords, *ws->warm_velocity);
    warm.direct_stage = false;
    warm.multi_start = 1;
    auto r = l0_distance(fam, tp, tq, x, y, warm);
    if (r.converged) {
      ws->warm_velocity = r.v0.components;
      ws->last_full = false;
      return r;
    }
  }
  SolverOptions full = opts.solver;
  full.warm_start.reset();
  auto r = l0_distance(fam, tp, tq, x, y, full);
  if (!r.converged) {
    std::ostringstream os;
    os << "L0-geodesic solve failed at s=" << s << " (residual " << r.residual << ")";
    throw SolverError(os.str());
  }
  if (ws != nullptr) {
    ws->warm_velocity = r.v0.components;
    ws->last_full = true;
  }
  return r;
}

CouplingStep coupling_step(const MetricFamily& fam, const TimeSchedule& schedule, int n,
                           const Point& x, const Point& y, const Eigen::VectorXd& ball,
                           const CouplingOptions& opts, CouplingWorkspace* ws) {
  const int d = fam.dim();
  if (n < 0 || n >= schedule.step_count()) throw DomainError("step index outside the schedule");
  if (ball.size() != d) throw DomainError("ball sample has the wrong dimension");
  const double s = schedule.s_at(n);
  const double ds = schedule.s_at(n + 1) - s;
  const double tp = schedule.tau_prime(s);
  const double tq = schedule.tau_dprime(s);

  CouplingWorkspace local;
  CouplingWorkspace* work = ws != nullptr ? ws : &local;
  const auto geo = solve_coupling_pair(fam, schedule, s, x, y, opts, work);

  Eigen::VectorXd coeff = ball;
  if (opts.frame_rotation) coeff = *opts.frame_rotation * ball;
  const double scale = std::sqrt(2.0) * (ds / schedule.epsilon) * std::sqrt(d + 2.0);
  const Mat frame = orthonormal_frame(fam, tp, x);
  const TangentVec v_prime{x, fam.project_tangent(x.coords, scale * (frame * coeff))};
  const TangentVec v_dprime = spacetime_transport(fam, geo, v_prime);

  CouplingStep out{exp_map(fam, tp, v_prime), exp_map(fam, tq, v_dprime), v_prime, v_dprime, {}};
  out.diagnostics.lambda = geo.action;
  out.diagnostics.multiplicity_hit = geo.multiplicity_flag;
  out.diagnostics.residual = geo.residual;
  out.diagnostics.full_solve = work->last_full;
  out.diagnostics.x_displacement = metric_norm(fam, tp, v_prime);
  out.diagnostics.y_displacement = metric_norm(fam, tq, v_dprime);
  return out;
}

// ------------------------------------------------------------------- paths

std::pair<const Point&, const Point&> CouplingPath::positions_at(int k) const {
  const auto it = std::lower_bound(position_index.begin(), position_index.end(), k);
  if (it == position_index.end() || *it != k) {
    throw DomainError("positions were not recorded at grid index " + std::to_string(k));
  }
  const auto i = static_cast<std::size_t>(it - position_index.begin());
  return {x[i], y[i]};
}

CouplingPath run_coupling(const MetricFamily& fam, const TimeSchedule& schedule,
                          const Point& m_prime, const Point& m_dprime, RngStream stream,
                          const CouplingOptions& opts) {
  fam.check_point(m_prime);
  fam.check_point(m_dprime);
  const int steps = schedule.step_count();
  CouplingPath path;
  path.schedule = schedule;
  path.stream_id = stream.stream_id();
  path.s.reserve(steps + 1);
  path.lambda.reserve(steps + 1);
  path.multiplicity_hit.reserve(steps + 1);

  std::vector<int> keep = opts.position_steps;
  std::sort(keep.begin(), keep.end());
  auto wanted = [&](int k) {
    return opts.record_positions || k == steps || std::binary_search(keep.begin(), keep.end(), k);
  };
  auto record = [&](int k, double lambda, bool hit, const Point& x, const Point& y) {
    path.s.push_back(schedule.s_at(k));
    path.lambda.push_back(lambda);
    path.multiplicity_hit.push_back(hit ? 1 : 0);
    path.multiplicity_hits += hit ? 1 : 0;
    if (wanted(k)) {
      path.position_index.push_back(k);
      path.x.push_back(x);
      path.y.push_back(y);
    }
  };

  Point x = m_prime;
  Point y = m_dprime;
  CouplingWorkspace ws;
  int n = 0;
  try {
    for (; n < steps; ++n) {
      const Eigen::VectorXd ball = sample_ball(stream, fam.dim());
      const auto step = coupling_step(fam, schedule, n, x, y, ball, opts, &ws);
      path.full_solves += step.diagnostics.full_solve ? 1 : 0;
      record(n, step.diagnostics.lambda, step.diagnostics.multiplicity_hit, x, y);
      x = step.x;
      y = step.y;
    }
    const auto last = solve_coupling_pair(fam, schedule, schedule.s_at(steps), x, y, opts, &ws);
    path.full_solves += ws.last_full ? 1 : 0;
    record(steps, last.action, last.multiplicity_flag, x, y);
  } catch (const SolverError& e) {
    std::ostringstream os;
    os << "stream " << path.stream_id << " aborted at step " << n << ": " << e.what();
    path.failure = os.str();
  }
  return path;
}

std::vector<CouplingPath> run_ensemble(const MetricFamily& fam, const TimeSchedule& schedule,
                                       const std::vector<std::pair<Point, Point>>& initial_pairs,
                                       std::uint64_t master_seed, int n_paths,
                                       const CouplingOptions& opts, int threads) {
  if (n_paths < 1) throw DomainError("ensemble needs at least one path");
  if (initial_pairs.size() != 1 && initial_pairs.size() != static_cast<std::size_t>(n_paths)) {
    throw DomainError("initial pairs must be one pair or one per path");
  }
  std::vector<CouplingPath> paths(n_paths);
  parallel_for(paths.size(), threads, [&](std::size_t i) {
    const auto& [p, q] = initial_pairs.size() == 1 ? initial_pairs.front() : initial_pairs[i];
    paths[i] = run_coupling(fam, schedule, p, q, RngStream(master_seed, i), opts);
  });

  std::ostringstream failed;
  int count = 0;
  for (const auto& path : paths) {
    if (path.complete()) continue;
    if (count < 10) failed << (count ? "; " : "") << *path.failure;
    ++count;
  }
  if (count > 0) {
    std::ostringstream os;
    os << count << " of " << n_paths << " trajectories aborted: " << failed.str();
    throw SolverError(os.str());
  }
  return paths;
}

}  // namespace l0flow
