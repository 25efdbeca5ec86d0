#include "l0flow/ot_verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "l0flow/model_flows.hpp"
#include "l0flow/parallel.hpp"

namespace l0flow {

namespace {

constexpr double kZ99 = 2.3263478740408408;  // one-sided 99% normal quantile

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  double sd = 0.0;
};

MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe out;
  const double n = static_cast<double>(xs.size());
  if (xs.empty()) return out;
  for (double x : xs) out.mean += x;
  out.mean /= n;
  if (xs.size() < 2) return out;
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.sd = std::sqrt(ss / (n - 1.0));
  out.se = out.sd / std::sqrt(n);
  return out;
}

double one_sided_p(double mean, double se, double& z) {
  if (se > 0.0) {
    z = mean / se;
  } else {
    z = mean > 0.0 ? std::numeric_limits<double>::infinity()
                   : (mean < 0.0 ? -std::numeric_limits<double>::infinity() : 0.0);
  }
  return 0.5 * std::erfc(z / std::sqrt(2.0));
}

}  // namespace

// --------------------------------------------------------------------- phi

double PhiSpec::operator()(double x) const {
  switch (kind) {
    case Kind::identity:
      return x;
    case Kind::capped:
      return std::min(x, cap);
    case Kind::exp_saturating:
      return 1.0 - std::exp(-x);
  }
  return x;
}

std::string PhiSpec::to_string() const {
  switch (kind) {
    case Kind::identity:
      return "identity";
    case Kind::capped: {
      std::ostringstream os;
      os.precision(17);
      os << "capped:" << cap;
      return os.str();
    }
    case Kind::exp_saturating:
      return "exp_saturating";
  }
  return "identity";
}

PhiSpec PhiSpec::parse(const std::string& text) {
  if (text == "identity") return identity();
  if (text == "exp_saturating") return exp_saturating();
  if (text.rfind("capped:", 0) == 0) {
    try {
      std::size_t used = 0;
      const std::string rest = text.substr(7);
      const double c = std::stod(rest, &used);
      if (used == rest.size() && std::isfinite(c)) return capped(c);
    } catch (const std::exception&) {
    }
  }
  throw DomainError("unknown phi '" + text + "' (identity, capped:<c>, exp_saturating)");
}

bool phi_is_concave_nondecreasing(const PhiSpec& phi, double lo, double hi, int points) {
  if (points < 3 || !(lo < hi)) throw DomainError("phi shape check needs a proper grid");
  const double h = (hi - lo) / (points - 1);
  double prev_slope = std::numeric_limits<double>::infinity();
  for (int i = 0; i + 1 < points; ++i) {
    const double a = lo + i * h;
    const double slope = (phi(a + h) - phi(a)) / h;
    const double slack = 1e-9 * (1.0 + std::abs(slope));
    if (slope < -slack) return false;
    if (slope > prev_slope + slack) return false;
    prev_slope = slope;
  }
  return true;
}

// ------------------------------------------------------------- cost matrix

Eigen::MatrixXd l0_cost_matrix(const MetricFamily& fam, double t_prime, double t_dprime,
                               const std::vector<Point>& xs, const std::vector<Point>& ys,
                               const PhiSpec& phi, const SolverOptions& opts, int threads,
                               bool closed_form) {
  if (!(t_prime < t_dprime)) throw DomainError("cost matrix requires t' < t''");
  const auto rows = static_cast<Eigen::Index>(xs.size());
  const auto cols = static_cast<Eigen::Index>(ys.size());
  Eigen::MatrixXd cost(rows, cols);
  if (rows == 0 || cols == 0) return cost;
  const bool closed =
      closed_form && closed_form_l0(fam, t_prime, t_dprime, xs.front(), ys.front()).has_value();
  SolverOptions solver = opts;
  solver.record_curve = false;
  parallel_for(static_cast<std::size_t>(rows), threads, [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < cols; ++j) {
      double value = 0.0;
      if (closed) {
        value = *closed_form_l0(fam, t_prime, t_dprime, xs[i], ys[j]);
      } else {
        const auto g = l0_distance(fam, t_prime, t_dprime, xs[i], ys[j], solver);
        if (!g.converged) {
          std::ostringstream os;
          os << "cost entry (" << i << ", " << j << ") did not converge";
          throw SolverError(os.str());
        }
        value = g.action;
      }
      cost(r, j) = phi(value);
    }
  });
  return cost;
}

// -------------------------------------------------------------- assignment

double plan_cost(const Eigen::MatrixXd& cost, const std::vector<int>& assignment) {
  if (assignment.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    total += cost(static_cast<Eigen::Index>(i), assignment[i]);
  }
  return total / static_cast<double>(assignment.size());
}

TransportPlan optimal_assignment(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) throw DomainError("assignment needs a square cost matrix");
  if (!cost.allFinite()) throw DomainError("assignment needs finite costs");
  const int n = static_cast<int>(cost.rows());
  TransportPlan plan;
  plan.n = n;
  if (n == 0) return plan;

  // Rows are added one at a time; each addition runs Dijkstra over the
  // reduced costs c(i, j) - u(i) - v(j) to find an augmenting path.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);  // match[col] = row, 1-based
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  plan.assignment.assign(n, 0);
  for (int j = 1; j <= n; ++j) plan.assignment[match[j] - 1] = j - 1;
  plan.cost = plan_cost(cost, plan.assignment);
  return plan;
}

// --------------------------------------------------------- supermartingale

SupermartingaleReport supermartingale_test(const std::vector<CouplingPath>& paths,
                                           const SupermartingaleOptions& opts) {
  if (static_cast<int>(paths.size()) < opts.min_paths) {
    std::ostringstream os;
    os << "supermartingale test needs at least " << opts.min_paths << " paths, got "
       << paths.size();
    throw DomainError(os.str());
  }
  const auto& ref = paths.front();
  for (const auto& p : paths) {
    if (!p.complete()) throw DomainError("supermartingale test given an aborted path");
    if (!(p.schedule == ref.schedule) || p.lambda.size() != ref.lambda.size()) {
      throw DomainError("supermartingale test needs paths on one schedule");
    }
  }
  const int n = static_cast<int>(paths.size());
  const int steps = static_cast<int>(ref.lambda.size()) - 1;
  SupermartingaleReport rep;
  rep.paths = n;
  rep.steps = steps;
  if (steps < 1) return rep;

  auto increment = [&](const CouplingPath& p, int k) {
    const double d = p.lambda[k + 1] - p.lambda[k];
    return std::abs(d) <= opts.resolution * std::max(1.0, std::abs(p.lambda[k])) ? 0.0 : d;
  };

  std::vector<double> column(n), totals(n, 0.0);
  int below = 0, above = 0;
  rep.per_step.reserve(steps);
  for (int k = 0; k < steps; ++k) {
    for (int i = 0; i < n; ++i) {
      column[i] = increment(paths[i], k);
      totals[i] += column[i];
    }
    const auto ms = mean_se(column);
    StepStatistic st{ref.s[k], ms.mean, ms.se, ms.mean + kZ99 * ms.se};
    below += st.upper99 < 0.0 ? 1 : 0;
    above += st.upper99 > 0.0 ? 1 : 0;
    rep.per_step.push_back(st);
  }
  for (double& t : totals) t /= steps;
  const auto pooled = mean_se(totals);
  rep.pooled_mean = pooled.mean;
  rep.pooled_std_error = pooled.se;
  rep.upper99 = pooled.mean + kZ99 * pooled.se;
  rep.p_value = one_sided_p(pooled.mean, pooled.se, rep.z);
  rep.rejected = rep.p_value < 0.01;
  rep.fraction_upper_below_zero = static_cast<double>(below) / steps;
  rep.fraction_upper_above_zero = static_cast<double>(above) / steps;
  return rep;
}

std::vector<CouplingPath> submartingale_control(const std::vector<CouplingPath>& paths) {
  std::vector<CouplingPath> out = paths;
  for (auto& p : out) p.lambda = p.s;
  return out;
}

// ------------------------------------------------------------ monotonicity

std::pair<std::vector<std::pair<Point, Point>>, TransportPlan> optimal_pairs(
    const MetricFamily& fam, const TimeSchedule& schedule, const std::vector<Point>& xs,
    const std::vector<Point>& ys, const PhiSpec& phi, const SolverOptions& opts, int threads) {
  if (xs.size() != ys.size()) throw DomainError("point clouds must have equal size");
  const auto cost = l0_cost_matrix(fam, schedule.tau_prime(0.0), schedule.tau_dprime(0.0), xs,
                                   ys, phi, opts, threads);
  auto plan = optimal_assignment(cost);
  std::vector<std::pair<Point, Point>> pairs;
  pairs.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) pairs.emplace_back(xs[i], ys[plan.assignment[i]]);
  return {std::move(pairs), std::move(plan)};
}

MonotonicityReport monotonicity_experiment(const MetricFamily& fam, const TimeSchedule& schedule,
                                           const std::vector<std::pair<Point, Point>>& mu0_pairs,
                                           const PhiSpec& phi, std::uint64_t master_seed,
                                           const MonotonicityOptions& opts) {
  const int n = static_cast<int>(mu0_pairs.size());
  if (n < 2) throw DomainError("monotonicity experiment needs at least two pairs");
  if (opts.checkpoints < 2) throw DomainError("need at least two checkpoints");
  if (opts.bootstrap < 2) throw DomainError("need at least two bootstrap replicates");

  const int total = schedule.step_count();
  std::vector<int> ks;
  for (int j = 0; j < opts.checkpoints; ++j) {
    const int k = static_cast<int>(std::llround(static_cast<double>(j) * total / (opts.checkpoints - 1)));
    if (ks.empty() || k != ks.back()) ks.push_back(k);
  }

  CouplingOptions copts = opts.coupling;
  copts.record_positions = false;
  copts.position_steps = ks;
  const auto paths = run_ensemble(fam, schedule, mu0_pairs, master_seed, n, copts, opts.threads);

  MonotonicityReport rep;
  rep.phi = phi;
  rep.n = n;
  for (const auto& p : paths) rep.initial_plan_cost += phi(p.lambda.front());
  rep.initial_plan_cost /= n;

  // Paired bootstrap: one set of resampled path indices for all checkpoints.
  const int nb = opts.bootstrap;
  std::vector<std::vector<int>> resample(nb, std::vector<int>(n));
  for (int b = 0; b < nb; ++b) {
    RngStream stream(master_seed, (std::uint64_t{1} << 63) + static_cast<std::uint64_t>(b));
    for (int i = 0; i < n; ++i) {
      resample[b][i] = std::min(n - 1, static_cast<int>(stream.uniform() * n));
    }
  }
  auto bootstrap = [&](const Eigen::MatrixXd& cost) {
    std::vector<double> reps(nb);
    parallel_for(static_cast<std::size_t>(nb), opts.threads, [&](std::size_t b) {
      const auto& idx = resample[b];
      Eigen::MatrixXd sub(n, n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) sub(i, j) = cost(idx[i], idx[j]);
      }
      reps[b] = optimal_assignment(sub).cost;
    });
    return reps;
  };
  auto increment_se = [](const std::vector<double>& now, const std::vector<double>& before) {
    std::vector<double> diff(now.size());
    for (std::size_t b = 0; b < now.size(); ++b) diff[b] = now[b] - before[b];
    return mean_se(diff).sd;
  };
  auto in_se = [](double increment, double se, double cost) {
    const double floor = 1e-12 * (1.0 + std::abs(cost));
    return increment / std::max(se, floor);
  };

  const bool is_identity = phi.kind == PhiSpec::Kind::identity;
  std::vector<double> prev_phi;
  rep.max_increment_se = -std::numeric_limits<double>::infinity();
  rep.identity_max_increment_se = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < ks.size(); ++j) {
    const int k = ks[j];
    const double s = schedule.s_at(k);
    std::vector<Point> xs, ys;
    xs.reserve(n);
    ys.reserve(n);
    for (const auto& p : paths) {
      const auto& [x, y] = p.positions_at(k);
      xs.push_back(x);
      ys.push_back(y);
    }
    const Eigen::MatrixXd raw = l0_cost_matrix(fam, schedule.tau_prime(s), schedule.tau_dprime(s),
                                               xs, ys, PhiSpec::identity(), opts.solver, opts.threads);
    const Eigen::MatrixXd phied = is_identity ? raw : raw.unaryExpr([&](double x) { return phi(x); });

    MonotonicityRow row;
    row.s = s;
    row.step = k;
    row.identity_cost = optimal_assignment(raw).cost;
    row.cost = is_identity ? row.identity_cost : optimal_assignment(phied).cost;
    const auto reps_id = bootstrap(raw);
    const auto reps_phi = is_identity ? reps_id : bootstrap(phied);
    row.identity_std_error = mean_se(reps_id).sd;
    row.std_error = mean_se(reps_phi).sd;
    row.bound_holds = row.cost <= phi(row.identity_cost) + 1e-12 * (1.0 + std::abs(row.cost));
    if (j > 0) {
      const auto& last = rep.rows.back();
      row.increment = row.cost - last.cost;
      row.increment_std_error = increment_se(reps_phi, prev_phi);
      row.flag = row.increment > opts.tolerance_se * row.std_error;
      const double id_inc = row.identity_cost - last.identity_cost;
      row.identity_flag = id_inc > opts.tolerance_se * row.identity_std_error;
      rep.max_increment_se = std::max(rep.max_increment_se, in_se(row.increment, row.std_error, row.cost));
      rep.identity_max_increment_se = std::max(
          rep.identity_max_increment_se, in_se(id_inc, row.identity_std_error, row.identity_cost));
    } else {
      rep.bookkeeping_defect = std::abs(row.cost - rep.initial_plan_cost);
    }
    rep.violation = rep.violation || row.flag || !row.bound_holds;
    prev_phi = reps_phi;
    rep.rows.push_back(row);
  }
  if (ks.size() < 2) {
    rep.max_increment_se = 0.0;
    rep.identity_max_increment_se = 0.0;
  }
  return rep;
}

std::vector<Point> sample_cloud(const MetricFamily& fam, const Point& center, double radius, int n,
                                RngStream& rng) {
  fam.check_point(center);
  if (n < 0 || !(radius >= 0.0)) throw DomainError("sample_cloud needs n >= 0 and radius >= 0");
  const int d = fam.dim();
  std::vector<Point> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Vec w(fam.ambient_dim());
    for (Eigen::Index k = 0; k < w.size(); ++k) w[k] = rng.normal();
    w = fam.project_tangent(center.coords, w);
    const double r = radius * std::pow(rng.uniform(), 1.0 / d);
    out.push_back(exp_map(fam, 0.0, TangentVec{center, r * w / w.norm()}));
  }
  return out;
}

}  // namespace l0flow
