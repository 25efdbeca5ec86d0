#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "l0flow/coupling.hpp"

namespace l0flow {

/// Concave non-decreasing cost transforms.
struct PhiSpec {
  enum class Kind { identity, capped, exp_saturating };
  Kind kind = Kind::identity;
  double cap = 0.0;  // capped only

  static PhiSpec identity() { return {}; }
  static PhiSpec capped(double c) { return {Kind::capped, c}; }
  static PhiSpec exp_saturating() { return {Kind::exp_saturating, 0.0}; }

  double operator()(double x) const;
  std::string to_string() const;  // "identity", "capped:<c>", "exp_saturating"
  static PhiSpec parse(const std::string& text);

  bool operator==(const PhiSpec&) const = default;
};

/// Finite-difference slopes on a uniform grid over [lo, hi] are >= 0 and
/// non-increasing (up to round-off).
bool phi_is_concave_nondecreasing(const PhiSpec& phi, double lo, double hi, int points = 1001);

/// phi(L0^{t',t''}(x_i, y_j)); closed form when the model has one (and
/// `closed_form` allows it), the generic solver otherwise. Rows are computed
/// on `threads` workers.
Eigen::MatrixXd l0_cost_matrix(const MetricFamily& fam, double t_prime, double t_dprime,
                               const std::vector<Point>& xs, const std::vector<Point>& ys,
                               const PhiSpec& phi = {}, const SolverOptions& opts = {},
                               int threads = 1, bool closed_form = true);

/// Uniform empirical measures: the optimal coupling is a permutation.
struct TransportPlan {
  int n = 0;
  std::vector<int> assignment;  // row i is matched to column assignment[i]
  double cost = 0.0;            // mean matched cost
};

/// Mean of cost(i, assignment[i]).
double plan_cost(const Eigen::MatrixXd& cost, const std::vector<int>& assignment);

/// Exact minimum-cost perfect matching (shortest augmenting paths with
/// potentials, O(n^3)).
TransportPlan optimal_assignment(const Eigen::MatrixXd& cost);

// ------------------------------------------------------- supermartingale

struct StepStatistic {
  double s = 0.0;
  double mean = 0.0;  // of Lambda_{k+1} - Lambda_k across paths
  double std_error = 0.0;
  double upper99 = 0.0;  // one-sided
};

struct SupermartingaleReport {
  int paths = 0;
  int steps = 0;
  std::vector<StepStatistic> per_step;
  // Pooled over all steps, with the per-path total as the sampling unit.
  double pooled_mean = 0.0;
  double pooled_std_error = 0.0;
  double z = 0.0;
  double p_value = 1.0;  // one-sided, H0: E[dLambda] <= 0
  double upper99 = 0.0;
  bool rejected = false;  // p_value < 0.01
  double fraction_upper_below_zero = 0.0;
  double fraction_upper_above_zero = 0.0;
};

struct SupermartingaleOptions {
  int min_paths = 100;
  /// Increments below this size are solver round-off and count as zero.
  double resolution = 1e-9;
};

SupermartingaleReport supermartingale_test(const std::vector<CouplingPath>& paths,
                                           const SupermartingaleOptions& opts = {});

/// Copies of `paths` with Lambda replaced by s: a strict submartingale that
/// the test must reject.
std::vector<CouplingPath> submartingale_control(const std::vector<CouplingPath>& paths);

// ---------------------------------------------------------- monotonicity

/// Pairs (x_i, y_{plan(i)}) of an optimal plan between two point clouds at
/// the schedule's start times.
std::pair<std::vector<std::pair<Point, Point>>, TransportPlan> optimal_pairs(
    const MetricFamily& fam, const TimeSchedule& schedule, const std::vector<Point>& xs,
    const std::vector<Point>& ys, const PhiSpec& phi, const SolverOptions& opts = {},
    int threads = 1);

/// n points at reference distance radius * U^(1/d) from `center` in a
/// uniform tangent direction (uniform on a flat ball).
std::vector<Point> sample_cloud(const MetricFamily& fam, const Point& center, double radius, int n,
                                RngStream& rng);

struct MonotonicityOptions {
  int checkpoints = 10;
  int bootstrap = 50;
  double tolerance_se = 2.0;  // allowed positive increment in standard errors
  CouplingOptions coupling;
  SolverOptions solver;  // cost matrices without a closed form
  int threads = 1;
};

struct MonotonicityRow {
  double s = 0.0;
  int step = 0;
  double cost = 0.0;    // C_phi between the empirical marginals
  double std_error = 0.0;  // bootstrap
  double increment = 0.0;         // cost - previous cost
  double increment_std_error = 0.0;  // paired bootstrap
  bool flag = false;              // increment > tolerance_se * std_error
  double identity_cost = 0.0;
  double identity_std_error = 0.0;
  bool identity_flag = false;
  bool bound_holds = true;  // cost <= phi(identity_cost)
};

struct MonotonicityReport {
  PhiSpec phi;
  int n = 0;
  std::vector<MonotonicityRow> rows;
  double max_increment_se = 0.0;  // largest (cost - previous) / std_error
  double identity_max_increment_se = 0.0;
  bool violation = false;  // any phi flag or bound failure
  double initial_plan_cost = 0.0;  // mean phi(Lambda_0) over the input pairs
  double bookkeeping_defect = 0.0;  // |cost(0) - initial_plan_cost|
};

MonotonicityReport monotonicity_experiment(const MetricFamily& fam, const TimeSchedule& schedule,
                                           const std::vector<std::pair<Point, Point>>& mu0_pairs,
                                           const PhiSpec& phi, std::uint64_t master_seed,
                                           const MonotonicityOptions& opts = {});

}  // namespace l0flow
