#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "l0flow/l0_geometry.hpp"

namespace l0flow {

/// Reversed time s in [0, S]: tau'(s) = t1' - s, tau''(s) = t1'' - s, walked
/// on the grid s_n = min(n eps^2, S).
struct TimeSchedule {
  double t1_prime = 0.0;
  double t1_dprime = 0.0;
  double horizon = 0.0;  // S
  double epsilon = 0.0;

  /// Validates against the flow's time interval and a cap on the step count.
  static TimeSchedule make(const MetricFamily& fam, double t1_prime, double t1_dprime,
                           double horizon, double epsilon, long max_steps = 10'000'000);

  int step_count() const;  // ceil(S / eps^2), 0 when S = 0
  double s_at(int n) const;
  double tau_prime(double s) const { return t1_prime - s; }
  double tau_dprime(double s) const { return t1_dprime - s; }

  bool operator==(const TimeSchedule&) const = default;
};

/// Random stream for one trajectory. The engine is seeded from
/// (master_seed, stream_id) only, so results do not depend on scheduling.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Uniform on the closed unit d-ball: Gaussian direction, radius U^(1/d).
Eigen::VectorXd sample_ball(RngStream& stream, int d);

struct CouplingOptions {
  /// Per-step geodesic solves. The windows are short (t'' - t' fixed), so a
  /// coarser grid than the stand-alone default is accurate to round-off.
  SolverOptions solver = [] {
    SolverOptions o;
    o.steps = 32;
    o.record_curve = false;
    return o;
  }();
  /// Beyond this fraction of the injectivity radius a step runs the full
  /// multi-start solve instead of trusting the warm start.
  double cut_fraction = 0.5;
  /// Fixed d x d rotation applied to the frame sigma; identity when unset.
  std::optional<Eigen::MatrixXd> frame_rotation;
  /// Keep X, Y at every grid time. Otherwise only at `position_steps` and
  /// the final step.
  bool record_positions = true;
  std::vector<int> position_steps;
};

struct StepDiagnostics {
  double lambda = 0.0;  // L0 at the start of the step
  bool multiplicity_hit = false;
  double residual = 0.0;
  bool full_solve = false;  // multi-start solve rather than warm start
  double x_displacement = 0.0;  // |v'|_{g(tau'(s_n))}
  double y_displacement = 0.0;  // |v''|_{g(tau''(s_n))}
};

struct CouplingStep {
  Point x;
  Point y;
  TangentVec v_prime;
  TangentVec v_dprime;
  StepDiagnostics diagnostics;
};

/// Carries the previous solve between steps.
struct CouplingWorkspace {
  std::optional<Vec> warm_velocity;
  bool last_full = false;  // the last solve ran the multi-start path
};

/// Minimizing L0-geodesic from (tau'(s), X) to (tau''(s), Y), warm started
/// from the workspace when the pair is well inside the injectivity radius.
/// Throws SolverError if neither the warm nor the full solve converges.
L0GeodesicResult solve_coupling_pair(const MetricFamily& fam, const TimeSchedule& schedule,
                                     double s, const Point& x, const Point& y,
                                     const CouplingOptions& opts, CouplingWorkspace* ws = nullptr);

/// One step n -> n + 1 of the coupled walk driven by `ball` (in the unit ball).
CouplingStep coupling_step(const MetricFamily& fam, const TimeSchedule& schedule, int n,
                           const Point& x, const Point& y, const Eigen::VectorXd& ball,
                           const CouplingOptions& opts = {}, CouplingWorkspace* ws = nullptr);

struct CouplingPath {
  TimeSchedule schedule;
  std::uint64_t stream_id = 0;
  std::vector<double> s;       // grid times actually reached
  std::vector<double> lambda;  // Lambda_k
  std::vector<std::uint8_t> multiplicity_hit;
  std::vector<int> position_index;  // grid indices with stored positions
  std::vector<Point> x;
  std::vector<Point> y;
  int multiplicity_hits = 0;
  int full_solves = 0;
  std::optional<std::string> failure;  // set when the walk aborted

  bool complete() const { return !failure; }
  /// Stored (X, Y) at grid index k; throws if k was not recorded.
  std::pair<const Point&, const Point&> positions_at(int k) const;
};

CouplingPath run_coupling(const MetricFamily& fam, const TimeSchedule& schedule,
                          const Point& m_prime, const Point& m_dprime, RngStream stream,
                          const CouplingOptions& opts = {});

/// Independent trajectories, stream_id = index. `initial_pairs` holds one
/// pair for all paths or one pair per path. Throws SolverError listing the
/// aborted stream ids if any trajectory failed.
std::vector<CouplingPath> run_ensemble(const MetricFamily& fam, const TimeSchedule& schedule,
                                       const std::vector<std::pair<Point, Point>>& initial_pairs,
                                       std::uint64_t master_seed, int n_paths,
                                       const CouplingOptions& opts = {}, int threads = 1);

}  // namespace l0flow
