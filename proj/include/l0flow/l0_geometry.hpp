#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "l0flow/geometry.hpp"

namespace l0flow {

/// A discretized space-time curve t_0 < ... < t_N with the per-interval
/// difference velocities log_{x_k}(x_{k+1}) / (t_{k+1} - t_k), based at x_k.
class SpaceTimeCurve {
 public:
  static constexpr int kMinIntervals = 8;

  SpaceTimeCurve() = default;
  SpaceTimeCurve(const MetricFamily& fam, std::vector<double> times, std::vector<Point> points);

  const std::vector<double>& times() const { return times_; }
  const std::vector<Point>& points() const { return points_; }
  const std::vector<TangentVec>& velocities() const { return velocities_; }
  int intervals() const { return static_cast<int>(times_.size()) - 1; }
  double t_start() const { return times_.front(); }
  double t_end() const { return times_.back(); }

 private:
  std::vector<double> times_;
  std::vector<Point> points_;
  std::vector<TangentVec> velocities_;
};

struct SolverOptions {
  int steps = 128;          // grid intervals N
  int multi_start = 8;      // R: identity + R-1 deterministic rotations of the seed
  double tol_action = 1e-6;  // relative: ties when |dA| <= tol_action (1 + |A|)
  double tol_sep = 1e-3;     // g(t')-separation of distinct initial velocities
  double tol_residual = 1e-11;
  int max_iterations = 40;          // shooting
  int direct_max_iterations = 200;  // Stage 1
  bool direct_stage = true;
  bool record_curve = true;  // fill L0GeodesicResult::curve
  /// Seed for Stage 2; when set, Stage 1 and the multi-start are skipped.
  std::optional<Vec> warm_start;

  bool operator==(const SolverOptions&) const = default;
};

struct L0GeodesicResult {
  double t_prime = 0.0;
  double t_dprime = 0.0;
  int steps = 0;
  Point start;
  Point end;
  SpaceTimeCurve curve;
  TangentVec v0;        // gamma'(t')
  TangentVec v_end;     // gamma'(t'')
  double action = 0.0;  // L0, first-order corrected for the endpoint residual
  std::optional<double> direct_action;  // Stage 1 value when it ran
  double upper_bound = 0.0;             // action of the g(t')-geodesic interpolant
  bool multiplicity_flag = false;
  bool converged = false;
  double residual = 0.0;  // rho_{g(t'')}(gamma(t''), m'')
  int candidates = 0;     // converged multi-start candidates
};

/// 1/2 int (|gamma'|^2_{g(t)} + R_{g(t)}(gamma)) dt by composite midpoint
/// quadrature on the curve's grid.
double l0_action(const MetricFamily& fam, const SpaceTimeCurve& curve);

/// Curve sampled on N uniform intervals from the g(t')-geodesic from m' to m''
/// traversed at constant speed. Its action bounds L0 from above.
SpaceTimeCurve geodesic_interpolant(const MetricFamily& fam, double t_prime, double t_dprime,
                                    const Point& m_prime, const Point& m_dprime, int steps);

/// Classical RK4 on the L0-geodesic equation
///   nabla_{gamma'} gamma' - grad R / 2 - 2 Ric(gamma', .) = 0.
SpaceTimeCurve l0_geodesic_ivp(const MetricFamily& fam, double t_prime, double t_dprime,
                               const Point& m_prime, const TangentVec& v0, int steps);

/// Endpoint of l0_geodesic_ivp.
Point l0_exp(const MetricFamily& fam, double t_prime, double t_dprime, const Point& m_prime,
             const TangentVec& v0, int steps = 128);

/// Two-point L0-distance: direct minimization seeded by the g(t')-geodesic
/// interpolant, then shooting refinement from R seeds. Returns the minimum
/// action candidate; equal-action ties go to the lexicographically smallest
/// initial velocity. `converged` is false if no candidate met tol_residual.
L0GeodesicResult l0_distance(const MetricFamily& fam, double t_prime, double t_dprime,
                             const Point& m_prime, const Point& m_dprime,
                             const SolverOptions& opts = {});

/// (grad_{m'} L0, grad_{m''} L0) = (-gamma'(t'), gamma'(t'')).
std::pair<TangentVec, TangentVec> l0_spatial_gradients(const L0GeodesicResult& result);

/// (dL0/dt', dL0/dt'') = (1/2 (|gamma'(t')|^2 - R(m')), -1/2 (|gamma'(t'')|^2 - R(m''))).
std::pair<double, double> l0_time_partials(const MetricFamily& fam, const L0GeodesicResult& result);

struct HessianProbe {
  double lhs = 0.0;  // sum_i Hess L0 (u_i + P u_i, u_i + P u_i)
  double rhs = 0.0;  // dL0/dt' + dL0/dt''
};

/// Contracted Hessian of L0 along space-time parallel transported frames,
/// by central second differences with one Richardson step.
HessianProbe nonpos_hessian_probe(const MetricFamily& fam, double t_prime, double t_dprime,
                                  const Point& m_prime, const Point& m_dprime,
                                  const SolverOptions& opts = {}, double epsilon = 1e-3);

}  // namespace l0flow
