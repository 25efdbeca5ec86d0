#pragma once

#include <cmath>
#include <optional>

#include "l0flow/geometry.hpp"

namespace l0flow {

/// Parameters naming one of the model flows.
struct FlowSpec {
  Model model = Model::torus;
  int d = 2;
  double side = 1.0;  // torus only
  double horizon = 1.0;

  bool operator==(const FlowSpec&) const = default;
};

MetricFamily make_flow(const FlowSpec& spec);

/// A = int_{t'}^{t''} dt / a(t) for the shrinking sphere, the time change
/// that reduces the L0 problem to a fixed-metric energy problem.
template <typename Scalar>
Scalar sphere_time_integral(int d, Scalar t_prime, Scalar t_dprime) {
  using std::log;
  const Scalar k = Scalar(2 * (d - 1));
  return log(sphere_conformal_factor(d, t_prime) / sphere_conformal_factor(d, t_dprime)) / k;
}

/// Closed-form L0 on the sphere as a function of the g_std angle between
/// the endpoints: angle^2 / (2A) + d(d-1) A / 2.
template <typename Scalar>
Scalar sphere_l0_from_angle(int d, Scalar t_prime, Scalar t_dprime, Scalar angle) {
  const Scalar a_int = sphere_time_integral(d, t_prime, t_dprime);
  return angle * angle / (Scalar(2) * a_int) + Scalar(d * (d - 1)) * a_int / Scalar(2);
}

struct SphereL0Oracle {
  int d = 2;
  double t_prime = 0.0;
  double t_dprime = 0.0;
  double a_integral = 0.0;

  static SphereL0Oracle make(int d, double t_prime, double t_dprime);
  double operator()(double angle) const {
    return angle * angle / (2.0 * a_integral) + d * (d - 1) * a_integral / 2.0;
  }
};

/// rho(p, q)^2 / (2 (t'' - t')) with the min-image flat distance.
double torus_l0_distance(double side, int d, double t_prime, double t_dprime, const Point& p,
                         const Point& q);

struct SphereL0Value {
  double value = 0.0;
  /// p and q are antipodal: the minimizer is not unique.
  bool multiple_minimizers = false;
};

SphereL0Value sphere_l0_distance(int d, double t_prime, double t_dprime, const Point& p,
                                 const Point& q);

/// Closed-form L0 for the family's model, when one is known.
std::optional<double> closed_form_l0(const MetricFamily& fam, double t_prime, double t_dprime,
                                     const Point& p, const Point& q);

}  // namespace l0flow
