#pragma once

#include <cmath>
#include <string_view>

#include "l0flow/types.hpp"

namespace l0flow {

enum class Model { torus, sphere };

std::string_view model_name(Model m);
Model parse_model(std::string_view name);

/// A location on a model manifold. Torus: d coordinates in [0, L).
/// Sphere: a unit vector in R^{d+1}.
struct Point {
  Model model = Model::torus;
  Vec coords;
};

/// A tangent vector in the same coordinate representation as its base point.
struct TangentVec {
  Point base;
  Vec components;
};

/// Bounds of the flow on the working region: -K_minus g <= Ric <= K_plus g,
/// |grad R|^2 <= c.
struct FlowBounds {
  double k_minus = 0.0;
  double k_plus = 0.0;
  double c = 0.0;
};

/// Conformal factor a(t) = 1 - 2(d-1)t of the shrinking round sphere.
template <typename Scalar>
Scalar sphere_conformal_factor(int d, Scalar t) {
  return Scalar(1) - Scalar(2 * (d - 1)) * t;
}

/// A Ricci flow g(t), t in [0, T], with closed-form curvature.
///
/// Torus: the static flat metric on (R / L Z)^d.
/// Sphere: g(t) = a(t) g_std on the unit sphere S^d in R^{d+1}.
///
/// Immutable after construction.
class MetricFamily {
 public:
  static MetricFamily torus(int d, double side, double horizon);
  static MetricFamily sphere(int d, double horizon);

  Model model() const { return model_; }
  int dim() const { return dim_; }
  int ambient_dim() const { return model_ == Model::sphere ? dim_ + 1 : dim_; }
  double side() const { return side_; }
  double horizon() const { return horizon_; }
  const FlowBounds& bounds() const { return bounds_; }

  /// g(t) = conformal_factor(t) * g_ref, where g_ref is flat or g_std.
  double conformal_factor(double t) const {
    return model_ == Model::sphere ? sphere_conformal_factor(dim_, t) : 1.0;
  }
  double conformal_rate() const {
    return model_ == Model::sphere ? -2.0 * (dim_ - 1) : 0.0;
  }

  /// Throws DomainError unless t is in [0, T].
  void check_time(double t) const;
  void check_point(const Point& p) const;
  void check_tangent(const TangentVec& v) const;

  /// Validated point from raw coordinates (torus coordinates are wrapped).
  Point make_point(const Vec& coords) const;
  TangentVec make_tangent(const Point& base, const Vec& components) const;

  /// Christoffel contraction Gamma(u, w) of the reference connection, in
  /// ambient coordinates at x (the Levi-Civita connection of g(t) does not
  /// depend on t for either model).
  Vec christoffel(const Vec& x, const Vec& u, const Vec& w) const;
  /// Orthogonal projection onto T_x M (identity on the torus).
  Vec project_tangent(const Vec& x, const Vec& v) const;
  /// Back onto the manifold: normalization on the sphere, wrap on the torus.
  Vec retract(const Vec& x) const;

  /// Radius below which exp_map is injective for g(t).
  double injectivity_radius(double t) const;

  // Unchecked coordinate kernels for solver inner loops.
  double scalar_curvature_at(double t, const Vec& x) const;
  Vec grad_scalar_curvature_at(double t, const Vec& x) const;
  Vec ricci_raised_at(double t, const Vec& x, const Vec& v) const;

 private:
  MetricFamily(Model model, int d, double side, double horizon, FlowBounds bounds)
      : model_(model), dim_(d), side_(side), horizon_(horizon), bounds_(bounds) {}

  Model model_;
  int dim_;
  double side_;
  double horizon_;
  FlowBounds bounds_;
};

double metric_inner(const MetricFamily& fam, double t, const TangentVec& u, const TangentVec& v);
double metric_norm(const MetricFamily& fam, double t, const TangentVec& v);

/// (dg/dt)(u, v). Closed form; equals -2 Ric(u, v) along the flow.
double metric_time_derivative(const MetricFamily& fam, double t, const TangentVec& u,
                              const TangentVec& v);

double scalar_curvature(const MetricFamily& fam, double t, const Point& p);
TangentVec grad_scalar_curvature(const MetricFamily& fam, double t, const Point& p);

/// Ric_{g(t)}(v, .) raised with g(t).
TangentVec ricci(const MetricFamily& fam, double t, const TangentVec& v);
/// The bilinear form Ric_{g(t)}(u, v).
double ricci_form(const MetricFamily& fam, double t, const TangentVec& u, const TangentVec& v);

/// |Ric_{g(t)}|^2_{g(t)}; enters dR/dt = Laplacian R + 2|Ric|^2.
double ricci_norm_squared(const MetricFamily& fam, double t, const Point& p);

/// Contracted Bianchi defect tr(nabla Ric) - grad R / 2 and the trace
/// identity defect tr(dRic/dt) - Laplacian R. Both vanish on the models.
TangentVec bianchi_defect(const MetricFamily& fam, double t, const Point& p);
double trace_identity_defect(const MetricFamily& fam, double t, const Point& p);

/// g(t)-exponential map. Result is re-projected onto the manifold.
Point exp_map(const MetricFamily& fam, double t, const TangentVec& v);
/// Inverse of exp_map within the injectivity radius. At the sphere cut point
/// (antipode) the first frame direction is returned.
TangentVec log_map(const MetricFamily& fam, const Point& p, const Point& q);

/// Riemannian distance rho_{g(t)}(p, q).
double dist(const MetricFamily& fam, double t, const Point& p, const Point& q);

/// Deterministic g(t)-orthonormal frame of T_p M as ambient columns:
/// Gram-Schmidt of the ambient basis projected to the tangent space, fixed
/// index order, skipping directions whose residual is below 1e-6.
Mat orthonormal_frame(const MetricFamily& fam, double t, const Point& p);

/// g(t)-geodesic midpoint of p and q (midpoint of the reference geodesic).
Point midpoint(const MetricFamily& fam, const Point& p, const Point& q);

}  // namespace l0flow
