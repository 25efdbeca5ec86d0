#include "l0flow/geometry.hpp"

#include <sstream>

#include "l0flow/detail/coords.hpp"

namespace l0flow {

namespace {

constexpr double kTimeSlack = 1e-12;
constexpr double kUnitTol = 1e-12;

void require_same_base(const TangentVec& u, const TangentVec& v) {
  if (u.base.model != v.base.model || u.base.coords.size() != v.base.coords.size() ||
      (u.base.coords - v.base.coords).cwiseAbs().maxCoeff() > 1e-12) {
    throw DomainError("tangent vectors have different base points");
  }
}

}  // namespace

std::string_view model_name(Model m) { return m == Model::torus ? "torus" : "sphere"; }

Model parse_model(std::string_view name) {
  if (name == "torus") return Model::torus;
  if (name == "sphere") return Model::sphere;
  throw DomainError("unknown model '" + std::string(name) + "'");
}

MetricFamily MetricFamily::torus(int d, double side, double horizon) {
  if (d < 2) throw DomainError("dimension must be at least 2");
  if (d > kMaxAmbient) throw DomainError("torus dimension exceeds capacity");
  if (!(side > 0.0) || !std::isfinite(side)) throw DomainError("torus side must be positive");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("flow horizon must be positive");
  return MetricFamily(Model::torus, d, side, horizon, FlowBounds{0.0, 0.0, 0.0});
}

MetricFamily MetricFamily::sphere(int d, double horizon) {
  if (d < 2) throw DomainError("dimension must be at least 2");
  if (d + 1 > kMaxAmbient) throw DomainError("sphere dimension exceeds capacity");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("flow horizon must be positive");
  const double a_end = sphere_conformal_factor(d, horizon);
  if (!(a_end > 0.0)) {
    std::ostringstream os;
    os << "sphere horizon T=" << horizon << " must satisfy T < 1/(2(d-1)) = "
       << 1.0 / (2.0 * (d - 1));
    throw DomainError(os.str());
  }
  // Ric = (d-1)/a(t) g(t); largest at t = T. Positive curvature, so K_minus = 0.
  return MetricFamily(Model::sphere, d, 1.0, horizon, FlowBounds{0.0, (d - 1) / a_end, 0.0});
}

void MetricFamily::check_time(double t) const {
  if (!(t >= -kTimeSlack && t <= horizon_ + kTimeSlack)) {
    std::ostringstream os;
    os << "time " << t << " outside [0, " << horizon_ << "]";
    throw DomainError(os.str());
  }
}

void MetricFamily::check_point(const Point& p) const {
  if (p.model != model_) throw DomainError("point belongs to a different model");
  if (p.coords.size() != ambient_dim()) throw DomainError("point has wrong coordinate count");
  if (!p.coords.allFinite()) throw DomainError("point has non-finite coordinates");
  if (model_ == Model::sphere && std::abs(p.coords.norm() - 1.0) > kUnitTol) {
    throw DomainError("sphere point is not a unit vector");
  }
}

void MetricFamily::check_tangent(const TangentVec& v) const {
  check_point(v.base);
  if (v.components.size() != ambient_dim()) throw DomainError("tangent vector has wrong size");
  if (model_ == Model::sphere && std::abs(v.components.dot(v.base.coords)) >
                                     kUnitTol * std::max(1.0, v.components.norm())) {
    throw DomainError("vector is not tangent to the sphere");
  }
}

Point MetricFamily::make_point(const Vec& coords) const {
  if (coords.size() != ambient_dim()) {
    std::ostringstream os;
    os << model_name(model_) << " point needs " << ambient_dim() << " coordinates, got "
       << coords.size();
    throw DomainError(os.str());
  }
  if (!coords.allFinite()) throw DomainError("point has non-finite coordinates");
  if (model_ == Model::sphere) {
    const double n = coords.norm();
    if (std::abs(n - 1.0) > 1e-6) throw DomainError("sphere point must be a unit vector");
    return Point{model_, coords / n};
  }
  return Point{model_, retract(coords)};
}

TangentVec MetricFamily::make_tangent(const Point& base, const Vec& components) const {
  check_point(base);
  if (components.size() != ambient_dim()) throw DomainError("tangent vector has wrong size");
  if (model_ == Model::sphere &&
      std::abs(components.dot(base.coords)) > 1e-6 * std::max(1.0, components.norm())) {
    throw DomainError("vector is not tangent to the sphere");
  }
  return TangentVec{base, project_tangent(base.coords, components)};
}

Vec MetricFamily::christoffel(const Vec& x, const Vec& u, const Vec& w) const {
  if (model_ == Model::torus) return Vec::Zero(x.size());
  // Unit sphere in ambient coordinates: the normal part of d/dt of a tangent
  // field V along x(t) is -<V, x'> x.
  return u.dot(w) * x;
}

Vec MetricFamily::project_tangent(const Vec& x, const Vec& v) const {
  if (model_ == Model::torus) return v;
  return v - x.dot(v) * x;
}

Vec MetricFamily::retract(const Vec& x) const {
  if (model_ == Model::sphere) return x / x.norm();
  Vec out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = detail::wrap_coordinate(x[i], side_);
  return out;
}

double MetricFamily::injectivity_radius(double t) const {
  if (model_ == Model::torus) return 0.5 * side_;
  return std::sqrt(conformal_factor(t)) * M_PI;
}

double MetricFamily::scalar_curvature_at(double t, const Vec& /*x*/) const {
  if (model_ == Model::torus) return 0.0;
  return dim_ * (dim_ - 1) / conformal_factor(t);
}

Vec MetricFamily::grad_scalar_curvature_at(double /*t*/, const Vec& x) const {
  return Vec::Zero(x.size());
}

Vec MetricFamily::ricci_raised_at(double t, const Vec& /*x*/, const Vec& v) const {
  if (model_ == Model::torus) return Vec::Zero(v.size());
  // Ric = (d-1) g_std for every t; raising with g(t) = a(t) g_std divides by a.
  return ((dim_ - 1) / conformal_factor(t)) * v;
}

double metric_inner(const MetricFamily& fam, double t, const TangentVec& u, const TangentVec& v) {
  fam.check_time(t);
  require_same_base(u, v);
  return fam.conformal_factor(t) * u.components.dot(v.components);
}

double metric_norm(const MetricFamily& fam, double t, const TangentVec& v) {
  fam.check_time(t);
  return std::sqrt(fam.conformal_factor(t)) * v.components.norm();
}

double metric_time_derivative(const MetricFamily& fam, double t, const TangentVec& u,
                              const TangentVec& v) {
  fam.check_time(t);
  require_same_base(u, v);
  return fam.conformal_rate() * u.components.dot(v.components);
}

double scalar_curvature(const MetricFamily& fam, double t, const Point& p) {
  fam.check_time(t);
  return fam.scalar_curvature_at(t, p.coords);
}

TangentVec grad_scalar_curvature(const MetricFamily& fam, double t, const Point& p) {
  fam.check_time(t);
  return TangentVec{p, fam.grad_scalar_curvature_at(t, p.coords)};
}

TangentVec ricci(const MetricFamily& fam, double t, const TangentVec& v) {
  fam.check_time(t);
  return TangentVec{v.base, fam.ricci_raised_at(t, v.base.coords, v.components)};
}

double ricci_form(const MetricFamily& fam, double t, const TangentVec& u, const TangentVec& v) {
  return metric_inner(fam, t, ricci(fam, t, u), v);
}

double ricci_norm_squared(const MetricFamily& fam, double t, const Point& /*p*/) {
  fam.check_time(t);
  if (fam.model() == Model::torus) return 0.0;
  const int d = fam.dim();
  const double lambda = (d - 1) / fam.conformal_factor(t);
  return d * lambda * lambda;
}

TangentVec bianchi_defect(const MetricFamily& fam, double t, const Point& p) {
  fam.check_time(t);
  // Ric is parallel on both models and R is spatially constant.
  return TangentVec{p, Vec::Zero(fam.ambient_dim())};
}

double trace_identity_defect(const MetricFamily& fam, double t, const Point& /*p*/) {
  fam.check_time(t);
  // Ric is time independent as a (0,2)-tensor and Laplacian R = 0.
  return 0.0;
}

Point exp_map(const MetricFamily& fam, double t, const TangentVec& v) {
  fam.check_time(t);
  return Point{fam.model(), fam.retract(detail::exp_coords(fam, v.base.coords, v.components))};
}

TangentVec log_map(const MetricFamily& fam, const Point& p, const Point& q) {
  return TangentVec{p, detail::log_coords(fam, p.coords, q.coords)};
}

double dist(const MetricFamily& fam, double t, const Point& p, const Point& q) {
  fam.check_time(t);
  return std::sqrt(fam.conformal_factor(t)) * detail::ref_dist(fam, p.coords, q.coords);
}

Mat orthonormal_frame(const MetricFamily& fam, double t, const Point& p) {
  fam.check_time(t);
  const int n = fam.ambient_dim();
  const int d = fam.dim();
  const double scale = 1.0 / std::sqrt(fam.conformal_factor(t));
  Mat frame(n, d);
  int found = 0;
  for (int i = 0; i < n && found < d; ++i) {
    Vec e = Vec::Zero(n);
    e[i] = 1.0;
    Vec u = fam.project_tangent(p.coords, e);
    for (int j = 0; j < found; ++j) u -= frame.col(j).dot(u) * frame.col(j);
    const double un = u.norm();
    if (un < 1e-6) continue;
    frame.col(found++) = u / un;
  }
  if (found != d) throw SolverError("frame construction degenerated");
  return frame * scale;
}

Point midpoint(const MetricFamily& fam, const Point& p, const Point& q) {
  const Vec half = 0.5 * detail::log_coords(fam, p.coords, q.coords);
  return Point{fam.model(), fam.retract(detail::exp_coords(fam, p.coords, half))};
}

}  // namespace l0flow
