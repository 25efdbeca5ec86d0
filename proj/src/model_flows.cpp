#include "l0flow/model_flows.hpp"

#include "l0flow/detail/coords.hpp"

namespace l0flow {

namespace {

constexpr double kAntipodalTol = 1e-9;

void check_window(double t_prime, double t_dprime) {
  if (!(t_prime < t_dprime)) throw DomainError("time window requires t' < t''");
  if (!(t_prime >= 0.0)) throw DomainError("time window starts before 0");
}

}  // namespace

MetricFamily make_flow(const FlowSpec& spec) {
  switch (spec.model) {
    case Model::torus:
      return MetricFamily::torus(spec.d, spec.side, spec.horizon);
    case Model::sphere:
      return MetricFamily::sphere(spec.d, spec.horizon);
  }
  throw DomainError("unknown model");
}

SphereL0Oracle SphereL0Oracle::make(int d, double t_prime, double t_dprime) {
  check_window(t_prime, t_dprime);
  if (!(sphere_conformal_factor(d, t_dprime) > 0.0)) {
    throw DomainError("sphere window extends past the extinction time");
  }
  return SphereL0Oracle{d, t_prime, t_dprime, sphere_time_integral(d, t_prime, t_dprime)};
}

double torus_l0_distance(double side, int d, double t_prime, double t_dprime, const Point& p,
                         const Point& q) {
  check_window(t_prime, t_dprime);
  if (p.coords.size() != d || q.coords.size() != d) throw DomainError("torus point size mismatch");
  double rho2 = 0.0;
  for (int i = 0; i < d; ++i) {
    const double delta = detail::min_image(q.coords[i] - p.coords[i], side);
    rho2 += delta * delta;
  }
  return rho2 / (2.0 * (t_dprime - t_prime));
}

SphereL0Value sphere_l0_distance(int d, double t_prime, double t_dprime, const Point& p,
                                 const Point& q) {
  const auto oracle = SphereL0Oracle::make(d, t_prime, t_dprime);
  if (p.coords.size() != d + 1 || q.coords.size() != d + 1) {
    throw DomainError("sphere point size mismatch");
  }
  const double c = p.coords.dot(q.coords);
  const double s = (q.coords - c * p.coords).norm();
  const double angle = std::atan2(s, c);
  return SphereL0Value{oracle(angle), M_PI - angle < kAntipodalTol};
}

std::optional<double> closed_form_l0(const MetricFamily& fam, double t_prime, double t_dprime,
                                     const Point& p, const Point& q) {
  fam.check_time(t_prime);
  fam.check_time(t_dprime);
  if (fam.model() == Model::torus) {
    return torus_l0_distance(fam.side(), fam.dim(), t_prime, t_dprime, p, q);
  }
  return sphere_l0_distance(fam.dim(), t_prime, t_dprime, p, q).value;
}

}  // namespace l0flow
