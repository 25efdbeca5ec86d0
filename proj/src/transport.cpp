#include "l0flow/transport.hpp"

#include <cmath>

#include "integrator.hpp"

namespace l0flow {

namespace {

void require_solved(const L0GeodesicResult& geodesic) {
  if (!geodesic.converged) throw SolverError("transport along an unconverged geodesic");
  if (geodesic.steps < SpaceTimeCurve::kMinIntervals) throw DomainError("geodesic has no grid");
}

void require_at_start(const MetricFamily& fam, const L0GeodesicResult& geodesic,
                      const TangentVec& v) {
  fam.check_tangent(v);
  if ((v.base.coords - geodesic.start.coords).cwiseAbs().maxCoeff() > 1e-12) {
    throw DomainError("vector is not based at the geodesic start");
  }
}

}  // namespace

Mat spacetime_transport_columns(const MetricFamily& fam, const L0GeodesicResult& geodesic,
                                const Mat& vectors) {
  require_solved(geodesic);
  Mat v = vectors;
  detail::integrate_l0_geodesic(fam, geodesic.t_prime, geodesic.t_dprime, geodesic.start.coords,
                                geodesic.v0.components, geodesic.steps, &v);
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    v.col(j) = fam.project_tangent(geodesic.end.coords, v.col(j));
  }
  return v;
}

TangentVec spacetime_transport(const MetricFamily& fam, const L0GeodesicResult& geodesic,
                               const TangentVec& v) {
  require_at_start(fam, geodesic, v);
  Mat column = v.components;
  return TangentVec{geodesic.end, spacetime_transport_columns(fam, geodesic, column).col(0)};
}

std::vector<TangentVec> spacetime_transport_path(const MetricFamily& fam,
                                                 const L0GeodesicResult& geodesic,
                                                 const TangentVec& v) {
  require_at_start(fam, geodesic, v);
  require_solved(geodesic);
  Mat column = v.components;
  std::vector<Vec> trace;
  std::vector<Mat> carried;
  detail::integrate_l0_geodesic(fam, geodesic.t_prime, geodesic.t_dprime, geodesic.start.coords,
                                geodesic.v0.components, geodesic.steps, &column, &trace,
                                &carried);
  std::vector<TangentVec> out;
  out.reserve(trace.size());
  for (std::size_t k = 0; k < trace.size(); ++k) {
    Point p{fam.model(), fam.retract(trace[k])};
    out.push_back(TangentVec{p, fam.project_tangent(p.coords, carried[k].col(0))});
  }
  return out;
}

TransportMap transport_matrix(const MetricFamily& fam, const L0GeodesicResult& geodesic) {
  require_solved(geodesic);
  const Mat source = orthonormal_frame(fam, geodesic.t_prime, geodesic.start);
  const Mat target = orthonormal_frame(fam, geodesic.t_dprime, geodesic.end);
  const Mat moved = spacetime_transport_columns(fam, geodesic, source);
  // Coefficients in the g(t'')-orthonormal target frame: <P u_j, f_i>_{g(t'')}.
  const double a_end = fam.conformal_factor(geodesic.t_dprime);
  TransportMap map;
  map.t_prime = geodesic.t_prime;
  map.source = geodesic.start;
  map.t_dprime = geodesic.t_dprime;
  map.target = geodesic.end;
  map.matrix = a_end * (target.transpose() * moved);
  return map;
}

}  // namespace l0flow
