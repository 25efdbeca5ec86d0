#pragma once

#include <vector>

#include "l0flow/l0_geometry.hpp"

namespace l0flow {

/// Space-time parallel transport P : (T_{m'}M, g(t')) -> (T_{m''}M, g(t''))
/// in the deterministic orthonormal frames at both ends.
struct TransportMap {
  double t_prime = 0.0;
  Point source;
  double t_dprime = 0.0;
  Point target;
  Eigen::MatrixXd matrix;  // d x d, column j = coefficients of P u_j
};

/// V(t'') for nabla_{gamma'} V = Ric(V, .)^#, V(t') = v, along the solved
/// minimizer.
TangentVec spacetime_transport(const MetricFamily& fam, const L0GeodesicResult& geodesic,
                               const TangentVec& v);

/// Transports every ambient column of `vectors` (tangent at m') in one pass.
Mat spacetime_transport_columns(const MetricFamily& fam, const L0GeodesicResult& geodesic,
                                const Mat& vectors);

/// V(t) at every grid time of the geodesic.
std::vector<TangentVec> spacetime_transport_path(const MetricFamily& fam,
                                                 const L0GeodesicResult& geodesic,
                                                 const TangentVec& v);

TransportMap transport_matrix(const MetricFamily& fam, const L0GeodesicResult& geodesic);

}  // namespace l0flow
