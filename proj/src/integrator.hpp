#pragma once

// Fixed-step RK4 for the L0-geodesic equation in ambient coordinates, with
// optional space-time parallel transport of up to kMaxAmbient vectors along
// the same curve. Private to the library.

#include <vector>

#include "l0flow/geometry.hpp"

namespace l0flow::detail {

struct GeodesicEnd {
  Vec x;
  Vec w;
  double action = 0.0;  // 1/2 int (|w|^2_{g(t)} + R) dt, integrated alongside
};

/// Integrates from (t0, x0, w0) to t1 with `steps` uniform RK4 steps.
/// `transported`, when non-null, holds ambient columns at x0 that are
/// carried by nabla_{gamma'} V = Ric(V, .)^# and overwritten with V(t1).
/// `trace`, when non-null, receives the N+1 positions (unwrapped), and
/// `trace_transported` the transported columns at every grid time.
GeodesicEnd integrate_l0_geodesic(const MetricFamily& fam, double t0, double t1, const Vec& x0,
                                  const Vec& w0, int steps, Mat* transported = nullptr,
                                  std::vector<Vec>* trace = nullptr,
                                  std::vector<Mat>* trace_transported = nullptr);

}  // namespace l0flow::detail
