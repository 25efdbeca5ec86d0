#pragma once

// Coordinate-level kernels shared by the public geometry functions and the
// solver inner loops. Everything here is in the reference metric (flat or
// g_std); callers scale by the conformal factor.

#include <algorithm>
#include <cmath>

#include "l0flow/geometry.hpp"

namespace l0flow::detail {

inline double wrap_coordinate(double x, double side) {
  double r = std::fmod(x, side);
  if (r < 0.0) r += side;
  if (r >= side) r = 0.0;
  return r;
}

inline double min_image(double delta, double side) {
  return delta - side * std::round(delta / side);
}

/// Reference exponential map; no wrap or normalization.
inline Vec exp_coords(const MetricFamily& fam, const Vec& x, const Vec& v) {
  if (fam.model() == Model::torus) return x + v;
  const double n = v.norm();
  if (n < 1e-300) return x;
  return std::cos(n) * x + (std::sin(n) / n) * v;
}

/// Reference log map. At an antipodal pair the returned direction is the
/// first ambient basis vector with a nonzero tangential component.
inline Vec log_coords(const MetricFamily& fam, const Vec& x, const Vec& y) {
  if (fam.model() == Model::torus) {
    Vec out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = min_image(y[i] - x[i], fam.side());
    return out;
  }
  const double c = x.dot(y);
  Vec w = y - c * x;
  const double s = w.norm();
  const double theta = std::atan2(s, c);
  if (s > 1e-300 && (s > 1e-14 || c > 0.0)) return (theta / s) * w;
  if (c > 0.0) return Vec::Zero(x.size());
  // Antipodal: pick a deterministic tangent direction.
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec e = Vec::Zero(x.size());
    e[i] = 1.0;
    Vec t = e - x.dot(e) * x;
    const double tn = t.norm();
    if (tn > 1e-6) return (M_PI / tn) * t;
  }
  return Vec::Zero(x.size());
}

/// Reference distance.
inline double ref_dist(const MetricFamily& fam, const Vec& x, const Vec& y) {
  if (fam.model() == Model::torus) return log_coords(fam, x, y).norm();
  const double c = x.dot(y);
  const double s = (y - c * x).norm();
  return std::atan2(s, c);
}

}  // namespace l0flow::detail
