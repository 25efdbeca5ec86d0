#include "integrator.hpp"

namespace l0flow::detail {

namespace {

struct Deriv {
  Vec dx;
  Vec dw;
  double da;
  Mat dv;
};

// x' = w
// w' = -Gamma(w, w) + grad R / 2 + 2 Ric(w)^#
// V' = -Gamma(w, V) + Ric(V)^#
// A' = (a(t)|w|^2 + R) / 2
void rhs(const MetricFamily& fam, double t, const Vec& x, const Vec& w, const Mat* v, Deriv& out) {
  out.dx = w;
  out.dw = -fam.christoffel(x, w, w) + 0.5 * fam.grad_scalar_curvature_at(t, x) +
           2.0 * fam.ricci_raised_at(t, x, w);
  out.da = 0.5 * (fam.conformal_factor(t) * w.squaredNorm() + fam.scalar_curvature_at(t, x));
  if (v != nullptr) {
    out.dv.resize(v->rows(), v->cols());
    for (Eigen::Index j = 0; j < v->cols(); ++j) {
      const Vec vj = v->col(j);
      out.dv.col(j) = -fam.christoffel(x, w, vj) + fam.ricci_raised_at(t, x, vj);
    }
  }
}

void project(const MetricFamily& fam, Vec& x, Vec& w, Mat* v) {
  if (fam.model() != Model::sphere) return;
  x /= x.norm();
  w -= x.dot(w) * x;
  if (v != nullptr) {
    for (Eigen::Index j = 0; j < v->cols(); ++j) v->col(j) -= x.dot(v->col(j)) * x;
  }
}

}  // namespace

GeodesicEnd integrate_l0_geodesic(const MetricFamily& fam, double t0, double t1, const Vec& x0,
                                  const Vec& w0, int steps, Mat* transported,
                                  std::vector<Vec>* trace, std::vector<Mat>* trace_transported) {
  const double h = (t1 - t0) / steps;
  Vec x = x0;
  Vec w = w0;
  double action = 0.0;
  Mat v;
  Mat* vp = nullptr;
  if (transported != nullptr) {
    v = *transported;
    vp = &v;
  }
  if (trace != nullptr) {
    trace->clear();
    trace->reserve(steps + 1);
    trace->push_back(x);
  }
  if (trace_transported != nullptr) {
    trace_transported->clear();
    trace_transported->reserve(steps + 1);
    trace_transported->push_back(v);
  }

  Deriv k1, k2, k3, k4;
  Vec xs, ws;
  Mat vs;
  for (int n = 0; n < steps; ++n) {
    const double t = t0 + n * h;
    rhs(fam, t, x, w, vp, k1);

    xs = x + 0.5 * h * k1.dx;
    ws = w + 0.5 * h * k1.dw;
    if (vp) vs = v + 0.5 * h * k1.dv;
    rhs(fam, t + 0.5 * h, xs, ws, vp ? &vs : nullptr, k2);

    xs = x + 0.5 * h * k2.dx;
    ws = w + 0.5 * h * k2.dw;
    if (vp) vs = v + 0.5 * h * k2.dv;
    rhs(fam, t + 0.5 * h, xs, ws, vp ? &vs : nullptr, k3);

    xs = x + h * k3.dx;
    ws = w + h * k3.dw;
    if (vp) vs = v + h * k3.dv;
    rhs(fam, t + h, xs, ws, vp ? &vs : nullptr, k4);

    x += (h / 6.0) * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
    w += (h / 6.0) * (k1.dw + 2.0 * k2.dw + 2.0 * k3.dw + k4.dw);
    action += (h / 6.0) * (k1.da + 2.0 * k2.da + 2.0 * k3.da + k4.da);
    if (vp) v += (h / 6.0) * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
    project(fam, x, w, vp);

    if (trace != nullptr) trace->push_back(x);
    if (trace_transported != nullptr) trace_transported->push_back(v);
  }
  if (transported != nullptr) *transported = v;
  return GeodesicEnd{x, w, action};
}

}  // namespace l0flow::detail
