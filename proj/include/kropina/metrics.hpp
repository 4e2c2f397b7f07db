#pragma once

#include <functional>

#include "kropina/manifold.hpp"

namespace kropina {

// Point-vector pair with the two cached scalars every metric formula needs.
struct PointVector {
  Vec x, v;
  double omega_v = 0.0;  // omega_x(v)
  double g0_vv = 0.0;    // g0_x(v, v)

  static PointVector at(const ManifoldModel& model, Vec x, Vec v);
  bool admissible(double tol = kTolAdmissible) const { return -omega_v > tol; }
};

// K(v) = -g0(v,v) / (2 omega(v)), positive on the admissible cone.
// Throws InadmissibleVector outside it.
double kropina_value(const ManifoldModel& model, const PointVector& pv);

// Hessian of K^2/2 at v (closed form). Symmetric positive definite on the
// admissible cone, with g_v(v,v) = K(v)^2.
Mat fundamental_tensor(const ManifoldModel& model, const PointVector& pv);

enum class RandersFamily {
  // F_eps = ( sqrt(eps g0(v,v) + omega(v)^2) + omega(v) ) / eps
  Stationary,
  // F_eps = ( sqrt(eps g0(v,v) + (1-eps) omega(v)^2) + sqrt(1-eps) omega(v) ) / eps
  KatokZermelo,
};

// Randers approximation value; defined on all of TS for eps in (0,1].
double randers_value(const ManifoldModel& model, double eps, const PointVector& pv,
                     RandersFamily family = RandersFamily::Stationary);

// Randers norm from general Zermelo data (h, W) with h(W,W) < 1, pointwise:
// the unique F > 0 solving h(v/F - W, v/F - W) = 1.
double zermelo_randers_value(const Mat& h, const Vec& wind, const Vec& v);

// Critical-wind navigation data. The wind field must satisfy g0(W,W) = 1.
struct ZermeloData {
  std::function<Vec(const Vec&)> wind;
};

// Builds the Kropina evaluation context of critical-wind Zermelo data: the
// model sharing g0 with `base` whose one-form is omega = g0(W, .). The wind
// norm is checked at the given points; deviation beyond 1e-6 throws
// NotCriticalWind.
ManifoldModel kropina_from_wind(const ManifoldModel& base, const ZermeloData& data,
                                const std::vector<Vec>& check_points);

// Zermelo data of the KatokZermelo family at a point:
// h_eps = g0 / (eps + (1-eps)||omega||^2),  W_eps = -sqrt(1-eps) omega^sharp.
struct PointZermelo {
  Mat h;
  Vec wind;
};
PointZermelo katok_zermelo_data(const ManifoldModel& model, double eps, const Vec& x);

}  // namespace kropina
