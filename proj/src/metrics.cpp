#include "kropina/metrics.hpp"

#include <cmath>

namespace kropina {

PointVector PointVector::at(const ManifoldModel& model, Vec x, Vec v) {
  model.require_inside(x, "metrics.point_vector");
  PointVector pv;
  pv.omega_v = model.one_form_at(x).dot(v);
  pv.g0_vv = v.dot(model.metric_at(x) * v);
  pv.x = std::move(x);
  pv.v = std::move(v);
  return pv;
}

double kropina_value(const ManifoldModel& model, const PointVector& pv) {
  (void)model;
  if (!pv.admissible())
    throw InadmissibleVector("metrics.kropina_value: -omega(v) = " + std::to_string(-pv.omega_v) +
                             " is not above the admissibility gate");
  return -pv.g0_vv / (2.0 * pv.omega_v);
}

Mat fundamental_tensor(const ManifoldModel& model, const PointVector& pv) {
  if (!pv.admissible())
    throw InadmissibleVector("metrics.fundamental_tensor: vector outside the admissible cone");
  const Mat g = model.metric_at(pv.x);
  const Vec om = model.one_form_at(pv.x);
  const double A = pv.g0_vv;
  const double B = pv.omega_v;
  const Vec G = g * pv.v;
  const double B2 = B * B;
  return G * G.transpose() / B2 + (A / (2.0 * B2)) * g -
         (A / (B2 * B)) * (G * om.transpose() + om * G.transpose()) +
         (0.75 * A * A / (B2 * B2)) * om * om.transpose();
}

double randers_value(const ManifoldModel& model, double eps, const PointVector& pv,
                     RandersFamily family) {
  (void)model;
  if (!(eps > 0.0) || eps > 1.0)
    throw std::invalid_argument("metrics.randers_value: eps must lie in (0, 1]");
  const double A = pv.g0_vv;
  const double B = pv.omega_v;
  if (family == RandersFamily::Stationary)
    return (std::sqrt(eps * A + B * B) + B) / eps;
  const double c = 1.0 - eps;
  return (std::sqrt(eps * A + c * B * B) + std::sqrt(c) * B) / eps;
}

double zermelo_randers_value(const Mat& h, const Vec& wind, const Vec& v) {
  const double hWW = wind.dot(h * wind);
  if (hWW >= 1.0)
    throw NotCriticalWind("metrics.zermelo_randers_value: ||W||_h must be < 1, got " +
                          std::to_string(std::sqrt(hWW)));
  const double lambda = 1.0 - hWW;
  const double hWv = wind.dot(h * v);
  const double hvv = v.dot(h * v);
  return (std::sqrt(lambda * hvv + hWv * hWv) - hWv) / lambda;
}

ManifoldModel kropina_from_wind(const ManifoldModel& base, const ZermeloData& data,
                                const std::vector<Vec>& check_points) {
  for (const Vec& x : check_points) {
    Vec w = data.wind(x);
    double n2 = w.dot(base.metric_at(x) * w);
    if (std::abs(std::sqrt(n2) - 1.0) > 1e-6)
      throw NotCriticalWind("metrics.kropina_from_wind: ||W||_g0 = " +
                            std::to_string(std::sqrt(n2)) + " at a checked point (need 1)");
  }
  ManifoldModel m = base;
  m.name = base.name + "_wind";
  auto metric = base.metric_at;
  auto wind = data.wind;
  m.one_form_at = [metric, wind](const Vec& x) { return Vec(metric(x) * wind(x)); };
  m.one_form_jet = nullptr;
  attach_fd_jets(m);
  return m;
}

PointZermelo katok_zermelo_data(const ManifoldModel& model, double eps, const Vec& x) {
  if (!(eps > 0.0) || eps >= 1.0)
    throw std::invalid_argument("metrics.katok_zermelo_data: eps must lie in (0, 1)");
  const Mat g = model.metric_at(x);
  const Vec om = model.one_form_at(x);
  const Vec om_sharp = g.llt().solve(om);
  const double n2 = om.dot(om_sharp);
  PointZermelo z;
  z.h = g / (eps + (1.0 - eps) * n2);
  z.wind = -std::sqrt(1.0 - eps) * om_sharp;
  return z;
}

}  // namespace kropina
