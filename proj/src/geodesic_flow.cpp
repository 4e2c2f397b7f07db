#include "kropina/geodesic_flow.hpp"

#include <algorithm>
#include <cmath>

#include "kropina/detail/ode.hpp"

namespace kropina {

namespace {

// Per-point geometry bundle shared by the spray evaluations.
struct GeomEval {
  Mat g;
  Eigen::LLT<Mat> llt;
  std::vector<Mat> dg;
  Mat dom;  // (i,k) = d_k omega_i
  Vec om;
  Vec om_sharp;
  double om_norm2 = 0.0;
};

GeomEval geom_eval(const ManifoldModel& model, const Vec& x) {
  GeomEval e;
  e.g = model.metric_at(x);
  e.llt.compute(e.g);
  e.dg = model.metric_jet(x);
  e.dom = model.one_form_jet(x);
  e.om = model.one_form_at(x);
  e.om_sharp = e.llt.solve(e.om);
  e.om_norm2 = e.om.dot(e.om_sharp);
  return e;
}

// Gamma(v,v)^i via one linear solve: w_l = v^j v^k (d_j g_lk - d_l g_jk / 2).
Vec christoffel_vv(const GeomEval& e, const Vec& v) {
  const int n = static_cast<int>(v.size());
  Vec w(n);
  Vec acc = Vec::Zero(n);
  for (int j = 0; j < n; ++j) acc += v[j] * (e.dg[j] * v);
  for (int l = 0; l < n; ++l) w[l] = acc[l] - 0.5 * v.dot(e.dg[l] * v);
  return e.llt.solve(w);
}

void check_spray_domain(const ManifoldModel& model, const Vec& x, const char* where) {
  model.require_inside(x, where);
  if (!model.chart.in_guarded(x))
    throw ChartGuard(std::string(where) + ": point inside the chart guard band");
}

void check_omega_nonzero(const GeomEval& e, double tol_omega, const char* where) {
  if (std::sqrt(std::max(e.om_norm2, 0.0)) < tol_omega)
    throw ChartGuard(std::string(where) + ": ||omega|| below tol_omega (excluded zero set)");
}

// Shared reduced-system acceleration for the eps-family; eps = 0 with
// scale = 1 is the Kropina system.
Vec lift_spray(const GeomEval& e, const Vec& v, double tdot, double eps, double scale) {
  const Vec ome = scale * e.om;
  const Mat dome = scale * e.dom;
  const Vec om_sharp_e = scale * e.om_sharp;
  const Vec gamma_vv = christoffel_vv(e, v);
  // (grad_v omega_e)(v)
  const double nabla_om_vv = v.dot(dome * v) - ome.dot(gamma_vv);
  // Omega(i,j) = d_i w_j - d_j w_i; (Omega v)_i = Omega(i,j) v^j
  const Vec Ov = dome.transpose() * v - dome * v;
  const double denom = eps + scale * scale * e.om_norm2;
  const double tddot = (nabla_om_vv + tdot * om_sharp_e.dot(Ov)) / denom;
  return -gamma_vv + tdot * e.llt.solve(Ov) - tddot * om_sharp_e;
}

double speed_value(const ManifoldModel& model, FlowKind kind, const Vec& x, const Vec& v) {
  PointVector pv = PointVector::at(model, x, v);
  if (kind.is_kropina()) return kropina_value(model, pv);
  return randers_value(model, kind.eps, pv, kind.family);
}

double family_scale(FlowKind kind) {
  if (kind.is_kropina() || kind.family == RandersFamily::Stationary) return 1.0;
  return std::sqrt(1.0 - kind.eps);
}

}  // namespace

double DiscretePath::diameter() const {
  double d = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j)
      d = std::max(d, (points[i] - points[j]).norm());
  return d;
}

Vec kropina_spray(const ManifoldModel& model, const Vec& x, const Vec& v) {
  check_spray_domain(model, x, "geodesic_flow.kropina_spray");
  GeomEval e = geom_eval(model, x);
  check_omega_nonzero(e, model.tol_omega, "geodesic_flow.kropina_spray");
  const double B = e.om.dot(v);
  if (!(-B > kTolAdmissible))
    throw InadmissibleVector("geodesic_flow.kropina_spray: velocity outside admissible cone");
  const double A = v.dot(e.g * v);
  const double K = -A / (2.0 * B);
  return lift_spray(e, v, K, 0.0, 1.0);
}

Vec kropina_el_spray(const ManifoldModel& model, const Vec& x, const Vec& v) {
  check_spray_domain(model, x, "geodesic_flow.kropina_el_spray");
  GeomEval e = geom_eval(model, x);
  check_omega_nonzero(e, model.tol_omega, "geodesic_flow.kropina_el_spray");
  const int n = model.dim;
  const double B = e.om.dot(v);
  if (!(-B > kTolAdmissible))
    throw InadmissibleVector("geodesic_flow.kropina_el_spray: velocity outside admissible cone");
  const double A = v.dot(e.g * v);
  const Vec G = e.g * v;

  Vec dA(n), dB(n);
  Mat DG(n, n);  // (j,k) = d_k G_j
  for (int k = 0; k < n; ++k) {
    dA[k] = v.dot(e.dg[k] * v);
    DG.col(k) = e.dg[k] * v;
  }
  dB = e.dom.transpose() * v;

  const double B2 = B * B, B3 = B2 * B, B4 = B2 * B2;
  const Vec de_dx = (A / (4.0 * B2)) * dA - (A * A / (4.0 * B3)) * dB;
  // M(j,k) = d^2 e / dv_j dx_k
  const Mat M = (G * dA.transpose() + A * DG) / (2.0 * B2) -
                (A / B3) * (G * dB.transpose()) -
                (2.0 * A * (e.om * dA.transpose()) + A * A * e.dom) / (4.0 * B3) +
                (0.75 * A * A / B4) * (e.om * dB.transpose());

  // fundamental tensor of K at v
  const Mat gv = G * G.transpose() / B2 + (A / (2.0 * B2)) * e.g -
                 (A / B3) * (G * e.om.transpose() + e.om * G.transpose()) +
                 (0.75 * A * A / B4) * (e.om * e.om.transpose());
  return gv.llt().solve(de_dx - M * v);
}

Vec randers_spray(const ManifoldModel& model, double eps, const Vec& x, const Vec& v,
                  RandersFamily family) {
  if (!(eps > 0.0) || eps > 1.0)
    throw std::invalid_argument("geodesic_flow.randers_spray: eps must lie in (0, 1]");
  check_spray_domain(model, x, "geodesic_flow.randers_spray");
  if (v.norm() == 0.0)
    throw InadmissibleVector("geodesic_flow.randers_spray: zero velocity");
  GeomEval e = geom_eval(model, x);
  PointVector pv = PointVector::at(model, x, v);
  const double tdot = randers_value(model, eps, pv, family);
  const double scale = family == RandersFamily::Stationary ? 1.0 : std::sqrt(1.0 - eps);
  return lift_spray(e, v, tdot, eps, scale);
}

GeodesicSolution integrate(const ManifoldModel& model, FlowKind kind, const Vec& x0,
                           const Vec& v0, double horizon, const IntegrateOptions& opts) {
  const int n = model.dim;
  model.require_inside(x0, "geodesic_flow.integrate");
  if (kind.is_kropina()) {
    PointVector pv0 = PointVector::at(model, x0, v0);
    if (!pv0.admissible())
      throw InadmissibleVector("geodesic_flow.integrate: initial velocity not admissible");
  }

  auto rhs = [&](double, const Vec& y) {
    Vec dy(2 * n + 1);
    const Vec x = y.head(n);
    const Vec v = y.segment(n, n);
    dy.head(n) = v;
    dy.segment(n, n) = kind.is_kropina() ? kropina_spray(model, x, v)
                                         : randers_spray(model, kind.eps, x, v, kind.family);
    dy[2 * n] = speed_value(model, kind, x, v);
    return dy;
  };

  auto monitor = [&](double s, const Vec& y) {
    const Vec x = y.head(n);
    const Vec v = y.segment(n, n);
    if (!model.chart.in_guarded(x))
      throw ChartGuard("geodesic_flow.integrate: trajectory entered chart guard band at s=" +
                       std::to_string(s));
    if (kind.is_kropina()) {
      const double B = model.one_form_at(x).dot(v);
      const double vnorm = std::sqrt(v.dot(model.metric_at(x) * v));
      if (-B / vnorm < opts.cone_exit)
        throw ConeExit("geodesic_flow.integrate: velocity approached the cone boundary at s=" +
                       std::to_string(s));
    }
  };

  detail::RkOptions rk;
  rk.tol = opts.tol;
  rk.h_max = opts.max_step > 0.0 ? opts.max_step : horizon / 64.0;
  rk.h_init = rk.h_max / 4.0;
  rk.h_min = opts.min_step;
  rk.max_steps = opts.max_steps;
  rk.fixed_step = opts.fixed_step;

  Vec y0(2 * n + 1);
  y0.head(n) = x0;
  y0.segment(n, n) = v0;
  y0[2 * n] = 0.0;
  monitor(0.0, y0);

  GeodesicSolution sol;
  sol.kind = kind;
  auto samples = detail::rk45(rhs, y0, horizon, rk, sol.stats.steps, sol.stats.rejected, monitor);

  const std::size_t m = samples.size();
  sol.path.params.resize(m);
  sol.path.points.resize(m);
  sol.path.velocities.resize(m);
  sol.lift_t.resize(m);
  sol.omega_trace.resize(m);
  sol.speed_trace.resize(m);
  sol.c_eps_trace.resize(m);

  const double scale = family_scale(kind);
  const double eps = kind.is_kropina() ? 0.0 : kind.eps;
  std::vector<double> inv_trace(m);
  for (std::size_t k = 0; k < m; ++k) {
    const Vec& y = samples[k].y;
    sol.path.params[k] = samples[k].s;
    sol.path.points[k] = y.head(n);
    sol.path.velocities[k] = y.segment(n, n);
    sol.lift_t[k] = y[2 * n];
    const Vec x = y.head(n);
    const Vec v = y.segment(n, n);
    const double B = model.one_form_at(x).dot(v);
    const double A = v.dot(model.metric_at(x) * v);
    sol.omega_trace[k] = B;
    sol.speed_trace[k] = speed_value(model, kind, x, v);
    sol.c_eps_trace[k] = scale * B - eps * sol.speed_trace[k];
    inv_trace[k] = eps * A + scale * scale * B * B;
  }
  auto drift = [](const std::vector<double>& trace) {
    double d = 0.0;
    for (double t : trace) d = std::max(d, std::abs(t - trace.front()));
    return d;
  };
  sol.residuals.omega_drift = drift(sol.omega_trace);
  sol.residuals.speed_drift = drift(sol.speed_trace);
  sol.residuals.c_eps_drift = drift(sol.c_eps_trace);
  sol.residuals.randers_inv_drift = drift(inv_trace);
  return sol;
}

namespace {

// Two-point Taylor (quintic) interpolation matching value, first and second
// derivative at both segment ends; used to resample integrated trajectories.
Vec quintic_hermite(double t, const Vec& x0, const Vec& v0, const Vec& a0, const Vec& x1,
                    const Vec& v1, const Vec& a1, double h) {
  const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
  const double h00 = 1 - 10 * t3 + 15 * t4 - 6 * t5;
  const double h10 = t - 6 * t3 + 8 * t4 - 3 * t5;
  const double h20 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
  const double h01 = 10 * t3 - 15 * t4 + 6 * t5;
  const double h11 = -4 * t3 + 7 * t4 - 3 * t5;
  const double h21 = 0.5 * t3 - t4 + 0.5 * t5;
  return h00 * x0 + h10 * h * v0 + h20 * h * h * a0 + h01 * x1 + h11 * h * v1 + h21 * h * h * a1;
}

Vec cubic_hermite(double t, const Vec& x0, const Vec& v0, const Vec& x1, const Vec& v1, double h) {
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * x0 + (t3 - 2 * t2 + t) * h * v0 + (-2 * t3 + 3 * t2) * x1 +
         (t3 - t2) * h * v1;
}

double length_integrand(const ManifoldModel& model, FlowKind kind, const Vec& x, const Vec& v) {
  PointVector pv = PointVector::at(model, x, v);
  if (kind.is_kropina()) {
    if (!pv.admissible())
      throw InadmissiblePath("geodesic_flow.path_length: inadmissible velocity sample");
    return kropina_value(model, pv);
  }
  return randers_value(model, kind.eps, pv, kind.family);
}

// Chord-based quadrature for polyline paths: midpoint rule with `sub`
// subdivisions per chord. K and F_eps are 1-homogeneous, so evaluating on the
// chord vector absorbs the parameter scale.
double polyline_length(const ManifoldModel& model, FlowKind kind, const DiscretePath& path,
                       int sub) {
  double total = 0.0;
  for (int k = 0; k + 1 < static_cast<int>(path.points.size()); ++k) {
    const Vec& a = path.points[k];
    const Vec& b = path.points[k + 1];
    const Vec d = b - a;
    for (int j = 0; j < sub; ++j) {
      const Vec xm = a + ((j + 0.5) / sub) * d;
      total += length_integrand(model, kind, xm, d) / sub;
    }
  }
  return total;
}

}  // namespace

namespace {

// Simpson over Hermite-resampled segments; accel(k) supplies the velocity
// derivative at node k.
template <class Accel>
double hermite_simpson_length(const ManifoldModel& model, FlowKind kind,
                              const DiscretePath& path, Accel accel) {
  const int segs = path.segments();
  const int sub = 10;
  double total = 0.0;
  for (int k = 0; k < segs; ++k) {
    const double h = path.params[k + 1] - path.params[k];
    const Vec &x0 = path.points[k], &x1 = path.points[k + 1];
    const Vec &v0 = path.velocities[k], &v1 = path.velocities[k + 1];
    const Vec a0 = accel(k);
    const Vec a1 = accel(k + 1);
    double seg = 0.0;
    for (int j = 0; j <= sub; ++j) {
      const double t = static_cast<double>(j) / sub;
      const Vec x = quintic_hermite(t, x0, v0, a0, x1, v1, a1, h);
      const Vec v = cubic_hermite(t, v0, a0, v1, a1, h);
      const double f = length_integrand(model, kind, x, v);
      const double w = (j == 0 || j == sub) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
      seg += w * f;
    }
    total += seg * h / (3.0 * sub);
  }
  return total;
}

}  // namespace

double path_length(const ManifoldModel& model, FlowKind kind, const DiscretePath& path) {
  if (path.points.size() < 2)
    throw std::invalid_argument("geodesic_flow.path_length: need at least two nodes");

  if (!path.has_velocities()) {
    // Richardson on the midpoint rule (order 2): L ~ (4 L_2m - L_m) / 3
    const double Lm = polyline_length(model, kind, path, 10);
    const double L2m = polyline_length(model, kind, path, 20);
    return (4.0 * L2m - Lm) / 3.0;
  }

  // Accelerations estimated from the carried velocities (3-point differences,
  // one-sided at the ends).
  const int m = static_cast<int>(path.points.size());
  auto fd_accel = [&](int k) -> Vec {
    if (k == 0)
      return (path.velocities[1] - path.velocities[0]) / (path.params[1] - path.params[0]);
    if (k == m - 1)
      return (path.velocities[m - 1] - path.velocities[m - 2]) /
             (path.params[m - 1] - path.params[m - 2]);
    const double h0 = path.params[k] - path.params[k - 1];
    const double h1 = path.params[k + 1] - path.params[k];
    return (h0 * h0 * path.velocities[k + 1] - h1 * h1 * path.velocities[k - 1] +
            (h1 * h1 - h0 * h0) * path.velocities[k]) /
           (h0 * h1 * (h0 + h1));
  };
  return hermite_simpson_length(model, kind, path, fd_accel);
}

double solution_length(const ManifoldModel& model, const GeodesicSolution& solution) {
  const DiscretePath& path = solution.path;
  if (path.points.size() < 2)
    throw std::invalid_argument("geodesic_flow.solution_length: need at least two nodes");
  const FlowKind kind = solution.kind;
  auto spray_accel = [&](int k) -> Vec {
    const Vec& x = path.points[k];
    const Vec& v = path.velocities[k];
    return kind.is_kropina() ? kropina_spray(model, x, v)
                             : randers_spray(model, kind.eps, x, v, kind.family);
  };
  return hermite_simpson_length(model, kind, path, spray_accel);
}

double path_energy(const ManifoldModel& model, const DiscretePath& path) {
  if (path.points.size() < 2)
    throw std::invalid_argument("geodesic_flow.path_energy: need at least two nodes");
  const int sub = 10;
  double total = 0.0;
  for (int k = 0; k + 1 < static_cast<int>(path.points.size()); ++k) {
    const double ds = path.params[k + 1] - path.params[k];
    const Vec& a = path.points[k];
    const Vec d = path.points[k + 1] - a;
    const Vec vel = d / ds;
    for (int j = 0; j < sub; ++j) {
      const Vec xm = a + ((j + 0.5) / sub) * d;
      PointVector pv = PointVector::at(model, xm, vel);
      if (!pv.admissible())
        throw InadmissiblePath("geodesic_flow.path_energy: inadmissible velocity sample");
      const double K = kropina_value(model, pv);
      total += 0.5 * K * K * ds / sub;
    }
  }
  return total;
}

double spacetime_energy_diagnostic(const ManifoldModel& model, FlowKind kind,
                                   const GeodesicSolution& solution,
                                   const std::vector<double>& tdot_override) {
  const auto& path = solution.path;
  const std::size_t m = path.points.size();
  if (m < 2) return 0.0;
  if (!tdot_override.empty() && tdot_override.size() != m)
    throw std::invalid_argument(
        "geodesic_flow.spacetime_energy_diagnostic: tdot_override size mismatch");

  const double scale = family_scale(kind);
  const double eps = kind.is_kropina() ? 0.0 : kind.eps;
  std::vector<double> f(m);
  for (std::size_t k = 0; k < m; ++k) {
    const Vec& x = path.points[k];
    const Vec& v = path.velocities[k];
    const double A = v.dot(model.metric_at(x) * v);
    const double B = model.one_form_at(x).dot(v);
    const double tdot = tdot_override.empty() ? solution.speed_trace[k] : tdot_override[k];
    f[k] = A + 2.0 * scale * B * tdot - eps * tdot * tdot;
  }
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < m; ++k)
    total += 0.5 * (f[k] + f[k + 1]) * (path.params[k + 1] - path.params[k]);
  return 0.5 * total;
}

DiscretePath reparametrize_constant_speed(const ManifoldModel& model, FlowKind kind,
                                          const DiscretePath& path) {
  const int segs = path.segments();
  std::vector<double> cum(segs + 1, 0.0);
  for (int k = 0; k < segs; ++k) {
    DiscretePath chord;
    chord.params = Vec::LinSpaced(2, 0.0, 1.0);
    chord.points = {path.points[k], path.points[k + 1]};
    cum[k + 1] = cum[k] + polyline_length(model, kind, chord, 10);
  }
  const double total = cum.back();
  DiscretePath out;
  out.closed = path.closed;
  out.params = path.params;
  out.points.resize(segs + 1);
  out.points.front() = path.points.front();
  out.points.back() = path.points.back();
  for (int i = 1; i < segs; ++i) {
    const double target = total * i / segs;
    int k = 0;
    while (k + 1 < segs && cum[k + 1] < target) ++k;
    const double t = (target - cum[k]) / std::max(cum[k + 1] - cum[k], 1e-300);
    out.points[i] = path.points[k] + t * (path.points[k + 1] - path.points[k]);
  }
  return out;
}

}  // namespace kropina
