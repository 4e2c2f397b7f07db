#include "kropina/closed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kropina/detail/energy.hpp"
#include "kropina/detail/ode.hpp"
#include "kropina/detail/optim.hpp"

namespace kropina {

namespace {

// Node list of a closed loop without the duplicated end node; winding is the
// offset x_N - x_0 on periodic axes.
struct LoopNodes {
  std::vector<Vec> x;
  Vec winding;
  double period = 1.0;
  Vec params;  // s_k for k = 0..M-1
};

LoopNodes strip_closure(const DiscretePath& loop) {
  if (!loop.closed || loop.points.size() < 4)
    throw std::invalid_argument("closed: loop must be closed with at least 3 distinct nodes");
  LoopNodes out;
  const int m = static_cast<int>(loop.points.size()) - 1;
  out.x.assign(loop.points.begin(), loop.points.begin() + m);
  out.winding = loop.points.back() - loop.points.front();
  out.period = loop.params[m] - loop.params[0];
  out.params = loop.params.head(m);
  return out;
}

// x_{k + j M} = x_k + j * winding
Vec node_at(const LoopNodes& ln, int k) {
  const int m = static_cast<int>(ln.x.size());
  int j = static_cast<int>(std::floor(static_cast<double>(k) / m));
  int r = k - j * m;
  return ln.x[r] + static_cast<double>(j) * ln.winding;
}

// cyclic 4th-order central difference of the node sequence
std::vector<Vec> cyclic_velocities(const LoopNodes& ln) {
  const int m = static_cast<int>(ln.x.size());
  const double ds = ln.period / m;
  std::vector<Vec> v(m);
  for (int k = 0; k < m; ++k)
    v[k] = (-node_at(ln, k + 2) + 8.0 * node_at(ln, k + 1) - 8.0 * node_at(ln, k - 1) +
            node_at(ln, k - 2)) /
           (12.0 * ds);
  return v;
}

std::vector<Vec> cyclic_derivative(const std::vector<Vec>& f, double period) {
  const int m = static_cast<int>(f.size());
  const double ds = period / m;
  std::vector<Vec> d(m);
  auto at = [&](int k) { return f[((k % m) + m) % m]; };
  for (int k = 0; k < m; ++k)
    d[k] = (-at(k + 2) + 8.0 * at(k + 1) - 8.0 * at(k - 1) + at(k - 2)) / (12.0 * ds);
  return d;
}

double hausdorff(const ManifoldModel& model, const std::vector<Vec>& a,
                 const std::vector<Vec>& b) {
  auto one_sided = [&](const std::vector<Vec>& p, const std::vector<Vec>& q) {
    double worst = 0.0;
    for (const Vec& u : p) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec& w : q) best = std::min(best, chart_distance(model, u, w));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(one_sided(a, b), one_sided(b, a));
}

}  // namespace

double first_variation(const ManifoldModel& model, const DiscretePath& loop,
                       const std::vector<Vec>& xi, const std::vector<Vec>& xi_dot_in) {
  LoopNodes ln = strip_closure(loop);
  const int m = static_cast<int>(ln.x.size());
  if (static_cast<int>(xi.size()) != m)
    throw std::invalid_argument("closed.first_variation: xi must have one sample per loop node");

  std::vector<Vec> vel;
  if (loop.has_velocities())
    vel.assign(loop.velocities.begin(), loop.velocities.begin() + m);
  else
    vel = cyclic_velocities(ln);
  const std::vector<Vec> xi_dot = xi_dot_in.empty() ? cyclic_derivative(xi, ln.period) : xi_dot_in;

  double total = 0.0;
  for (int k = 0; k < m; ++k) {
    const Vec& x = ln.x[k];
    const Vec& v = vel[k];
    const Mat g = model.metric_at(x);
    const Vec om = model.one_form_at(x);
    const Mat dom = model.one_form_jet(x);
    const double A = v.dot(g * v);
    const double B = om.dot(v);
    if (!(-B > kTolAdmissible))
      throw InadmissiblePath("closed.first_variation: loop velocity outside admissible cone");

    const std::vector<Mat> gamma = christoffel_at(model, x);
    Vec gamma_v_xi(model.dim);
    for (int i = 0; i < model.dim; ++i) gamma_v_xi[i] = v.dot(gamma[i] * xi[k]);

    const Vec nab_xi = xi_dot[k] + gamma_v_xi;
    const Mat Om = dom.transpose() - dom;
    const double dom_xi_v = xi[k].dot(Om * v);
    const double dds_om_xi = xi[k].dot(dom * v) - om.dot(gamma_v_xi) + om.dot(nab_xi);
    const double integrand =
        -0.5 * (2.0 * v.dot(g * nab_xi) / B - A * (dom_xi_v + dds_om_xi) / (B * B));

    // cyclic trapezoid weight
    const int kp = (k + 1) % m, km = (k - 1 + m) % m;
    double sp = ln.params[kp] + (kp == 0 ? ln.period : 0.0);
    double sm = ln.params[km] - (k == 0 ? ln.period : 0.0);
    total += integrand * 0.5 * (sp - sm);
  }
  return total;
}

VariationBasis loop_variation_basis(const DiscretePath& loop) {
  LoopNodes ln = strip_closure(loop);
  const int m = static_cast<int>(ln.x.size());
  const int n = static_cast<int>(ln.x.front().size());
  VariationBasis basis;
  for (int j = 0; j < n; ++j) {
    std::vector<Vec> constant(m), dconstant(m, Vec::Zero(n));
    for (int k = 0; k < m; ++k) {
      constant[k] = Vec::Zero(n);
      constant[k][j] = 1.0;
    }
    basis.fields.push_back(constant);
    basis.derivatives.push_back(dconstant);

    std::vector<Vec> wave(m), dwave(m);
    for (int k = 0; k < m; ++k) {
      const double s = (ln.params[k] - ln.params[0]) / ln.period;
      wave[k] = Vec::Zero(n);
      wave[k][j] = std::sin(2.0 * M_PI * s);
      dwave[k] = Vec::Zero(n);
      dwave[k][j] = 2.0 * M_PI * std::cos(2.0 * M_PI * s) / ln.period;
    }
    basis.fields.push_back(wave);
    basis.derivatives.push_back(dwave);
  }
  return basis;
}

double first_variation_residual(const ManifoldModel& model, const DiscretePath& loop) {
  VariationBasis basis = loop_variation_basis(loop);
  double worst = 0.0;
  for (std::size_t i = 0; i < basis.fields.size(); ++i)
    worst = std::max(worst,
                     std::abs(first_variation(model, loop, basis.fields[i], basis.derivatives[i])));
  return worst;
}

namespace {

// Gauss-Newton polish of a closed orbit of the Kropina flow: unknowns
// (x0, v0), residual (x(1) - x0 - winding, v(1) - v0). The Jacobian is rank
// deficient along phase and scaling directions; a complete orthogonal
// decomposition picks the minimum-norm step.
struct ClosedShot {
  bool ok = false;
  GeodesicSolution solution;
  double closure = 0.0;
};

ClosedShot shoot_closed_orbit(const ManifoldModel& model, const Vec& x0_init, const Vec& v0_init,
                              const Vec& winding) {
  const int n = model.dim;
  IntegrateOptions iopts;
  iopts.tol = 1e-12;
  ClosedShot out;

  auto residual = [&](const Vec& u) -> std::optional<Vec> {
    try {
      GeodesicSolution s =
          integrate(model, FlowKind::kropina(), u.head(n), u.tail(n), 1.0, iopts);
      Vec r(2 * n);
      r.head(n) = s.path.points.back() - u.head(n) - winding;
      r.tail(n) = s.path.velocities.back() - u.tail(n);
      return r;
    } catch (const KropinaError&) {
      return std::nullopt;
    }
  };

  Vec u(2 * n);
  u.head(n) = x0_init;
  u.tail(n) = v0_init;
  auto r = residual(u);
  if (!r) return out;
  double err = r->norm();
  for (int it = 0; it < 25 && err > 1e-11; ++it) {
    Mat J(2 * n, 2 * n);
    const double step = 1e-7 * std::max(1.0, u.norm());
    bool ok = true;
    for (int j = 0; j < 2 * n; ++j) {
      Vec up = u;
      up[j] += step;
      auto rp = residual(up);
      if (!rp) {
        ok = false;
        break;
      }
      J.col(j) = (*rp - *r) / step;
    }
    if (!ok) break;
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(J);
    cod.setThreshold(1e-9);
    const Vec du = cod.solve(-*r);
    double t = 1.0;
    bool improved = false;
    for (int bt = 0; bt < 10; ++bt) {
      auto rn = residual(u + t * du);
      if (rn && rn->norm() < err) {
        u += t * du;
        r = rn;
        err = rn->norm();
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) break;
  }
  if (err < 1e-7) {
    out.ok = true;
    out.solution = integrate(model, FlowKind::kropina(), u.head(n), u.tail(n), 1.0, iopts);
    out.closure = err;
  }
  return out;
}

DiscretePath close_path(std::vector<Vec> nodes, const Vec& winding) {
  DiscretePath p;
  p.closed = true;
  nodes.push_back(nodes.front() + winding);
  p.points = std::move(nodes);
  detail::uniformize_params(p);
  return p;
}

}  // namespace

ConnectResult closed_geodesic_in_class(const ManifoldModel& model, const LoopProblem& problem) {
  ConnectResult result;
  auto seed_adm = admissibilize_seed(model, problem.seed_loop);
  if (!seed_adm) {
    result.status = SolveStatus::NoAdmissibleSeed;
    result.detail = "no admissible loop found in the seed's class";
    return result;
  }

  DiscretePath work = detail::subdivide_to(*seed_adm, problem.discretization + 1);
  LoopNodes ln = strip_closure(work);
  const int N = static_cast<int>(ln.x.size());

  detail::ChordObjective objective;
  objective.model = &model;
  objective.cyclic = true;
  objective.winding = ln.winding;
  objective.chords = N;

  std::vector<Vec> nodes = ln.x;

  auto run_schedule = [&](FlowKind kind, double mu_scale, double grad_tol,
                          std::vector<Vec>& cur) -> detail::LbfgsResult {
    objective.kind = kind;
    detail::LbfgsResult last;
    std::vector<double> mus =
        kind.is_kropina() ? std::vector<double>{1e-2, 1e-4, 1e-6, 0.0} : std::vector<double>{0.0};
    for (double mu : mus) {
      objective.mu = mu * mu_scale;
      detail::LbfgsOptions lopt;
      lopt.grad_tol = mu == 0.0 ? grad_tol : 1e-6;
      lopt.max_iters = 800;
      std::vector<Vec> full = cur;
      full.push_back(cur.front() + ln.winding);
      auto fg = [&](const Vec& z, Vec& g) { return objective(z, g); };
      last = detail::lbfgs_minimize(fg, objective.pack(full), lopt);
      full = objective.unpack(last.x);
      cur.assign(full.begin(), full.end() - 1);
      if (last.line_search_failed && mu > 0.0) break;
      if (close_path(cur, ln.winding).diameter() < problem.collapse_diameter) break;
    }
    return last;
  };

  objective.kind = FlowKind::kropina();
  objective.mu = 0.0;
  std::vector<Vec> full0 = nodes;
  full0.push_back(nodes.front() + ln.winding);
  const Vec z0 = objective.pack(full0);
  Vec gtmp(z0.size());
  const double e_scale = std::max(objective(z0, gtmp), 1e-12);

  detail::LbfgsResult stage;
  if (problem.use_epsilon_homotopy) {
    std::vector<double> schedule = problem.eps_schedule.empty()
                                       ? ConnectProblem::default_eps_schedule()
                                       : problem.eps_schedule;
    for (double eps : schedule) {
      stage = run_schedule(FlowKind::randers(eps), 0.0, problem.grad_tol, nodes);
      EpsStage st;
      st.eps = eps;
      st.length = path_length(model, FlowKind::randers(eps), close_path(nodes, ln.winding));
      st.iters = stage.iters;
      result.eps_trace.push_back(st);
      if (stage.line_search_failed) break;
    }
  }
  stage = run_schedule(FlowKind::kropina(), e_scale, problem.grad_tol, nodes);

  DiscretePath loop = close_path(nodes, ln.winding);
  if (loop.diameter() < problem.collapse_diameter) {
    result.status = SolveStatus::Collapsed;
    result.path = loop;
    result.detail = "loop diameter collapsed below the contractibility guard";
    return result;
  }
  if (stage.line_search_failed) {
    result.status = SolveStatus::ConeCollapse;
    result.path = loop;
    result.detail = "line search could not stay inside the admissible cone";
    return result;
  }
  const bool stage_ok =
      stage.converged ||
      (stage.stalled && stage.grad_norm <= 20.0 * problem.grad_tol * std::max(1.0, stage.f));
  if (!stage_ok) {
    result.status = SolveStatus::MaxIterations;
    result.path = loop;
    result.detail = "gradient tolerance not reached";
    return result;
  }

  // polish to a genuine closed orbit of the flow
  LoopNodes fin = strip_closure(loop);
  std::vector<Vec> vel = cyclic_velocities(fin);
  ClosedShot shot = shoot_closed_orbit(model, fin.x.front(), vel.front(), fin.winding);

  result.status = SolveStatus::Converged;
  result.path = reparametrize_constant_speed(model, FlowKind::kropina(), loop);
  if (shot.ok) {
    result.solution = std::move(shot.solution);
    result.endpoint_error = shot.closure;
    result.length = solution_length(model, result.solution);
    // uniform samples keep the cyclic variation quadrature spectrally accurate
    IntegrateOptions uopts;
    uopts.tol = 1e-12;
    uopts.fixed_step = true;
    uopts.max_step = 1.0 / 256;
    GeodesicSolution uniform =
        integrate(model, FlowKind::kropina(), result.solution.path.points.front(),
                  result.solution.path.velocities.front(), 1.0, uopts);
    result.first_variation_residual =
        first_variation_residual(model, closed_solution_loop(uniform));
  } else {
    result.length = path_length(model, FlowKind::kropina(), loop);
    result.first_variation_residual = first_variation_residual(model, loop);
    result.detail = "closed-orbit polish did not converge; discrete loop reported";
  }
  result.homotopy_check_ok = straight_line_homotopy_in_chart(model, *seed_adm, result.path);
  return result;
}

// Loop view of a closed solution: marks the sample path closed so the
// variation machinery can use its analytic velocities.
DiscretePath closed_solution_loop(const GeodesicSolution& solution) {
  DiscretePath loop = solution.path;
  loop.closed = true;
  return loop;
}

namespace {

struct OrbitTrace {
  GeodesicSolution orbit;
  double period = 0.0;
  double closure = 0.0;
  double g0_length = 0.0;
};

// Integrates xdot = Y(x) from p, detects the first return, and refines the
// period by golden-section on the wrapped distance to p.
std::optional<OrbitTrace> integrate_orbit(const ManifoldModel& model, const Vec& p,
                                          double closure_tol = 1e-8) {
  const Vec yp = model.killing_field(p);
  const double speed = std::sqrt(yp.dot(model.metric_at(p) * yp));
  if (speed < 1e-12) return std::nullopt;

  auto f = [&](double, const Vec& x) { return Vec(model.killing_field(x)); };
  detail::RkOptions rk;
  rk.tol = 1e-12;
  rk.h_max = 0.02 / speed;
  rk.h_init = rk.h_max / 4;
  const double s_max = 60.0 / speed;
  int steps = 0, rejected = 0;
  auto samples = detail::rk45(f, p, s_max, rk, steps, rejected, [](double, const Vec&) {});

  // first-return bracket: local minimum of the wrapped distance after the
  // trajectory has left a neighborhood of p
  std::vector<double> dist(samples.size());
  double far = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    dist[k] = chart_distance(model, samples[k].y, p);
    far = std::max(far, dist[k]);
  }
  const double r_out = 0.25 * far;
  bool left = false;
  std::size_t hit = 0;
  for (std::size_t k = 1; k + 1 < samples.size(); ++k) {
    if (dist[k] > r_out) left = true;
    if (left && dist[k] < 0.5 * r_out && dist[k] <= dist[k - 1] && dist[k] <= dist[k + 1]) {
      hit = k;
      break;
    }
  }
  if (hit == 0) return std::nullopt;

  // refine T on [s_{hit-1}, s_{hit+1}]
  auto state_at = [&](double s) -> Vec {
    std::size_t base = 0;
    for (std::size_t k = 0; k < samples.size(); ++k)
      if (samples[k].s <= s) base = k;
    if (samples[base].s == s) return samples[base].y;
    detail::RkOptions rloc = rk;
    rloc.h_max = std::min(rk.h_max, (s - samples[base].s));
    rloc.h_init = rloc.h_max / 2;
    int st = 0, rj = 0;
    auto seg = detail::rk45(f, samples[base].y, s - samples[base].s, rloc, st, rj,
                            [](double, const Vec&) {});
    return seg.back().y;
  };
  double lo = samples[hit - 1].s, hi_s = samples[hit + 1].s;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi_s;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = chart_distance(model, state_at(c), p);
  double fd = chart_distance(model, state_at(d), p);
  for (int it = 0; it < 80 && (b - a) > 1e-13 * std::max(1.0, hi_s); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = chart_distance(model, state_at(c), p);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = chart_distance(model, state_at(d), p);
    }
  }
  const double T = 0.5 * (a + b);
  const double closure = chart_distance(model, state_at(T), p);
  if (closure > closure_tol) return std::nullopt;

  // re-integrate one period on a uniform grid (cyclic quadratures downstream)
  detail::RkOptions rper = rk;
  rper.h_max = T / 256.0;
  rper.h_init = rper.h_max;
  rper.fixed_step = true;
  int st = 0, rj = 0;
  auto per = detail::rk45(f, p, T, rper, st, rj, [](double, const Vec&) {});

  OrbitTrace out;
  out.period = T;
  out.closure = closure;
  GeodesicSolution& sol = out.orbit;
  sol.kind = FlowKind::kropina();
  const std::size_t m = per.size();
  sol.path.params.resize(m);
  sol.path.points.resize(m);
  sol.path.velocities.resize(m);
  sol.path.closed = true;
  sol.lift_t.resize(m);
  sol.omega_trace.resize(m);
  sol.speed_trace.resize(m);
  sol.c_eps_trace.resize(m);
  double t_acc = 0.0, len_acc = 0.0, prev_speed = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const Vec& x = per[k].y;
    const Vec v = model.killing_field(x);
    sol.path.params[k] = per[k].s;
    sol.path.points[k] = x;
    sol.path.velocities[k] = v;
    const double B = model.one_form_at(x).dot(v);
    const double A = v.dot(model.metric_at(x) * v);
    sol.omega_trace[k] = B;
    sol.speed_trace[k] = -A / (2.0 * B);
    sol.c_eps_trace[k] = B;
    const double g0_speed = std::sqrt(A);
    if (k > 0) {
      const double ds = per[k].s - per[k - 1].s;
      t_acc += 0.5 * (sol.speed_trace[k] + sol.speed_trace[k - 1]) * ds;
      len_acc += 0.5 * (g0_speed + prev_speed) * ds;
    }
    prev_speed = g0_speed;
    sol.lift_t[k] = t_acc;
  }
  out.g0_length = len_acc;
  auto drift = [](const std::vector<double>& tr) {
    double d = 0.0;
    for (double t : tr) d = std::max(d, std::abs(t - tr.front()));
    return d;
  };
  sol.residuals.omega_drift = drift(sol.omega_trace);
  sol.residuals.speed_drift = drift(sol.speed_trace);
  return out;
}

// max |entry| of the Lie derivative residuals of g0 and omega along Y over
// sample points; Y-jet by 4th-order differences.
struct LieResiduals {
  double metric = 0.0;
  double one_form = 0.0;
};

Mat killing_jet(const ManifoldModel& model, const Vec& x, double h = 1e-5) {
  const int n = model.dim;
  Mat jet(n, n);  // (i,k) = d_k Y^i
  Vec xp = x;
  for (int k = 0; k < n; ++k) {
    xp[k] = x[k] + 2 * h;
    Vec f2p = model.killing_field(xp);
    xp[k] = x[k] + h;
    Vec f1p = model.killing_field(xp);
    xp[k] = x[k] - h;
    Vec f1m = model.killing_field(xp);
    xp[k] = x[k] - 2 * h;
    Vec f2m = model.killing_field(xp);
    xp[k] = x[k];
    jet.col(k) = (-f2p + 8.0 * f1p - 8.0 * f1m + f2m) / (12.0 * h);
  }
  return jet;
}

LieResiduals lie_residuals(const ManifoldModel& model, const std::vector<Vec>& samples) {
  LieResiduals res;
  for (const Vec& x : samples) {
    const int n = model.dim;
    const Vec y = model.killing_field(x);
    const Mat dy = killing_jet(model, x);
    const Mat g = model.metric_at(x);
    const std::vector<Mat> dg = model.metric_jet(x);
    const Vec om = model.one_form_at(x);
    const Mat dom = model.one_form_jet(x);

    Mat lg = Mat::Zero(n, n);
    for (int k = 0; k < n; ++k) lg += y[k] * dg[k];
    lg += dy.transpose() * g + g * dy;
    res.metric = std::max(res.metric, lg.cwiseAbs().maxCoeff());

    Vec lo = dom * y + dy.transpose() * om;
    res.one_form = std::max(res.one_form, lo.cwiseAbs().maxCoeff());
  }
  return res;
}

std::vector<Vec> guarded_grid(const ManifoldModel& model, int per_axis, long cap) {
  const int n = model.dim;
  std::vector<Vec> pts;
  long total = 1;
  for (int i = 0; i < n; ++i) total *= per_axis;
  total = std::min(total, cap);
  std::vector<int> idx(n, 0);
  const double margin_frac = 0.12;
  for (long c = 0; c < total; ++c) {
    Vec x(n);
    long rem = c;
    for (int i = 0; i < n; ++i) {
      const int ii = static_cast<int>(rem % per_axis);
      rem /= per_axis;
      const double lo = model.chart.lo[i];
      const double hi = model.chart.hi[i];
      const double margin = model.chart.periodic[i]
                                ? 0.0
                                : std::max(model.chart.guard * 2.0, (hi - lo) * margin_frac);
      x[i] = lo + margin + (hi - lo - 2 * margin) * (ii + 0.5) / per_axis;
    }
    pts.push_back(x);
  }
  return pts;
}

// local ascent (sign=+1) or descent (sign=-1) of a scalar field by projected
// finite-difference gradient steps
Vec refine_extremum(const ManifoldModel& model, const std::function<double(const Vec&)>& field,
                    Vec x, double sign, double grad_goal = 1e-7) {
  const int n = model.dim;
  double step = 0.05;
  for (int it = 0; it < 400; ++it) {
    Vec g(n);
    const double h = 1e-6;
    for (int i = 0; i < n; ++i) {
      Vec xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      g[i] = (field(xp) - field(xm)) / (2 * h);
    }
    if (g.norm() < grad_goal) break;
    Vec cand = x + sign * step * g / std::max(g.norm(), 1e-300);
    if (model.chart.in_guarded(cand) && sign * (field(cand) - field(x)) > 0) {
      x = cand;
      step = std::min(step * 1.3, 0.2);
    } else {
      step *= 0.5;
      if (step < 1e-12) break;
    }
  }
  return x;
}

}  // namespace

std::vector<KillingOrbitCandidate> killing_orbit_candidates(const ManifoldModel& model,
                                                            const KillingOrbitOptions& opts) {
  if (!model.has_killing())
    throw HypothesisViolated("closed.killing_orbit_candidates: model has no killing_field");

  std::vector<Vec> samples = guarded_grid(model, 6, 4096);
  LieResiduals lie = lie_residuals(model, samples);
  if (lie.metric > opts.residual_tol)
    throw HypothesisViolated("closed.killing_orbit_candidates: Killing residual |L_Y g0| = " +
                             std::to_string(lie.metric) + " exceeds tolerance");
  if (lie.one_form > opts.residual_tol)
    throw HypothesisViolated("closed.killing_orbit_candidates: |L_Y omega| = " +
                             std::to_string(lie.one_form) + " exceeds tolerance");

  auto f_of = [&](const Vec& x) { return model.one_form_at(x).dot(model.killing_field(x)); };
  auto ynorm2_of = [&](const Vec& x) {
    const Vec y = model.killing_field(x);
    return y.dot(model.metric_at(x) * y);
  };

  double f_min = std::numeric_limits<double>::infinity(), f_max = -f_min;
  double n_min = f_min, n_max = -f_min;
  for (const Vec& x : samples) {
    const double f = f_of(x);
    f_min = std::min(f_min, f);
    f_max = std::max(f_max, f);
    const double n2 = ynorm2_of(x);
    n_min = std::min(n_min, n2);
    n_max = std::max(n_max, n2);
  }
  if (f_max >= 0.0)
    throw HypothesisViolated("closed.killing_orbit_candidates: omega(Y) = " +
                             std::to_string(f_max) + " >= 0 at a sample point (need < 0)");

  const bool f_const = (f_max - f_min) < 1e-8 * std::max(1.0, std::abs(f_min));
  const bool norm_const = (n_max - n_min) < 1e-8 * std::max(1.0, n_max);
  if (!f_const && !norm_const)
    throw HypothesisViolated(
        "closed.killing_orbit_candidates: neither omega(Y) nor ||Y|| is constant");

  // candidate base points
  std::vector<Vec> bases;
  auto grid = guarded_grid(model, std::min(opts.grid_per_axis, 16),
                           std::min<long>(opts.max_seeds, 100000));
  auto objective = [&](const Vec& x) { return norm_const ? f_of(x) : ynorm2_of(x); };
  double obj_min = std::numeric_limits<double>::infinity(), obj_max = -obj_min;
  Vec arg_min, arg_max;
  for (const Vec& x : grid) {
    const double v = objective(x);
    if (v < obj_min) {
      obj_min = v;
      arg_min = x;
    }
    if (v > obj_max) {
      obj_max = v;
      arg_max = x;
    }
  }
  const bool obj_const = (obj_max - obj_min) < 1e-8 * std::max(1.0, std::abs(obj_max));
  if (obj_const) {
    // every orbit qualifies; take well-spread seeds
    const std::size_t want = std::max<std::size_t>(opts.max_candidates * 3, 6);
    const std::size_t stride = std::max<std::size_t>(1, grid.size() / want);
    for (std::size_t i = 0; i < grid.size(); i += stride) bases.push_back(grid[i]);
  } else {
    bases.push_back(refine_extremum(model, objective, arg_max, +1.0));
    bases.push_back(refine_extremum(model, objective, arg_min, -1.0));
  }

  std::vector<KillingOrbitCandidate> out;
  for (const Vec& p : bases) {
    if (static_cast<int>(out.size()) >= opts.max_candidates) break;
    auto orbit = integrate_orbit(model, p);
    if (!orbit) continue;

    // f must be constant along the orbit (L_Y omega = 0)
    double f_drift = 0.0;
    for (const Vec& x : orbit->orbit.path.points)
      f_drift = std::max(f_drift, std::abs(f_of(x) - f_of(p)));
    if (f_drift > 1e-8 * std::max(1.0, std::abs(f_of(p)))) continue;

    bool distinct = true;
    for (const auto& prev : out)
      if (hausdorff(model, prev.orbit.path.points, orbit->orbit.path.points) <=
          opts.distinct_hausdorff) {
        distinct = false;
        break;
      }
    if (!distinct) continue;

    KillingOrbitCandidate cand;
    cand.base_point = p;
    cand.period = orbit->period;
    cand.orbit_closure = orbit->closure;
    cand.f_value = f_of(p);
    {
      Vec g(model.dim);
      const double h = 1e-6;
      for (int i = 0; i < model.dim; ++i) {
        Vec xp = p, xm = p;
        xp[i] += h;
        xm[i] -= h;
        g[i] = (objective(xp) - objective(xm)) / (2 * h);
      }
      cand.criticality_residual = g.norm();
    }
    cand.kropina_length = path_length(model, FlowKind::kropina(), orbit->orbit.path);
    cand.first_variation_res = first_variation_residual(model, orbit->orbit.path);
    cand.orbit = std::move(orbit->orbit);
    out.push_back(std::move(cand));
  }
  return out;
}

std::pair<double, double> katok_lengths(double eps) {
  if (!(eps > 0.0) || eps > 1.0)
    throw std::invalid_argument("closed.katok_lengths: eps must lie in (0, 1]");
  const double r = std::sqrt(1.0 - eps);
  return {2.0 * M_PI / (1.0 + r), 2.0 * M_PI / (1.0 - r)};
}

KatokNumeric katok_numeric_short(const ManifoldModel& sphere, double eps, double integrate_tol) {
  if (sphere.dim != 3)
    throw std::invalid_argument("closed.katok_numeric_short: expects the S^3 Hopf model");
  Vec x0(3), v0(3);
  x0 << M_PI / 4.0, 0.0, 0.0;
  v0 << 0.0, 1.0, 1.0;  // co-rotating Hopf fiber direction

  IntegrateOptions iopts;
  iopts.tol = integrate_tol;
  GeodesicSolution sol = integrate(sphere, FlowKind::randers(eps, RandersFamily::KatokZermelo), x0,
                                   v0, 2.0 * M_PI, iopts);
  KatokNumeric out;
  out.length = solution_length(sphere, sol);
  Vec target = x0;
  target[1] += 2.0 * M_PI;
  target[2] += 2.0 * M_PI;
  out.closure_error = (sol.path.points.back() - target).norm();
  double dev = 0.0;
  for (const Vec& x : sol.path.points)
    dev = std::max(dev, std::max(std::abs(x[0] - M_PI / 4.0), std::abs(x[1] - x[2])));
  out.circle_deviation = dev;
  return out;
}

PerturbedOrbitLengths perturbed_orbit_lengths(const ManifoldModel& model, double alpha) {
  if (!(alpha > 0.0) || alpha >= 1.0)
    throw std::invalid_argument("closed.perturbed_orbit_lengths: alpha must lie in (0, 1)");
  if (!model.has_killing())
    throw HypothesisViolated("closed.perturbed_orbit_lengths: model has no killing_field");

  auto ynorm2_of = [&](const Vec& x) {
    const Vec y = model.killing_field(x);
    return y.dot(model.metric_at(x) * y);
  };
  auto grid = guarded_grid(model, 8, 4096);
  Vec best = grid.front();
  double best_v = -std::numeric_limits<double>::infinity();
  for (const Vec& x : grid) {
    const double v = ynorm2_of(x);
    if (v > best_v) {
      best_v = v;
      best = x;
    }
  }
  best = refine_extremum(model, ynorm2_of, best, +1.0);
  auto orbit = integrate_orbit(model, best);
  if (!orbit)
    throw KropinaError("closed.perturbed_orbit_lengths: no closed orbit found through the "
                       "||Y|| maximizer");

  const double c = std::sqrt(ynorm2_of(best));
  PerturbedOrbitLengths out;
  out.orbit_g0_length = orbit->g0_length;
  out.closed_form = out.orbit_g0_length / (1.0 + std::sqrt(alpha));

  // quadrature of the Zermelo-Randers norm with wind (sqrt(alpha)/c) Y
  const auto& path = orbit->orbit.path;
  double acc = 0.0;
  std::vector<double> f(path.points.size());
  for (std::size_t k = 0; k < path.points.size(); ++k) {
    const Vec& x = path.points[k];
    const Vec wind = (std::sqrt(alpha) / c) * model.killing_field(x);
    f[k] = zermelo_randers_value(model.metric_at(x), wind, path.velocities[k]);
  }
  for (std::size_t k = 0; k + 1 < path.points.size(); ++k)
    acc += 0.5 * (f[k] + f[k + 1]) * (path.params[k + 1] - path.params[k]);
  out.numeric = acc;
  return out;
}

}  // namespace kropina
