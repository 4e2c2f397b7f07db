#include <doctest.h>

#include <cmath>
#include <random>

#include "kropina/geodesic_flow.hpp"

using namespace kropina;

namespace {

Vec vec2(double a, double b) { return (Vec(2) << a, b).finished(); }
Vec vec3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }

PointVector random_admissible(const ManifoldModel& m, std::mt19937_64& rng,
                              double margin = 1e-3) {
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit(0.2, 0.8);
  while (true) {
    Vec x(m.dim);
    for (int i = 0; i < m.dim; ++i) {
      double lo = m.chart.lo[i], hi = m.chart.hi[i];
      if (!m.chart.periodic[i] && hi - lo > 10.0) { lo = -1.5; hi = 1.5; }
      x[i] = lo + (hi - lo) * unit(rng);
    }
    Vec v(m.dim);
    for (int i = 0; i < m.dim; ++i) v[i] = gauss(rng);
    for (const Vec& cand : {v, Vec(-v)}) {
      PointVector pv = PointVector::at(m, x, cand);
      if (-pv.omega_v > margin * std::sqrt(pv.g0_vv)) return pv;
    }
  }
}

// random admissible polyline: chords drawn from the cone interior
DiscretePath random_admissible_polyline(const ManifoldModel& m, std::mt19937_64& rng,
                                        int chords = 8, double step = 0.12) {
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit(0.3, 0.7);
  while (true) {
    Vec x(m.dim);
    for (int i = 0; i < m.dim; ++i) {
      double lo = m.chart.lo[i], hi = m.chart.hi[i];
      if (!m.chart.periodic[i] && hi - lo > 10.0) { lo = -1.0; hi = 1.0; }
      x[i] = lo + (hi - lo) * unit(rng);
    }
    DiscretePath p;
    p.points.push_back(x);
    bool ok = true;
    for (int k = 0; k < chords && ok; ++k) {
      const Vec& cur = p.points.back();
      bool placed = false;
      for (int attempt = 0; attempt < 60; ++attempt) {
        Vec axis = -sharp(m, cur, m.one_form_at(cur));
        axis /= std::max(axis.norm(), 1e-12);
        Vec noise(m.dim);
        for (int i = 0; i < m.dim; ++i) noise[i] = gauss(rng);
        Vec d = step * (axis + 0.55 * noise);
        Vec nxt = cur + d;
        if (!m.chart.contains(nxt) || !m.chart.in_guarded(nxt)) continue;
        bool chord_ok = true;
        for (int j = 0; j < 24 && chord_ok; ++j) {
          Vec mid = cur + ((j + 0.5) / 24.0) * d;
          if (!m.chart.contains(mid)) { chord_ok = false; break; }
          PointVector pv = PointVector::at(m, mid, d);
          chord_ok = -pv.omega_v > 1e-2 * std::sqrt(pv.g0_vv);
        }
        if (chord_ok) {
          p.points.push_back(nxt);
          placed = true;
          break;
        }
      }
      ok = placed;
    }
    if (!ok) continue;
    p.params = Vec::LinSpaced(p.points.size(), 0.0, 1.0);
    return p;
  }
}

}  // namespace

TEST_CASE("kropina spray vanishes on flat constant-form models") {
  auto m = flat_constant_form(2, vec2(-1.0, 0.0));
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    PointVector pv = random_admissible(m, rng);
    CHECK(kropina_spray(m, pv.x, pv.v).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(kropina_el_spray(m, pv.x, pv.v).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("reduced spray and energy spray agree where omega-sharp is killing") {
  std::vector<ManifoldModel> models;
  models.push_back(flat_constant_form(2, vec2(-1.0, 0.0)));
  models.push_back(flat_torus(2, vec2(-1.0, 0.0)));
  models.push_back(round_sphere_hopf(2));
  std::mt19937_64 rng(5);
  for (const auto& m : models) {
    for (int trial = 0; trial < 100; ++trial) {
      PointVector pv = random_admissible(m, rng, 1e-2);
      Vec a = kropina_spray(m, pv.x, pv.v);
      Vec b = kropina_el_spray(m, pv.x, pv.v);
      CHECK((a - b).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, a.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("the two sprays differ only by a reparametrization term in general") {
  // same geodesic paths, different affine parametrizations: the difference is
  // parallel to the velocity
  auto m = heisenberg_contact(-1);
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    PointVector pv = random_admissible(m, rng, 5e-2);
    Vec a = kropina_spray(m, pv.x, pv.v);
    Vec b = kropina_el_spray(m, pv.x, pv.v);
    Vec d = a - b;
    const double lambda = d.dot(pv.v) / pv.v.squaredNorm();
    CHECK((d - lambda * pv.v).cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, d.norm()));
  }
}

TEST_CASE("energy spray matches an all-finite-difference euler-lagrange oracle") {
  auto m = heisenberg_contact(+1);
  std::mt19937_64 rng(11);
  auto half_k2 = [&](const Vec& x, const Vec& v) {
    const double A = v.dot(m.metric_at(x) * v);
    const double B = m.one_form_at(x).dot(v);
    return A * A / (8.0 * B * B);
  };
  for (int trial = 0; trial < 10; ++trial) {
    PointVector pv = random_admissible(m, rng, 0.4);
    const int n = 3;
    const double h = 1e-5;
    Vec dedx(n);
    Mat M(n, n);
    for (int k = 0; k < n; ++k) {
      Vec xp = pv.x, xm = pv.x;
      xp[k] += h;
      xm[k] -= h;
      dedx[k] = (half_k2(xp, pv.v) - half_k2(xm, pv.v)) / (2 * h);
      for (int j = 0; j < n; ++j) {
        Vec vp = pv.v, vm = pv.v;
        vp[j] += h;
        vm[j] -= h;
        M(j, k) = (half_k2(xp, vp) - half_k2(xp, vm) - half_k2(xm, vp) + half_k2(xm, vm)) /
                  (4 * h * h);
      }
    }
    Mat gv = fundamental_tensor(m, pv);
    Vec oracle = gv.llt().solve(dedx - M * pv.v);
    Vec ours = kropina_el_spray(m, pv.x, pv.v);
    CHECK((oracle - ours).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("randers spray: riemannian limit and constant-data limit") {
  // omega == 0 never happens for a Kropina structure, but F_1 with a tiny
  // constant form approaches the rescaled riemannian geodesics; use the exact
  // statement instead: flat constant data gives zero acceleration
  auto m = flat_constant_form(2, vec2(-1.0, 0.0));
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    PointVector pv = random_admissible(m, rng);
    for (double eps : {1.0, 0.25, 0.01})
      CHECK(randers_spray(m, eps, pv.x, pv.v).cwiseAbs().maxCoeff() < 1e-13);
  }

  // on the sphere with the one-form scaled to zero through a custom model the
  // eps = 1 spray must reduce to the riemannian spray of g0
  auto sphere = round_sphere_hopf(2);
  ManifoldModel riem = sphere;
  riem.one_form_at = [](const Vec&) { return Vec(Vec::Zero(3)); };
  riem.one_form_jet = [](const Vec&) { return Mat(Mat::Zero(3, 3)); };
  for (int trial = 0; trial < 20; ++trial) {
    PointVector pv = random_admissible(sphere, rng);
    Vec a = randers_spray(riem, 1.0, pv.x, pv.v);
    auto gamma = christoffel_at(riem, pv.x);
    Vec riem_spray(3);
    for (int i = 0; i < 3; ++i) riem_spray[i] = -pv.v.dot(gamma[i] * pv.v);
    CHECK((a - riem_spray).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("hopf circles are geodesics of the katok family") {
  auto sphere = round_sphere_hopf(2);
  const Vec x0 = vec3(M_PI / 4, 0.0, 0.0);
  const Vec v0 = vec3(0.0, 1.0, 1.0);
  CHECK(randers_spray(sphere, 0.75, x0, v0, RandersFamily::KatokZermelo).cwiseAbs().maxCoeff() <
        1e-12);
  CHECK(kropina_spray(sphere, x0, v0).cwiseAbs().maxCoeff() < 1e-12);

  IntegrateOptions opts;
  opts.tol = 1e-12;
  auto sol = integrate(sphere, FlowKind::randers(0.75, RandersFamily::KatokZermelo), x0, v0,
                       2 * M_PI, opts);
  Vec target = vec3(M_PI / 4, 2 * M_PI, 2 * M_PI);
  CHECK((sol.path.points.back() - target).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("flat integration: straight line with arrival time L = 1/2") {
  auto m = flat_constant_form(2, vec2(-1.0, 0.0));
  auto sol = integrate(m, FlowKind::kropina(), vec2(0, 0), vec2(1, 0), 1.0);
  CHECK((sol.path.points.back() - vec2(1, 0)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(sol.lift_t.back() - sol.lift_t.front() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sol.residuals.omega_drift < 1e-14);
  CHECK(sol.residuals.speed_drift < 1e-14);
}

TEST_CASE("hopf circle kropina geodesic: conserved traces over a full period") {
  auto sphere = round_sphere_hopf(2);
  IntegrateOptions opts;
  opts.tol = 1e-10;
  // co-rotation is the admissible direction for omega = -g0(V, .)
  auto sol = integrate(sphere, FlowKind::kropina(), vec3(M_PI / 4, 0.0, 0.0),
                       vec3(0.0, 1.0, 1.0), 2 * M_PI, opts);
  CHECK(sol.residuals.omega_drift < 1e-8);
  CHECK(sol.residuals.speed_drift < 1e-8);
  for (const Vec& x : sol.path.points) CHECK(std::abs(x[0] - M_PI / 4) < 1e-9);
}

TEST_CASE("fermat identity: lift increment equals the finsler length") {
  auto sphere = round_sphere_hopf(2);
  auto heis = heisenberg_contact(-1);
  std::mt19937_64 rng(17);
  IntegrateOptions opts;
  opts.tol = 1e-10;
  opts.max_step = 0.6 / 1024;
  for (int trial = 0; trial < 5; ++trial) {
    PointVector pv = random_admissible(sphere, rng, 0.2);
    auto sol = integrate(sphere, FlowKind::kropina(), pv.x, pv.v, 0.6, opts);
    const double dt = sol.lift_t.back() - sol.lift_t.front();
    CHECK(std::abs(dt - solution_length(sphere, sol)) < 1e-9 * std::max(1.0, dt));

    PointVector ph = random_admissible(heis, rng, 0.2);
    auto solh = integrate(heis, FlowKind::kropina(), ph.x, ph.v, 0.6, opts);
    const double dth = solh.lift_t.back() - solh.lift_t.front();
    CHECK(std::abs(dth - solution_length(heis, solh)) < 1e-9 * std::max(1.0, dth));

    auto solr = integrate(heis, FlowKind::randers(0.2), ph.x, ph.v, 0.6, opts);
    const double dtr = solr.lift_t.back() - solr.lift_t.front();
    CHECK(std::abs(dtr - solution_length(heis, solr)) < 1e-9 * std::max(1.0, dtr));
  }
}

TEST_CASE("randers conservation on the contact model") {
  auto heis = heisenberg_contact(-1);
  std::mt19937_64 rng(19);
  IntegrateOptions opts;
  opts.tol = 1e-10;
  for (int trial = 0; trial < 5; ++trial) {
    PointVector pv = random_admissible(heis, rng, 0.2);
    for (double eps : {0.8, 0.05}) {
      auto sol = integrate(heis, FlowKind::randers(eps), pv.x, pv.v, 1.0, opts);
      CHECK(sol.residuals.c_eps_drift < 1e-8);
      CHECK(sol.residuals.randers_inv_drift < 1e-8);
    }
  }
}

TEST_CASE("pointwise eps -> 0 convergence of the randers spray") {
  auto heis = heisenberg_contact(-1);
  auto sphere = round_sphere_hopf(2);
  std::mt19937_64 rng(23);
  for (const auto& m : {heis, sphere}) {
    for (int trial = 0; trial < 20; ++trial) {
      PointVector pv = random_admissible(m, rng, 0.2);
      Vec limit = kropina_spray(m, pv.x, pv.v);
      double prev = std::numeric_limits<double>::infinity();
      for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
        const double err = (randers_spray(m, eps, pv.x, pv.v) - limit).norm();
        CHECK(err < prev);
        prev = err;
      }
      CHECK(prev < 1e-3 * std::max(1.0, limit.norm()));
    }
  }
}

TEST_CASE("fixed-step order measurement on a curved trajectory") {
  auto sphere = round_sphere_hopf(2);
  const Vec x0 = vec3(M_PI / 4 + 0.1, 0.2, 0.4);
  const Vec v0 = vec3(0.15, 1.0, 0.8);
  REQUIRE(PointVector::at(sphere, x0, v0).admissible());

  IntegrateOptions ref_opts;
  ref_opts.tol = 1e-13;
  auto ref = integrate(sphere, FlowKind::kropina(), x0, v0, 1.0, ref_opts);
  const Vec ref_end = ref.path.points.back();

  auto endpoint_err = [&](double h) {
    IntegrateOptions o;
    o.fixed_step = true;
    o.max_step = h;
    auto sol = integrate(sphere, FlowKind::kropina(), x0, v0, 1.0, o);
    return (sol.path.points.back() - ref_end).norm();
  };
  const double e1 = endpoint_err(1.0 / 40);
  const double e2 = endpoint_err(1.0 / 80);
  CHECK(e1 / e2 >= 16.0);  // order >= 4 under step halving
}

TEST_CASE("path length and energy of the flat segment") {
  auto m = flat_constant_form(2, vec2(-1.0, 0.0));
  DiscretePath seg;
  seg.params = Vec::LinSpaced(11, 0.0, 1.0);
  for (int k = 0; k <= 10; ++k) seg.points.push_back(vec2(k / 10.0, 0.0));
  CHECK(path_length(m, FlowKind::kropina(), seg) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(path_energy(m, seg) == doctest::Approx(0.125).epsilon(1e-12));

  // s^2 reparametrization: same image, same length, different energy
  DiscretePath rep;
  rep.params = Vec::LinSpaced(11, 0.0, 1.0);
  for (int k = 0; k <= 10; ++k) {
    const double s = k / 10.0;
    rep.points.push_back(vec2(s * s, 0.0));
  }
  CHECK(path_length(m, FlowKind::kropina(), rep) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(path_energy(m, rep) != doctest::Approx(0.125).epsilon(1e-3));
}

TEST_CASE("approximation inequality L_eps <= L on random admissible polylines") {
  std::vector<ManifoldModel> models;
  models.push_back(flat_constant_form(2, vec2(-1.0, 0.0)));
  models.push_back(heisenberg_contact(-1));
  models.push_back(round_sphere_hopf(2));
  std::mt19937_64 rng(29);
  for (const auto& m : models) {
    for (int trial = 0; trial < 100; ++trial) {
      DiscretePath p = random_admissible_polyline(m, rng);
      const double L = path_length(m, FlowKind::kropina(), p);
      for (double eps : {1.0, 0.1, 0.01}) {
        const double Le = path_length(m, FlowKind::randers(eps), p);
        CHECK(Le <= L + 1e-12);
      }
    }
  }
}

TEST_CASE("spacetime energy diagnostic") {
  auto m = flat_constant_form(2, vec2(-1.0, 0.0));

  // own lightlike lift: identically zero integrand
  auto sol = integrate(m, FlowKind::kropina(), vec2(0, 0), vec2(1, 0.3), 1.0);
  CHECK(std::abs(spacetime_energy_diagnostic(m, FlowKind::kropina(), sol)) < 1e-12);

  auto sphere = round_sphere_hopf(2);
  auto sols = integrate(sphere, FlowKind::kropina(), vec3(M_PI / 4, 0, 0), vec3(0.1, 1, 0.8),
                        0.8);
  CHECK(std::abs(spacetime_energy_diagnostic(sphere, FlowKind::kropina(), sols)) < 1e-10);

  // segment chosen with K(xdot) = -2 omega(xdot): constant lift gives E(path)
  auto seg = integrate(m, FlowKind::kropina(), vec2(0, 0), vec2(1.0, std::sqrt(3.0)), 1.0);
  std::vector<double> zero_tdot(seg.path.points.size(), 0.0);
  const double diag0 = spacetime_energy_diagnostic(m, FlowKind::kropina(), seg, zero_tdot);
  CHECK(diag0 == doctest::Approx(path_energy(m, seg.path)).epsilon(1e-10));
  CHECK(diag0 > 0.0);

  // perturbed lift tdot + 0.1 against the hand formula
  std::vector<double> tdot(seg.path.points.size());
  for (std::size_t k = 0; k < tdot.size(); ++k) tdot[k] = seg.speed_trace[k] + 0.1;
  const double diag = spacetime_energy_diagnostic(m, FlowKind::kropina(), seg, tdot);
  // 1/2 int (A + 2 B (tdot + .1)) with A = 4, B = -1, tdot = K = 2
  const double hand = 0.5 * (4.0 + 2.0 * (-1.0) * 2.1);
  CHECK(diag == doctest::Approx(hand).epsilon(1e-10));
}

TEST_CASE("cone exit and chart guard aborts") {
  auto m = flat_constant_form(2, vec2(-1.0, 0.0));
  // velocity pointing nearly along the cone boundary: the gate triggers at s=0
  CHECK_THROWS_AS(integrate(m, FlowKind::kropina(), vec2(0, 0), vec2(1e-8, 1.0), 1.0),
                  ConeExit);

  auto sphere = round_sphere_hopf(2);
  // head straight for the theta = 0 chart edge
  CHECK_THROWS_AS(
      integrate(sphere, FlowKind::kropina(), vec3(0.05, 0.0, 0.0), vec3(-1.0, 1.0, 1.0), 1.0),
      ChartGuard);
}

TEST_CASE("constant-speed reparametrization equalizes chord lengths") {
  auto m = flat_constant_form(2, vec2(-1.0, 0.0));
  DiscretePath p;
  p.params = Vec::LinSpaced(5, 0.0, 1.0);
  p.points = {vec2(0, 0), vec2(0.1, 0), vec2(0.2, 0), vec2(0.5, 0), vec2(1.0, 0)};
  DiscretePath q = reparametrize_constant_speed(m, FlowKind::kropina(), p);
  for (int k = 0; k + 1 < 4; ++k) {
    const double c0 = (q.points[k + 1] - q.points[k]).norm();
    const double c1 = (q.points[k + 2] - q.points[k + 1]).norm();
    CHECK(c0 == doctest::Approx(c1).epsilon(1e-9));
  }
}
