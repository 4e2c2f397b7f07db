#include <doctest.h>

#include <cmath>
#include <random>

#include "kropina/closed.hpp"

using namespace kropina;

namespace {

Vec vec2(double a, double b) { return (Vec(2) << a, b).finished(); }
Vec vec3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }

// closed fiber loop on the S^3 model, optionally perturbed
DiscretePath fiber_loop(int n, double perturb = 0.0, int mode = 1) {
  DiscretePath loop;
  loop.closed = true;
  loop.params = Vec::LinSpaced(n + 1, 0.0, 1.0);
  for (int k = 0; k <= n; ++k) {
    const double s = static_cast<double>(k) / n;
    const double a = 2 * M_PI * s;
    Vec x = vec3(M_PI / 4 + perturb * std::sin(mode * a), a, a + perturb * std::cos(a));
    loop.points.push_back(x);
  }
  loop.points.back() = loop.points.front() + vec3(0.0, 2 * M_PI, 2 * M_PI);
  return loop;
}

// winding (wx, wy) loop on the unit torus
DiscretePath torus_loop(int n, int wx, int wy, double c = 0.35, double perturb = 0.0) {
  DiscretePath loop;
  loop.closed = true;
  loop.params = Vec::LinSpaced(n + 1, 0.0, 1.0);
  for (int k = 0; k <= n; ++k) {
    const double s = static_cast<double>(k) / n;
    loop.points.push_back(vec2(0.1 + wx * s, c + wy * s + perturb * std::sin(2 * M_PI * s)));
  }
  return loop;
}

ManifoldModel torus_with_killing() {
  auto m = flat_torus(2, vec2(-1.0, 0.0));
  m.killing_field = [](const Vec&) { return Vec(vec2(1.0, 0.0)); };
  return m;
}

}  // namespace

TEST_CASE("first variation vanishes on killing fibers and straight torus loops") {
  auto sphere = round_sphere_hopf(2);
  DiscretePath orbit = fiber_loop(96);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 20; ++trial) {
    // random periodic xi from a few fourier modes, analytic derivative
    Vec c1(3), c2(3), c3(3);
    for (int i = 0; i < 3; ++i) {
      c1[i] = gauss(rng);
      c2[i] = gauss(rng);
      c3[i] = gauss(rng);
    }
    std::vector<Vec> xi, xid;
    for (int k = 0; k < 96; ++k) {
      const double s = k / 96.0;
      xi.push_back(c1 * std::sin(2 * M_PI * s) + c2 * std::cos(4 * M_PI * s) + c3);
      xid.push_back(c1 * 2 * M_PI * std::cos(2 * M_PI * s) -
                    c2 * 4 * M_PI * std::sin(4 * M_PI * s));
    }
    CHECK(std::abs(first_variation(sphere, orbit, xi, xid)) < 1e-6);
  }

  auto torus = flat_torus(2, vec2(-1.0, 0.0));
  DiscretePath straight = torus_loop(64, 1, 0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Vec> xi, xid;
    Vec c1(2), c2(2);
    for (int i = 0; i < 2; ++i) {
      c1[i] = gauss(rng);
      c2[i] = gauss(rng);
    }
    for (int k = 0; k < 64; ++k) {
      const double s = k / 64.0;
      xi.push_back(c1 * std::sin(2 * M_PI * s) + c2);
      xid.push_back(c1 * 2 * M_PI * std::cos(2 * M_PI * s));
    }
    CHECK(std::abs(first_variation(torus, straight, xi, xid)) < 1e-12);
  }
}

TEST_CASE("first variation matches finite differences of the loop length") {
  auto torus = flat_torus(2, vec2(-1.0, 0.0));
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss;
  const int n = 256;
  DiscretePath loop = torus_loop(n, 1, 0, 0.35, 0.05);  // not a geodesic

  for (int trial = 0; trial < 10; ++trial) {
    Vec c1(2), c2(2);
    for (int i = 0; i < 2; ++i) {
      c1[i] = gauss(rng);
      c2[i] = gauss(rng);
    }
    std::vector<Vec> xi, xid;
    for (int k = 0; k < n; ++k) {
      const double s = static_cast<double>(k) / n;
      xi.push_back(c1 * std::sin(2 * M_PI * s) + c2 * std::cos(2 * M_PI * s));
      xid.push_back(2 * M_PI *
                    (c1 * std::cos(2 * M_PI * s) - c2 * std::sin(2 * M_PI * s)));
    }
    const double fv = first_variation(torus, loop, xi, xid);

    auto length_of = [&](double h) {
      DiscretePath p = loop;
      for (int k = 0; k < n; ++k) p.points[k] += h * xi[k];
      p.points[n] = p.points[0] + (loop.points[n] - loop.points[0]);
      return path_length(torus, FlowKind::kropina(), p);
    };
    const double h = 1e-5;
    const double fd = (length_of(h) - length_of(-h)) / (2 * h);
    CHECK(fv == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("first variation observed order in the FD step is ~2") {
  auto torus = flat_torus(2, vec2(-1.0, 0.0));
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> phase(0.0, 2 * M_PI);
  std::uniform_real_distribution<double> amp(0.1, 0.45);
  const int n = 1024;
  for (int trial = 0; trial < 5; ++trial) {
    const double a1 = 0.04, a2 = 0.02, p1 = phase(rng), p2 = phase(rng);
    const double b1 = amp(rng), b2 = amp(rng), q1 = phase(rng), q2 = phase(rng);
    DiscretePath loop;
    loop.closed = true;
    loop.params = Vec::LinSpaced(n + 1, 0.0, 1.0);
    loop.velocities.resize(n + 1);
    for (int k = 0; k <= n; ++k) {
      const double s = static_cast<double>(k) / n;
      loop.points.push_back(vec2(0.1 + s, 0.4 + a1 * std::sin(2 * M_PI * s + p1) +
                                              a2 * std::cos(4 * M_PI * s + p2)));
      loop.velocities[k] = vec2(1.0, a1 * 2 * M_PI * std::cos(2 * M_PI * s + p1) -
                                         a2 * 4 * M_PI * std::sin(4 * M_PI * s + p2));
    }
    loop.points[n] = loop.points[0] + vec2(1, 0);
    std::vector<Vec> xi, xid;
    for (int k = 0; k < n; ++k) {
      const double s = static_cast<double>(k) / n;
      xi.push_back(vec2(b1 * std::sin(2 * M_PI * s + q1), b2 * std::cos(4 * M_PI * s + q2)));
      xid.push_back(vec2(b1 * 2 * M_PI * std::cos(2 * M_PI * s + q1),
                         -b2 * 4 * M_PI * std::sin(4 * M_PI * s + q2)));
    }
    const double fv = first_variation(torus, loop, xi, xid);
    auto fd_err = [&](double h) {
      DiscretePath pp = loop, pm = loop;
      pp.velocities.clear();
      pm.velocities.clear();
      for (int k = 0; k < n; ++k) {
        pp.points[k] += h * xi[k];
        pm.points[k] -= h * xi[k];
      }
      pp.points[n] = pp.points[0] + vec2(1, 0);
      pm.points[n] = pm.points[0] + vec2(1, 0);
      const double fd = (path_length(torus, FlowKind::kropina(), pp) -
                         path_length(torus, FlowKind::kropina(), pm)) /
                        (2 * h);
      return std::abs(fd - fv);
    };
    const double e1 = fd_err(1e-1);
    const double e2 = fd_err(5e-2);
    if (e1 < 1e-10) continue;  // symmetric draw with vanishing curvature term
    const double order = std::log2(e1 / e2);
    CHECK(order >= 1.8);
  }
}

TEST_CASE("closed geodesic in the (1,0) torus class") {
  auto torus = flat_torus(2, vec2(-1.0, 0.0));
  LoopProblem prob;
  prob.seed_loop = torus_loop(24, 1, 0, 0.35, 0.08);
  prob.discretization = 48;
  auto res = closed_geodesic_in_class(torus, prob);
  REQUIRE(res.status == SolveStatus::Converged);
  CHECK(res.length == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(res.first_variation_residual < 1e-6);
  // re-integration closes
  CHECK(res.endpoint_error < 1e-6);

  // brute force: random perturbations in class are never shorter
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 100; ++trial) {
    DiscretePath p = torus_loop(24, 1, 0, 0.35, 0.0);
    for (int k = 1; k < 24; ++k) p.points[k] += 0.1 * vec2(gauss(rng), gauss(rng));
    p.points[24] = p.points[0] + vec2(1, 0);
    bool admissible = true;
    for (int k = 0; k < 24; ++k)
      admissible = admissible && (p.points[k + 1][0] - p.points[k][0]) > 1e-9;
    if (!admissible) continue;
    CHECK(path_length(torus, FlowKind::kropina(), p) >= res.length - 1e-9);
  }
}

TEST_CASE("torus (0,1) class has no admissible loop") {
  auto torus = flat_torus(2, vec2(-1.0, 0.0));
  LoopProblem prob;
  prob.seed_loop = torus_loop(24, 0, 1);
  auto res = closed_geodesic_in_class(torus, prob);
  CHECK(res.status == SolveStatus::NoAdmissibleSeed);
}

TEST_CASE("S^3 seeded near a hopf circle converges to one of length pi") {
  auto sphere = round_sphere_hopf(2);
  LoopProblem prob;
  prob.seed_loop = fiber_loop(32, 0.05);
  prob.discretization = 128;
  auto res = closed_geodesic_in_class(sphere, prob);
  REQUIRE(res.status == SolveStatus::Converged);
  CHECK(res.length == doctest::Approx(M_PI).epsilon(1e-3 / M_PI));
  CHECK(res.endpoint_error < 1e-6);
  CHECK(res.first_variation_residual < 1e-5);

  // supported on a hopf circle: eta constant, phase difference constant
  double eta_min = 1e9, eta_max = -1e9, dev = 0.0;
  const auto& pts = res.solution.path.points;
  const double diff0 = pts.front()[1] - pts.front()[2];
  for (const Vec& x : pts) {
    eta_min = std::min(eta_min, x[0]);
    eta_max = std::max(eta_max, x[0]);
    dev = std::max(dev, std::abs((x[1] - x[2]) - diff0));
  }
  CHECK(eta_max - eta_min < 1e-3);
  CHECK(dev < 1e-3);
}

TEST_CASE("killing orbit candidates on the hopf sphere") {
  auto sphere = round_sphere_hopf(2);
  auto cands = killing_orbit_candidates(sphere);
  REQUIRE(cands.size() >= 2);
  for (const auto& c : cands) {
    CHECK(c.orbit_closure < 1e-8);
    CHECK(c.f_value == doctest::Approx(-1.0).epsilon(1e-8));
    CHECK(c.criticality_residual < 1e-7);
    CHECK(c.first_variation_res < 1e-6);
    CHECK(c.period == doctest::Approx(2 * M_PI).epsilon(1e-8));
    CHECK(c.kropina_length == doctest::Approx(M_PI).epsilon(1e-6));
  }
}

TEST_CASE("killing orbit candidates on the torus") {
  auto torus = torus_with_killing();
  auto cands = killing_orbit_candidates(torus);
  REQUIRE(cands.size() >= 2);
  for (const auto& c : cands) {
    CHECK(c.orbit_closure < 1e-8);
    CHECK(c.first_variation_res < 1e-6);
    CHECK(c.period == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(c.kropina_length == doctest::Approx(0.5).epsilon(1e-8));
  }
}

TEST_CASE("positive omega(Y) violates the orbit-candidate hypotheses") {
  auto m = flat_torus(2, vec2(1.0, 0.0));  // omega = +dx
  m.killing_field = [](const Vec&) { return Vec(vec2(1.0, 0.0)); };
  CHECK_THROWS_AS(killing_orbit_candidates(m), HypothesisViolated);
}

TEST_CASE("katok closed forms") {
  auto p = katok_lengths(0.75);
  CHECK(p.first == doctest::Approx(4 * M_PI / 3).epsilon(1e-14));
  CHECK(p.second == doctest::Approx(4 * M_PI).epsilon(1e-14));

  auto both = katok_lengths(1.0);
  CHECK(both.first == doctest::Approx(2 * M_PI));
  CHECK(both.second == doctest::Approx(2 * M_PI));

  CHECK(katok_lengths(1e-9).first == doctest::Approx(M_PI).epsilon(1e-8));
  CHECK_THROWS_AS(katok_lengths(0.0), std::invalid_argument);
  CHECK_THROWS_AS(katok_lengths(1.5), std::invalid_argument);
}

TEST_CASE("katok numeric lengths track the closed form") {
  auto sphere = round_sphere_hopf(2);
  for (double eps : {0.75, 0.1}) {
    auto num = katok_numeric_short(sphere, eps);
    CHECK(num.length == doctest::Approx(katok_lengths(eps).first).epsilon(1e-9));
    CHECK(num.closure_error < 1e-8);
    CHECK(num.circle_deviation < 1e-8);
  }
}

TEST_CASE("perturbed orbit lengths on the hopf sphere") {
  auto sphere = round_sphere_hopf(2);
  for (double alpha : {0.25, 0.5, 0.75}) {
    auto r = perturbed_orbit_lengths(sphere, alpha);
    CHECK(r.orbit_g0_length == doctest::Approx(2 * M_PI).epsilon(1e-8));
    CHECK(r.closed_form == doctest::Approx(2 * M_PI / (1 + std::sqrt(alpha))).epsilon(1e-12));
    CHECK(r.numeric == doctest::Approx(r.closed_form).epsilon(1e-6));
  }
  // limits
  CHECK(perturbed_orbit_lengths(sphere, 1.0 - 1e-10).closed_form ==
        doctest::Approx(M_PI).epsilon(1e-5));
  CHECK(perturbed_orbit_lengths(sphere, 1e-10).closed_form ==
        doctest::Approx(2 * M_PI).epsilon(1e-5));
  CHECK_THROWS_AS(perturbed_orbit_lengths(sphere, 0.0), std::invalid_argument);
}
