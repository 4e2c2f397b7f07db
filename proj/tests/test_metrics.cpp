#include <doctest.h>

#include <cmath>
#include <random>

#include "kropina/metrics.hpp"

using namespace kropina;

namespace {

Vec vec2(double a, double b) { return (Vec(2) << a, b).finished(); }
Vec vec3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }

ManifoldModel flat_minus_dx() { return flat_constant_form(2, vec2(-1.0, 0.0)); }

// random admissible point-vector on a model
PointVector random_admissible(const ManifoldModel& m, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit(0.2, 0.8);
  while (true) {
    Vec x(m.dim);
    for (int i = 0; i < m.dim; ++i) {
      double lo = m.chart.lo[i], hi = m.chart.hi[i];
      if (!m.chart.periodic[i] && hi - lo > 10.0) { lo = -2.0; hi = 2.0; }
      x[i] = lo + (hi - lo) * unit(rng);
    }
    Vec v(m.dim);
    for (int i = 0; i < m.dim; ++i) v[i] = gauss(rng);
    PointVector pv = PointVector::at(m, x, v);
    if (pv.admissible(1e-3)) return pv;
    pv = PointVector::at(m, x, Vec(-v));
    if (pv.admissible(1e-3)) return pv;
  }
}

}  // namespace

TEST_CASE("kropina value on the flat model") {
  auto m = flat_minus_dx();
  CHECK(kropina_value(m, PointVector::at(m, vec2(0, 0), vec2(1, 0))) == doctest::Approx(0.5));
  CHECK(kropina_value(m, PointVector::at(m, vec2(0, 0), vec2(1, 1))) == doctest::Approx(1.0));
  CHECK_THROWS_AS(kropina_value(m, PointVector::at(m, vec2(0, 0), vec2(-1, 0))),
                  InadmissibleVector);
  CHECK_THROWS_AS(kropina_value(m, PointVector::at(m, vec2(0, 0), vec2(0, 1))),
                  InadmissibleVector);
}

TEST_CASE("critical-wind indicatrix is the unit sphere translated by -W") {
  auto base = flat_minus_dx();
  ZermeloData data;
  data.wind = [](const Vec&) { return vec2(-1.0, 0.0); };
  auto ctx = kropina_from_wind(base, data, {vec2(0, 0), vec2(1, 1)});

  PointVector pv = PointVector::at(ctx, vec2(0, 0), vec2(2, 0));
  CHECK(kropina_value(ctx, pv) == doctest::Approx(1.0));
  Vec shifted = vec2(2, 0) + vec2(-1.0, 0.0);
  CHECK(shifted.norm() == doctest::Approx(1.0));

  // K = 1 vectors satisfy |v + W| = 1
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 100; ++trial) {
    Vec v = vec2(gauss(rng), gauss(rng));
    PointVector cand = PointVector::at(ctx, vec2(0, 0), v);
    if (!cand.admissible(1e-6)) continue;
    const double K = kropina_value(ctx, cand);
    Vec unit_v = v / K;  // homogeneity: K(v/K) = 1
    CHECK((unit_v + vec2(-1.0, 0.0)).norm() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("kropina_from_wind matches the explicit one-form model") {
  auto base = flat_minus_dx();
  ZermeloData data;
  data.wind = [](const Vec&) { return vec2(-1.0, 0.0); };
  auto ctx = kropina_from_wind(base, data, {vec2(0, 0)});
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    PointVector pv = random_admissible(base, rng);
    PointVector pw = PointVector::at(ctx, pv.x, pv.v);
    CHECK(kropina_value(ctx, pw) == doctest::Approx(kropina_value(base, pv)).epsilon(1e-12));
  }
}

TEST_CASE("non-critical wind is rejected") {
  auto base = flat_minus_dx();
  ZermeloData data;
  data.wind = [](const Vec&) { return vec2(-0.9, 0.0); };
  CHECK_THROWS_AS(kropina_from_wind(base, data, {vec2(0, 0)}), NotCriticalWind);
}

TEST_CASE("hopf wind: admissible cone is g0(V, v) < 0") {
  auto sphere = round_sphere_hopf(2);
  ZermeloData data;
  data.wind = [&sphere](const Vec& x) { return Vec(sphere.killing_field(x)); };
  Vec check = vec3(M_PI / 4, 0.5, 1.0);
  auto ctx = kropina_from_wind(sphere, data, {check});
  // v = -V has g0(V,v) = -1 < 0: admissible; v = +V is not
  Vec V = sphere.killing_field(check);
  CHECK(PointVector::at(ctx, check, Vec(-V)).admissible());
  CHECK_FALSE(PointVector::at(ctx, check, V).admissible());
}

TEST_CASE("fundamental tensor: homogeneity identity and positivity") {
  std::vector<ManifoldModel> models;
  models.push_back(flat_minus_dx());
  models.push_back(heisenberg_contact(+1));
  models.push_back(round_sphere_hopf(2));
  std::mt19937_64 rng(31);
  for (const auto& m : models) {
    for (int trial = 0; trial < 34; ++trial) {
      PointVector pv = random_admissible(m, rng);
      Mat gv = fundamental_tensor(m, pv);
      const double K = kropina_value(m, pv);
      CHECK(pv.v.dot(gv * pv.v) == doctest::Approx(K * K).epsilon(1e-8));
      Eigen::SelfAdjointEigenSolver<Mat> eig(gv);
      CHECK(eig.eigenvalues().minCoeff() > 0.0);
    }
  }
}

TEST_CASE("fundamental tensor matches the finite-difference hessian of K^2/2") {
  auto m = heisenberg_contact(+1);
  std::mt19937_64 rng(37);
  auto half_k2 = [&](const Vec& x, const Vec& v) {
    PointVector pv = PointVector::at(m, x, v);
    const double K = kropina_value(m, pv);
    return 0.5 * K * K;
  };
  for (int trial = 0; trial < 5; ++trial) {
    PointVector pv = random_admissible(m, rng);
    // stay deep inside the cone so the FD stencil sees bounded curvature
    while (-pv.omega_v < 0.4 * std::sqrt(pv.g0_vv)) pv = random_admissible(m, rng);
    Mat gv = fundamental_tensor(m, pv);
    auto fd_hess_err = [&](double h) {
      Mat H(3, 3);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          Vec ei = Vec::Zero(3), ej = Vec::Zero(3);
          ei[i] = h; ej[j] = h;
          H(i, j) = (half_k2(pv.x, pv.v + ei + ej) - half_k2(pv.x, pv.v + ei - ej) -
                     half_k2(pv.x, pv.v - ei + ej) + half_k2(pv.x, pv.v - ei - ej)) /
                    (4 * h * h);
        }
      return (H - gv).cwiseAbs().maxCoeff();
    };
    const double e1 = fd_hess_err(1e-3);
    CHECK(e1 < 1e-4);
    const double e2 = fd_hess_err(5e-4);
    if (e1 > 1e-9) CHECK(e1 / e2 > 2.5);  // second-order convergence
  }
}

TEST_CASE("randers approximation values on the flat model") {
  auto m = flat_minus_dx();
  PointVector pv = PointVector::at(m, vec2(0, 0), vec2(1, 0));
  CHECK(randers_value(m, 1.0, pv) == doctest::Approx(std::sqrt(2.0) - 1.0));
  CHECK(randers_value(m, 0.01, pv) == doctest::Approx((std::sqrt(1.01) - 1.0) / 0.01));
  CHECK(std::abs(randers_value(m, 0.01, pv) - 0.498756) < 1e-6);

  PointVector rev = PointVector::at(m, vec2(0, 0), vec2(-1, 0));
  CHECK(randers_value(m, 1.0, rev) == doctest::Approx(std::sqrt(2.0) + 1.0));

  CHECK_THROWS_AS(randers_value(m, 0.0, pv), std::invalid_argument);
  CHECK_THROWS_AS(randers_value(m, 1.5, pv), std::invalid_argument);
}

TEST_CASE("homogeneity of K and F_eps") {
  auto m = heisenberg_contact(+1);
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> lam(0.1, 8.0);
  for (int trial = 0; trial < 100; ++trial) {
    PointVector pv = random_admissible(m, rng);
    const double l = lam(rng);
    PointVector scaled = PointVector::at(m, pv.x, Vec(l * pv.v));
    CHECK(kropina_value(m, scaled) ==
          doctest::Approx(l * kropina_value(m, pv)).epsilon(1e-12));
    for (double eps : {1.0, 0.37, 0.01})
      CHECK(randers_value(m, eps, scaled) ==
            doctest::Approx(l * randers_value(m, eps, pv)).epsilon(1e-12));
  }
}

TEST_CASE("reversal antisymmetry of the raw ratio; -v fails the gate") {
  auto m = flat_minus_dx();
  std::mt19937_64 rng(43);
  auto raw = [&](const Vec& x, const Vec& v) {
    // the rational expression without the admissibility gate
    const double A = v.dot(m.metric_at(x) * v);
    const double B = m.one_form_at(x).dot(v);
    return -A / (2.0 * B);
  };
  for (int trial = 0; trial < 50; ++trial) {
    PointVector pv = random_admissible(m, rng);
    CHECK(raw(pv.x, Vec(-pv.v)) == doctest::Approx(-raw(pv.x, pv.v)).epsilon(1e-12));
    CHECK_FALSE(PointVector::at(m, pv.x, Vec(-pv.v)).admissible());
  }
}

TEST_CASE("monotone approximation F_eps <= K on the admissible cone") {
  std::vector<ManifoldModel> models;
  models.push_back(flat_minus_dx());
  models.push_back(heisenberg_contact(+1));
  models.push_back(round_sphere_hopf(2));
  std::mt19937_64 rng(47);
  for (const auto& m : models) {
    for (int trial = 0; trial < 50; ++trial) {
      PointVector pv = random_admissible(m, rng);
      const double K = kropina_value(m, pv);
      double prev = 0.0;
      for (double eps : {1.0, 0.1, 0.01}) {
        const double F = randers_value(m, eps, pv);
        CHECK(F <= K + 1e-12);
        CHECK(F >= prev - 1e-12);  // increases toward K as eps decreases
        prev = F;
      }
    }
  }
}

TEST_CASE("katok zermelo data reproduces the eps-family metric") {
  auto sphere = round_sphere_hopf(2);
  std::mt19937_64 rng(53);
  std::normal_distribution<double> gauss;
  for (double eps : {0.75, 0.35, 0.05}) {
    for (int trial = 0; trial < 30; ++trial) {
      PointVector pv = random_admissible(sphere, rng);
      Vec v(3);
      for (int i = 0; i < 3; ++i) v[i] = gauss(rng);
      PointZermelo z = katok_zermelo_data(sphere, eps, pv.x);
      // critical wind scaling: |W_eps|_h < 1
      const double F_z = zermelo_randers_value(z.h, z.wind, v);
      const double F_k = randers_value(sphere, eps, PointVector::at(sphere, pv.x, v),
                                       RandersFamily::KatokZermelo);
      CHECK(F_z == doctest::Approx(F_k).epsilon(1e-9));
    }
  }
}
