#include <doctest.h>

#include <cmath>
#include <random>

#include "kropina/manifold.hpp"

using namespace kropina;

namespace {

// round S^2 in the spherical chart (theta, phi), g = diag(1, sin^2 theta)
ManifoldModel round_s2() {
  ManifoldModel m;
  m.name = "s2";
  m.dim = 2;
  m.chart.lo = Vec::Zero(2);
  m.chart.hi = (Vec(2) << M_PI, 2 * M_PI).finished();
  m.chart.periodic = {false, true};
  m.chart.guard = 1e-3;
  m.metric_at = [](const Vec& x) {
    Mat g = Mat::Identity(2, 2);
    g(1, 1) = std::sin(x[0]) * std::sin(x[0]);
    return g;
  };
  m.one_form_at = [](const Vec& x) {
    Vec om(2);
    om << 0.0, -std::sin(x[0]) * std::sin(x[0]);
    return om;
  };
  attach_fd_jets(m);
  return m;
}

Vec vec2(double a, double b) { return (Vec(2) << a, b).finished(); }
Vec vec3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }

std::vector<ManifoldModel> builtins() {
  std::vector<ManifoldModel> models;
  models.push_back(flat_constant_form(2, vec2(-1.0, 0.0)));
  models.push_back(flat_torus(2, vec2(-1.0, 0.0)));
  models.push_back(heisenberg_contact(+1));
  models.push_back(round_sphere_hopf(2));
  return models;
}

Vec random_chart_point(const ManifoldModel& m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.15, 0.85);
  Vec x(m.dim);
  for (int i = 0; i < m.dim; ++i) {
    double lo = m.chart.lo[i], hi = m.chart.hi[i];
    if (!m.chart.periodic[i] && hi - lo > 10.0) {  // big boxes: stay near origin
      lo = -2.0;
      hi = 2.0;
    }
    x[i] = lo + (hi - lo) * unit(rng);
  }
  return x;
}

}  // namespace

TEST_CASE("christoffel symbols vanish for flat models") {
  auto flat = flat_constant_form(2, vec2(-1.0, 0.0));
  auto gamma = christoffel_at(flat, vec2(0.3, -0.7));
  for (const auto& gi : gamma) CHECK(gi.cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  auto heis = heisenberg_contact(+1);
  auto gh = christoffel_at(heis, vec3(0.2, 0.5, -0.1));
  for (const auto& gi : gh) CHECK(gi.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("christoffel symbols of the round 2-sphere chart") {
  auto s2 = round_s2();
  // at the equator both classic symbols vanish
  auto gamma_eq = christoffel_at(s2, vec2(M_PI / 2, 0.0));
  CHECK(gamma_eq[0](1, 1) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(gamma_eq[1](0, 1) == doctest::Approx(0.0).epsilon(1e-9));

  // away from it: Gamma^theta_{phi phi} = -sin cos, Gamma^phi_{theta phi} = cot
  const double th = M_PI / 3;
  auto gamma = christoffel_at(s2, vec2(th, 1.0));
  CHECK(gamma[0](1, 1) == doctest::Approx(-std::sin(th) * std::cos(th)).epsilon(1e-8));
  CHECK(gamma[1](0, 1) == doctest::Approx(1.0 / std::tan(th)).epsilon(1e-8));
}

TEST_CASE("christoffel out-of-domain point raises a domain error") {
  auto s2 = round_s2();
  CHECK_THROWS_AS(christoffel_at(s2, vec2(4.0, 0.0)), DomainError);
}

TEST_CASE("d_omega is zero for constant forms and +-1 on the contact model") {
  auto flat = flat_constant_form(3, vec3(-1.0, 0.0, 0.0));
  CHECK(d_omega_at(flat, vec3(0.1, 0.2, 0.3)).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  // omega = -(dz - y dx)
  auto heis = heisenberg_contact(-1);
  Mat Om = d_omega_at(heis, vec3(0.4, -0.2, 0.9));
  CHECK(Om(0, 1) == doctest::Approx(-1.0));
  CHECK(Om(1, 0) == doctest::Approx(1.0));
  CHECK((Om + Om.transpose()).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  auto heis_pos = heisenberg_contact(+1);
  Mat Om2 = d_omega_at(heis_pos, vec3(0.4, -0.2, 0.9));
  CHECK(Om2(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("analytic jets match central differences at second order") {
  auto sphere = round_sphere_hopf(2);
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    Vec x = random_chart_point(sphere, rng);
    auto jets = sphere.metric_jet(x);
    Mat om_jet = sphere.one_form_jet(x);

    auto fd_err = [&](double h) {
      double worst = 0.0;
      Vec xp = x;
      for (int k = 0; k < sphere.dim; ++k) {
        xp[k] = x[k] + h;
        Mat gp = sphere.metric_at(xp);
        Vec op = sphere.one_form_at(xp);
        xp[k] = x[k] - h;
        Mat gm = sphere.metric_at(xp);
        Vec om = sphere.one_form_at(xp);
        xp[k] = x[k];
        worst = std::max(worst, ((gp - gm) / (2 * h) - jets[k]).cwiseAbs().maxCoeff());
        worst = std::max(worst, ((op - om) / (2 * h) - om_jet.col(k)).cwiseAbs().maxCoeff());
      }
      return worst;
    };
    const double e1 = fd_err(1e-3);
    const double e2 = fd_err(5e-4);
    if (e1 > 1e-12) CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.35));
  }
}

TEST_CASE("sharp and flat are inverse metric duals") {
  auto flat_model = flat_constant_form(2, vec2(0.0, -1.0));
  Vec v = sharp(flat_model, vec2(0.0, 0.0), vec2(0.0, -1.0));
  CHECK(v[0] == doctest::Approx(0.0));
  CHECK(v[1] == doctest::Approx(-1.0));

  auto sphere = round_sphere_hopf(2);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 100; ++trial) {
    Vec x = random_chart_point(sphere, rng);
    Vec alpha(3);
    for (int i = 0; i < 3; ++i) alpha[i] = gauss(rng);
    Vec back = flat(sphere, x, sharp(sphere, x, alpha));
    CHECK((back - alpha).cwiseAbs().maxCoeff() < 1e-12);
  }

  // |sharp(omega)|_g equals the dual norm of omega
  Vec x = random_chart_point(sphere, rng);
  Vec om = sphere.one_form_at(x);
  Vec oms = sharp(sphere, x, om);
  const double n_vec = std::sqrt(oms.dot(sphere.metric_at(x) * oms));
  CHECK(n_vec == doctest::Approx(omega_norm(sphere, x)).epsilon(1e-12));
}

TEST_CASE("builtins: SPD metric, symmetric christoffel, antisymmetric d_omega") {
  std::mt19937_64 rng(23);
  for (const auto& model : builtins()) {
    for (int trial = 0; trial < 250; ++trial) {
      Vec x = random_chart_point(model, rng);
      Mat g = model.metric_at(x);
      CHECK((g - g.transpose()).cwiseAbs().maxCoeff() < 1e-14);
      Eigen::SelfAdjointEigenSolver<Mat> eig(g);
      CHECK(eig.eigenvalues().minCoeff() > 0.0);

      auto gamma = christoffel_at(model, x);
      for (const auto& gi : gamma)
        CHECK((gi - gi.transpose()).cwiseAbs().maxCoeff() < 1e-10);

      Mat Om = d_omega_at(model, x);
      CHECK((Om + Om.transpose()).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("wedge density: contact model nonzero everywhere, flat form zero") {
  auto heis = heisenberg_contact(+1);
  auto flat = flat_constant_form(3, vec3(0.0, 0.0, -1.0));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Vec x = vec3(unit(rng), unit(rng), unit(rng));
    CHECK(std::abs(wedge_density3(heis, x)) == doctest::Approx(1.0));
    CHECK(wedge_density3(flat, x) == doctest::Approx(0.0));
  }
}

TEST_CASE("hopf sphere: unit one-form, unit killing field, omega(V) = -1") {
  auto sphere = round_sphere_hopf(2);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Vec x = random_chart_point(sphere, rng);
    CHECK(omega_norm(sphere, x) == doctest::Approx(1.0).epsilon(1e-10));
    Vec V = sphere.killing_field(x);
    CHECK(V.dot(sphere.metric_at(x) * V) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(sphere.one_form_at(x).dot(V) == doctest::Approx(-1.0).epsilon(1e-10));
  }
}

TEST_CASE("hopf sphere S^5 keeps the same structure") {
  auto sphere = round_sphere_hopf(3);
  CHECK(sphere.dim == 5);
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Vec x = random_chart_point(sphere, rng);
    CHECK(omega_norm(sphere, x) == doctest::Approx(1.0).epsilon(1e-9));
    Vec V = sphere.killing_field(x);
    CHECK(sphere.one_form_at(x).dot(V) == doctest::Approx(-1.0).epsilon(1e-9));
  }
}

TEST_CASE("chart guard band and periodic wrap") {
  auto sphere = round_sphere_hopf(2);
  CHECK(sphere.chart.contains(vec3(0.0005, 1.0, 1.0)));
  CHECK_FALSE(sphere.chart.in_guarded(vec3(0.0005, 1.0, 1.0)));
  CHECK(sphere.chart.in_guarded(vec3(M_PI / 4, -5.0, 100.0)));  // phi wraps

  auto torus = flat_torus(2, vec2(-1.0, 0.0));
  Vec w = torus.chart.wrap(vec2(2.25, -0.5));
  CHECK(w[0] == doctest::Approx(0.25));
  CHECK(w[1] == doctest::Approx(0.5));
}
