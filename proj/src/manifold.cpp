#include "kropina/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace kropina {

int worker_count() {
  static const int cached = [] {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    if (const char* env = std::getenv("KROPINA_NAV_THREADS")) {
      int cap = std::atoi(env);
      if (cap >= 1) hw = std::min(hw, cap);
    }
    return hw;
  }();
  return cached;
}

Vec ChartDomain::wrap(const Vec& x) const {
  Vec w = x;
  for (int i = 0; i < dim(); ++i) {
    if (!periodic[i]) continue;
    double span = hi[i] - lo[i];
    w[i] = lo[i] + std::fmod(std::fmod(x[i] - lo[i], span) + span, span);
  }
  return w;
}

bool ChartDomain::contains(const Vec& x) const {
  for (int i = 0; i < dim(); ++i) {
    if (periodic[i]) continue;
    if (x[i] < lo[i] || x[i] > hi[i]) return false;
  }
  return true;
}

bool ChartDomain::in_guarded(const Vec& x) const {
  for (int i = 0; i < dim(); ++i) {
    if (periodic[i]) continue;
    if (x[i] < lo[i] + guard || x[i] > hi[i] - guard) return false;
  }
  return true;
}

void ManifoldModel::require_inside(const Vec& x, const char* where) const {
  if (x.size() != dim)
    throw DomainError(std::string(where) + ": point dimension " + std::to_string(x.size()) +
                      " != model dimension " + std::to_string(dim));
  if (!chart.contains(x))
    throw DomainError(std::string(where) + ": point outside chart domain of model '" + name + "'");
}

std::vector<Mat> christoffel_at(const ManifoldModel& model, const Vec& x) {
  model.require_inside(x, "manifold.christoffel_at");
  const int n = model.dim;
  Mat g = model.metric_at(x);
  std::vector<Mat> jet = model.metric_jet(x);
  Eigen::LLT<Mat> llt(g);

  // T[l](j,k) = (d_j g_lk + d_k g_jl - d_l g_jk) / 2
  std::vector<Mat> gamma(n, Mat::Zero(n, n));
  Mat t(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      for (int l = 0; l < n; ++l)
        t(l, k) = 0.5 * (jet[j](l, k) + jet[k](j, l) - jet[l](j, k));
      Vec col = llt.solve(t.col(k));
      for (int i = 0; i < n; ++i) gamma[i](j, k) = col[i];
    }
  // symmetrize against roundoff in the lower indices
  for (int i = 0; i < n; ++i) gamma[i] = 0.5 * (gamma[i] + gamma[i].transpose()).eval();
  return gamma;
}

Mat d_omega_at(const ManifoldModel& model, const Vec& x) {
  model.require_inside(x, "manifold.d_omega_at");
  Mat jet = model.one_form_jet(x);  // (i,k) = d_k omega_i
  return jet.transpose() - jet;     // (i,j) = d_i omega_j - d_j omega_i
}

Vec sharp(const ManifoldModel& model, const Vec& x, const Vec& covector) {
  model.require_inside(x, "manifold.sharp");
  return model.metric_at(x).llt().solve(covector);
}

Vec flat(const ManifoldModel& model, const Vec& x, const Vec& vector) {
  model.require_inside(x, "manifold.flat");
  return model.metric_at(x) * vector;
}

double omega_norm(const ManifoldModel& model, const Vec& x) {
  Vec om = model.one_form_at(x);
  return std::sqrt(om.dot(model.metric_at(x).llt().solve(om)));
}

double wedge_density3(const ManifoldModel& model, const Vec& x) {
  if (model.dim == 2) return 0.0;
  if (model.dim != 3)
    throw std::invalid_argument("manifold.wedge_density3: defined for dim <= 3 only");
  Vec om = model.one_form_at(x);
  Mat Om = d_omega_at(model, x);
  return om[0] * Om(1, 2) + om[1] * Om(2, 0) + om[2] * Om(0, 1);
}

double chart_distance(const ManifoldModel& model, const Vec& a, const Vec& b) {
  Vec d = a - b;
  for (int i = 0; i < model.dim; ++i) {
    if (!model.chart.periodic[i]) continue;
    const double span = model.chart.hi[i] - model.chart.lo[i];
    d[i] = std::remainder(d[i], span);
  }
  return d.norm();
}

void attach_fd_jets(ManifoldModel& model, double h) {
  const int n = model.dim;
  if (!model.metric_jet) {
    auto metric = model.metric_at;
    model.metric_jet = [metric, n, h](const Vec& x) {
      std::vector<Mat> jet(n);
      Vec xp = x;
      for (int k = 0; k < n; ++k) {
        xp[k] = x[k] + 2 * h;
        Mat f2p = metric(xp);
        xp[k] = x[k] + h;
        Mat f1p = metric(xp);
        xp[k] = x[k] - h;
        Mat f1m = metric(xp);
        xp[k] = x[k] - 2 * h;
        Mat f2m = metric(xp);
        xp[k] = x[k];
        jet[k] = (-f2p + 8.0 * f1p - 8.0 * f1m + f2m) / (12.0 * h);
      }
      return jet;
    };
  }
  if (!model.one_form_jet) {
    auto form = model.one_form_at;
    model.one_form_jet = [form, n, h](const Vec& x) {
      Mat jet(n, n);
      Vec xp = x;
      for (int k = 0; k < n; ++k) {
        xp[k] = x[k] + 2 * h;
        Vec f2p = form(xp);
        xp[k] = x[k] + h;
        Vec f1p = form(xp);
        xp[k] = x[k] - h;
        Vec f1m = form(xp);
        xp[k] = x[k] - 2 * h;
        Vec f2m = form(xp);
        xp[k] = x[k];
        jet.col(k) = (-f2p + 8.0 * f1p - 8.0 * f1m + f2m) / (12.0 * h);
      }
      return jet;
    };
  }
}

// --- builtins --------------------------------------------------------------

namespace {

ChartDomain box_domain(int dim, double half_width) {
  ChartDomain d;
  d.lo = Vec::Constant(dim, -half_width);
  d.hi = Vec::Constant(dim, half_width);
  d.periodic.assign(dim, false);
  d.guard = 0.0;
  return d;
}

}  // namespace

ManifoldModel flat_constant_form(int dim, const Vec& covector, double half_width) {
  if (covector.size() != dim)
    throw std::invalid_argument("flat_constant_form: covector size != dim");
  ManifoldModel m;
  m.name = "flat" + std::to_string(dim) + "d";
  m.dim = dim;
  m.chart = box_domain(dim, half_width);
  Vec om = covector;
  m.metric_at = [dim](const Vec&) { return Mat::Identity(dim, dim); };
  m.one_form_at = [om](const Vec&) { return om; };
  m.metric_jet = [dim](const Vec&) { return std::vector<Mat>(dim, Mat::Zero(dim, dim)); };
  m.one_form_jet = [dim](const Vec&) { return Mat::Zero(dim, dim); };
  return m;
}

ManifoldModel flat_torus(int dim, const Vec& covector) {
  ManifoldModel m = flat_constant_form(dim, covector, 0.5);
  m.name = "torus" + std::to_string(dim) + "d";
  m.chart.lo = Vec::Zero(dim);
  m.chart.hi = Vec::Ones(dim);
  m.chart.periodic.assign(dim, true);
  return m;
}

ManifoldModel heisenberg_contact(int sign, double half_width) {
  if (sign != 1 && sign != -1)
    throw std::invalid_argument("heisenberg_contact: sign must be +1 or -1");
  ManifoldModel m;
  m.name = sign > 0 ? "heisenberg" : "heisenberg_neg";
  m.dim = 3;
  m.chart = box_domain(3, half_width);
  const double s = static_cast<double>(sign);
  m.metric_at = [](const Vec&) { return Mat::Identity(3, 3); };
  // omega = s * (dz - y dx)
  m.one_form_at = [s](const Vec& x) {
    Vec om(3);
    om << -s * x[1], 0.0, s;
    return om;
  };
  m.metric_jet = [](const Vec&) { return std::vector<Mat>(3, Mat::Zero(3, 3)); };
  m.one_form_jet = [s](const Vec&) {
    Mat jet = Mat::Zero(3, 3);
    jet(0, 1) = -s;  // d_y omega_x
    return jet;
  };
  return m;
}

// Generalized Hopf coordinates on S^{2m-1}: radii r_j(theta) with
// r_j = prod_{a<j} sin(theta_a) * (j < m-1 ? cos(theta_j) : 1), phases phi_j.
// Induced round metric: g = [J^T J, 0; 0, diag(r_j^2)] with J = dr/dtheta.
namespace sphere_detail {

struct Radii {
  Eigen::VectorXd r;   // m
  Mat dr;              // m x (m-1)
  std::vector<Mat> d2r;  // per j: (m-1) x (m-1)
};

Radii radii(int m, const Vec& theta, bool second) {
  Radii out;
  out.r.resize(m);
  out.dr = Mat::Zero(m, m - 1);
  if (second) out.d2r.assign(m, Mat::Zero(m - 1, m - 1));

  // factor table: r_j = prod over a in factors(j) of f_{j,a}(theta_a)
  // where f = sin for a < j and f = cos for a == j (< m-1).
  auto factor = [&](int j, int a, int deriv_order) -> double {
    // deriv_order-th derivative of the (j,a) factor at theta_a
    double t = theta[a];
    bool is_sin = a < j;
    switch (deriv_order % 4) {
      case 0: return is_sin ? std::sin(t) : std::cos(t);
      case 1: return is_sin ? std::cos(t) : -std::sin(t);
      case 2: return is_sin ? -std::sin(t) : -std::cos(t);
      default: return is_sin ? -std::cos(t) : std::sin(t);
    }
  };
  auto in_product = [&](int j, int a) { return a < j || (a == j && j < m - 1); };

  for (int j = 0; j < m; ++j) {
    double val = 1.0;
    for (int a = 0; a < m - 1; ++a)
      if (in_product(j, a)) val *= factor(j, a, 0);
    out.r[j] = val;
    for (int a = 0; a < m - 1; ++a) {
      if (!in_product(j, a)) continue;
      double d = 1.0;
      for (int b = 0; b < m - 1; ++b)
        if (in_product(j, b)) d *= factor(j, b, b == a ? 1 : 0);
      out.dr(j, a) = d;
    }
    if (second) {
      for (int a = 0; a < m - 1; ++a) {
        if (!in_product(j, a)) continue;
        for (int b = a; b < m - 1; ++b) {
          if (!in_product(j, b)) continue;
          double d = 1.0;
          for (int c = 0; c < m - 1; ++c) {
            if (!in_product(j, c)) continue;
            int order = (c == a ? 1 : 0) + (c == b ? 1 : 0);
            d *= factor(j, c, order);
          }
          out.d2r[j](a, b) = d;
          out.d2r[j](b, a) = d;
        }
      }
    }
  }
  return out;
}

}  // namespace sphere_detail

ManifoldModel round_sphere_hopf(int m, double guard) {
  if (m < 2) throw std::invalid_argument("round_sphere_hopf: m must be >= 2");
  const int dim = 2 * m - 1;
  const int nt = m - 1;
  ManifoldModel model;
  model.name = "sphere_s" + std::to_string(dim);
  model.dim = dim;
  model.chart.lo = Vec::Zero(dim);
  model.chart.hi = Vec::Zero(dim);
  model.chart.periodic.assign(dim, false);
  for (int a = 0; a < nt; ++a) model.chart.hi[a] = M_PI / 2;
  for (int j = 0; j < m; ++j) {
    model.chart.lo[nt + j] = 0.0;
    model.chart.hi[nt + j] = 2 * M_PI;
    model.chart.periodic[nt + j] = true;
  }
  model.chart.guard = guard;

  model.metric_at = [m, nt, dim](const Vec& x) {
    auto rad = sphere_detail::radii(m, x.head(nt), false);
    Mat g = Mat::Zero(dim, dim);
    g.topLeftCorner(nt, nt) = rad.dr.transpose() * rad.dr;
    for (int j = 0; j < m; ++j) g(nt + j, nt + j) = rad.r[j] * rad.r[j];
    return g;
  };
  model.one_form_at = [m, nt, dim](const Vec& x) {
    auto rad = sphere_detail::radii(m, x.head(nt), false);
    Vec om = Vec::Zero(dim);
    for (int j = 0; j < m; ++j) om[nt + j] = -rad.r[j] * rad.r[j];
    return om;
  };
  model.metric_jet = [m, nt, dim](const Vec& x) {
    auto rad = sphere_detail::radii(m, x.head(nt), true);
    std::vector<Mat> jet(dim, Mat::Zero(dim, dim));
    for (int c = 0; c < nt; ++c) {
      Mat& J = jet[c];
      for (int a = 0; a < nt; ++a)
        for (int b = 0; b < nt; ++b) {
          double s = 0.0;
          for (int j = 0; j < m; ++j)
            s += rad.d2r[j](a, c) * rad.dr(j, b) + rad.dr(j, a) * rad.d2r[j](b, c);
          J(a, b) = s;
        }
      for (int j = 0; j < m; ++j) J(nt + j, nt + j) = 2.0 * rad.r[j] * rad.dr(j, c);
    }
    return jet;
  };
  model.one_form_jet = [m, nt, dim](const Vec& x) {
    auto rad = sphere_detail::radii(m, x.head(nt), false);
    Mat jet = Mat::Zero(dim, dim);
    for (int j = 0; j < m; ++j)
      for (int c = 0; c < nt; ++c) jet(nt + j, c) = -2.0 * rad.r[j] * rad.dr(j, c);
    return jet;
  };
  model.killing_field = [m, nt, dim](const Vec&) {
    Vec v = Vec::Zero(dim);
    for (int j = 0; j < m; ++j) v[nt + j] = 1.0;
    return v;
  };
  return model;
}

}  // namespace kropina
