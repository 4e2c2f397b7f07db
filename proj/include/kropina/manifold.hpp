#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kropina/core.hpp"

namespace kropina {

// Single-chart coordinate box. Periodic axes wrap; non-periodic axes carry a
// guard band near the box edges where chart data degenerates (e.g. angular
// charts on spheres).
struct ChartDomain {
  Vec lo, hi;
  std::vector<bool> periodic;
  double guard = 0.0;

  int dim() const { return static_cast<int>(lo.size()); }
  Vec wrap(const Vec& x) const;
  bool contains(const Vec& x) const;
  // Inside the box and clear of the guard band on non-periodic axes.
  bool in_guarded(const Vec& x) const;
};

// Chart-based geometry bundle: Riemannian metric g0, one-form omega, their
// first-derivative jets, and an optional Killing field. All evaluation maps
// are pure functions of x; models are immutable after construction.
struct ManifoldModel {
  std::string name;
  int dim = 0;
  ChartDomain chart;

  std::function<Mat(const Vec&)> metric_at;    // symmetric positive definite
  std::function<Vec(const Vec&)> one_form_at;  // covector components
  // jet[k](i,j) = d_k g_ij
  std::function<std::vector<Mat>(const Vec&)> metric_jet;
  // jet(i,k) = d_k omega_i
  std::function<Mat(const Vec&)> one_form_jet;
  std::function<Vec(const Vec&)> killing_field;  // empty when absent

  // Points with ||omega||_x below this are treated as outside the admissible
  // chart (the zero set of omega is excluded from the working domain).
  double tol_omega = 1e-9;

  bool has_killing() const { return static_cast<bool>(killing_field); }
  void require_inside(const Vec& x, const char* where) const;
};

// Christoffel symbols of g0; result[i](j,k) = Gamma^i_{jk}.
std::vector<Mat> christoffel_at(const ManifoldModel& model, const Vec& x);

// Components of d(omega): antisymmetric matrix with (i,j) = d_i w_j - d_j w_i.
Mat d_omega_at(const ManifoldModel& model, const Vec& x);

// Metric duals: sharp raises a covector, flat lowers a vector.
Vec sharp(const ManifoldModel& model, const Vec& x, const Vec& covector);
Vec flat(const ManifoldModel& model, const Vec& x, const Vec& vector);

// g0-norm of omega at x (computed through the inverse metric).
double omega_norm(const ManifoldModel& model, const Vec& x);

// Scalar density of omega ^ d(omega). Exact triple antisymmetrization in
// dimension 3; zero in dimension 2. For dim > 3 callers should use the
// rank-style proxy in the reachable module.
double wedge_density3(const ManifoldModel& model, const Vec& x);

// Euclidean chart distance with periodic axes wrapped to the shorter arc.
double chart_distance(const ManifoldModel& model, const Vec& a, const Vec& b);

// Replace missing jets by 4th-order central finite differences of the value
// maps (step h in chart units).
void attach_fd_jets(ManifoldModel& model, double h = 1e-5);

// --- builtin geometries ------------------------------------------------

// Euclidean metric with constant one-form on a large box.
ManifoldModel flat_constant_form(int dim, const Vec& covector, double half_width = 100.0);

// Euclidean metric with constant one-form on the unit torus (all axes periodic).
ManifoldModel flat_torus(int dim, const Vec& covector);

// R^3 with Euclidean metric and the contact form omega = sign * (dz - y dx).
ManifoldModel heisenberg_contact(int sign = +1, double half_width = 100.0);

// Round S^{2m-1} in generalized Hopf coordinates (theta_1..theta_{m-1},
// phi_1..phi_m), with the unit rotation Killing field V = sum_j d/dphi_j and
// omega = -g0(V, .). The invariant circles used in tests sit at interior
// theta values, away from the chart guard band.
ManifoldModel round_sphere_hopf(int m, double guard = 1e-3);

}  // namespace kropina
