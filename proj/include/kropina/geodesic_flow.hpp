#pragma once

#include <vector>

#include "kropina/metrics.hpp"

namespace kropina {

// Ordered samples of a curve. Points are stored in unwrapped chart
// coordinates so that windings on periodic axes stay visible; `closed` means
// the last node is identified with the first (possibly offset by a winding
// vector on periodic axes).
struct DiscretePath {
  Vec params;                   // s_0 < ... < s_N
  std::vector<Vec> points;      // x(s_k)
  std::vector<Vec> velocities;  // optional, empty if not carried
  bool closed = false;

  int segments() const { return static_cast<int>(points.size()) - 1; }
  bool has_velocities() const { return !velocities.empty(); }
  double diameter() const;  // max pairwise distance of nodes (chart metric)
};

struct FlowKind {
  enum class Type { Kropina, Randers } type = Type::Kropina;
  double eps = 0.0;
  RandersFamily family = RandersFamily::Stationary;

  static FlowKind kropina() { return {Type::Kropina, 0.0, RandersFamily::Stationary}; }
  static FlowKind randers(double eps, RandersFamily family = RandersFamily::Stationary) {
    return {Type::Randers, eps, family};
  }
  bool is_kropina() const { return type == Type::Kropina; }
};

struct OdeStats {
  int steps = 0;
  int rejected = 0;
};

struct ResidualSummary {
  double omega_drift = 0.0;        // max |omega(xdot) - omega(xdot)(0)|
  double speed_drift = 0.0;        // max drift of K(xdot) resp. F_eps(xdot)
  double c_eps_drift = 0.0;        // max drift of omega(xdot) - eps tdot
  double randers_inv_drift = 0.0;  // max drift of eps g0(xdot,xdot) + omega(xdot)^2
};

// Integrated trajectory with the lightlike time lift and invariant traces.
struct GeodesicSolution {
  FlowKind kind;
  DiscretePath path;  // with velocities
  std::vector<double> lift_t;
  std::vector<double> omega_trace;
  std::vector<double> speed_trace;
  std::vector<double> c_eps_trace;
  ResidualSummary residuals;
  OdeStats stats;
};

// Acceleration of the Kropina geodesic system reduced to S: the coupled
// (x, t) system with conserved omega(xdot) = c0 and the lightlike lift
// tdot = K(xdot), with tddot eliminated by differentiating the constraint.
Vec kropina_spray(const ManifoldModel& model, const Vec& x, const Vec& v);

// Euler-Lagrange spray of the energy density K^2/2 (constant-K(xdot)
// parametrization). Traces the same geodesic paths as kropina_spray; the two
// accelerations differ at most by a multiple of v (a reparametrization term),
// and coincide whenever omega^sharp is a Killing field of constant length or
// the one-form is parallel.
Vec kropina_el_spray(const ManifoldModel& model, const Vec& x, const Vec& v);

// Acceleration of the standard stationary eps-system reduced to S, with
// conserved c_eps = omega(xdot) - eps tdot and eps g0(xdot,xdot) + omega^2(xdot).
Vec randers_spray(const ManifoldModel& model, double eps, const Vec& x, const Vec& v,
                  RandersFamily family = RandersFamily::Stationary);

struct IntegrateOptions {
  double tol = 1e-10;          // relative + absolute error target per step
  double max_step = 0.0;       // 0 => horizon / 64
  double min_step = 1e-14;
  int max_steps = 2000000;
  double cone_exit = 1e-6;     // abort when -omega(xdot)/||xdot||_g0 drops below
  bool fixed_step = false;     // take max_step unconditionally (order tests)
};

// Adaptive embedded Runge-Kutta integration of the requested spray with
// per-step invariant monitoring and the time lift accumulated by quadrature
// of K(xdot) resp. F_eps(xdot).
GeodesicSolution integrate(const ManifoldModel& model, FlowKind kind, const Vec& x0,
                           const Vec& v0, double horizon, const IntegrateOptions& opts = {});

// Finsler length of a path under the requested metric. Polyline paths use
// chord quadrature with 10x subdivision and a Richardson check; paths that
// carry velocities use Hermite resampling with composite Simpson.
double path_length(const ManifoldModel& model, FlowKind kind, const DiscretePath& path);

// Length of an integrated solution under its own metric, with Hermite
// derivatives taken from the generating spray (higher accuracy than the
// generic path quadrature; only valid for flow trajectories).
double solution_length(const ManifoldModel& model, const GeodesicSolution& solution);

// Kropina energy (1/2) int K^2(xdot) ds; parametrization dependent.
double path_energy(const ManifoldModel& model, const DiscretePath& path);

// Spacetime energy (1/2) int g_(eps)(zdot, zdot) ds of the lift z = (x, t).
// With the solution's own lightlike lift (tdot = K resp. F_eps pointwise) the
// value vanishes to quadrature accuracy; tdot_override substitutes a
// perturbed lift derivative sampled at the solution nodes.
double spacetime_energy_diagnostic(const ManifoldModel& model, FlowKind kind,
                                   const GeodesicSolution& solution,
                                   const std::vector<double>& tdot_override = {});

// Resample a path at equal increments of the given metric's length
// (constant-speed normalization). Node count is preserved.
DiscretePath reparametrize_constant_speed(const ManifoldModel& model, FlowKind kind,
                                          const DiscretePath& path);

}  // namespace kropina
