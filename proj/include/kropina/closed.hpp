#pragma once

#include <utility>
#include <vector>

#include "kropina/connect.hpp"

namespace kropina {

// Closed-geodesic search in the free-homotopy class of a seed loop.
struct LoopProblem {
  DiscretePath seed_loop;  // closed; last node = first node + winding
  int discretization = 96;
  double grad_tol = 1e-7;
  double collapse_diameter = 1e-3;
  bool use_epsilon_homotopy = false;
  std::vector<double> eps_schedule;  // used by the homotopy route
};

// First variation of Kropina length of a closed loop along a periodic
// variation field. xi_dot (d xi / ds) may be omitted, in which case cyclic
// central differences are used; analytic derivatives give quadrature-level
// accuracy and are preferred for residual tests.
double first_variation(const ManifoldModel& model, const DiscretePath& loop,
                       const std::vector<Vec>& xi, const std::vector<Vec>& xi_dot = {});

// Basis of 2*dim periodic variation fields (constant coordinate fields and
// sin(2 pi s)-modulated ones) with analytic derivatives.
struct VariationBasis {
  std::vector<std::vector<Vec>> fields;
  std::vector<std::vector<Vec>> derivatives;
};
VariationBasis loop_variation_basis(const DiscretePath& loop);

// Max |first_variation| over the basis.
double first_variation_residual(const ManifoldModel& model, const DiscretePath& loop);

// Loop-energy minimization with rotating basepoint (all nodes free, cyclic
// chords), collapse guard, and optional eps-homotopy route.
ConnectResult closed_geodesic_in_class(const ManifoldModel& model, const LoopProblem& problem);

// Loop view of a closed solution (marks the sample path closed so the
// variation machinery can use its analytic velocities).
DiscretePath closed_solution_loop(const GeodesicSolution& solution);

// Killing-orbit candidate closed geodesics.
struct KillingOrbitCandidate {
  Vec base_point;
  GeodesicSolution orbit;  // integral curve of Y over one period
  double period = 0.0;
  double f_value = 0.0;               // omega(Y) at the base point
  double criticality_residual = 0.0;  // FD gradient norm of the objective at base
  double kropina_length = 0.0;
  double first_variation_res = 0.0;
  double orbit_closure = 0.0;
};

struct KillingOrbitOptions {
  int grid_per_axis = 16;
  int max_seeds = 100000;
  int max_candidates = 6;
  double distinct_hausdorff = 1e-3;
  double residual_tol = 1e-6;  // Killing / Lie-derivative residual gate
};

// Generates closed-orbit candidates through critical points of g0(Y,Y) (when
// omega(Y) is constant and negative) or of f = omega(Y) (when ||Y|| is
// constant), verifies each orbit closes and has vanishing first variation.
// Throws HypothesisViolated naming the failing residual.
std::vector<KillingOrbitCandidate> killing_orbit_candidates(
    const ManifoldModel& model, const KillingOrbitOptions& opts = {});

// Closed-form lengths of the rotationally invariant circle geodesics of the
// KatokZermelo family on odd spheres: 2 pi / (1 +- sqrt(1 - eps)).
std::pair<double, double> katok_lengths(double eps);

// Numeric companion: integrates the KatokZermelo Randers geodesic along a
// Hopf circle of the S^3 model for one period and returns its F_eps-length.
struct KatokNumeric {
  double length = 0.0;
  double closure_error = 0.0;
  double circle_deviation = 0.0;
};
KatokNumeric katok_numeric_short(const ManifoldModel& sphere, double eps,
                                 double integrate_tol = 1e-12);

// Perturbed Killing-orbit lengths (Zermelo data (g0, sqrt(alpha)/c W) along a
// closed orbit of g0-length T): closed form T / (1 + sqrt(alpha)) plus a
// quadrature cross-check along the integrated orbit.
struct PerturbedOrbitLengths {
  double closed_form = 0.0;
  double numeric = 0.0;
  double orbit_g0_length = 0.0;  // T
};
PerturbedOrbitLengths perturbed_orbit_lengths(const ManifoldModel& model, double alpha);

}  // namespace kropina
