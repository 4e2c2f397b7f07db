#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kropina/geodesic_flow.hpp"

namespace kropina {

enum class SolveStatus {
  Converged,
  NoAdmissibleSeed,
  ConeCollapse,
  MaxIterations,
  Collapsed,
};

const char* to_string(SolveStatus status);

// Two-point problem. The seed path fixes the homotopy class being searched.
struct ConnectProblem {
  Vec x0, x1;
  DiscretePath seed;
  int discretization = 64;
  double grad_tol = 1e-7;
  double length_tol = 1e-10;
  std::vector<double> eps_schedule;  // empty => 2^-k, k = 0..14

  static std::vector<double> default_eps_schedule();
};

struct EpsStage {
  double eps = 0.0;
  double length = 0.0;  // Delta_eps = L_eps of the stage minimizer
  int iters = 0;
};

struct ConnectResult {
  SolveStatus status = SolveStatus::MaxIterations;
  DiscretePath path;          // minimizing discrete path (constant-speed nodes)
  GeodesicSolution solution;  // shooting-refined trajectory when Converged
  double length = 0.0;
  double endpoint_error = 0.0;
  double first_variation_residual = 0.0;
  bool homotopy_check_ok = false;  // straight-line homotopy seed->result in chart
  std::vector<EpsStage> eps_trace;
  std::string detail;
};

// Uniform straight-line polyline between two points.
DiscretePath straight_seed(const ManifoldModel& model, const Vec& x0, const Vec& x1, int n);

struct AdmissibilizeOptions {
  int max_depth = 9;
  int eval_budget = 60000;
  double margin_goal = 0.0;  // accept as soon as every chord clears the gate
};

// Replaces inadmissible chords by locally searched cone-aligned detours.
// Returns std::nullopt when the search budget exhausts without producing an
// admissible path in the same chart homotopy class (NoAdmissibleSeed).
std::optional<DiscretePath> admissibilize_seed(const ManifoldModel& model,
                                               const DiscretePath& path,
                                               const AdmissibilizeOptions& opts = {});

// Direct route: minimize the discretized Kropina energy over interior nodes
// with an annealed admissibility barrier, then polish by single shooting
// against kropina_spray.
ConnectResult minimize_length(const ManifoldModel& model, const ConnectProblem& problem);

// Approximation route: solve the Randers problem along the decreasing
// eps-schedule, warm-starting each stage with the previous minimizer, and
// accept the limit. Records Delta_eps per stage.
ConnectResult epsilon_homotopy(const ManifoldModel& model, const ConnectProblem& problem);

// Straight-line homotopy validity between two equally sampled paths: every
// interpolated node stays inside the chart domain.
bool straight_line_homotopy_in_chart(const ManifoldModel& model, const DiscretePath& a,
                                     const DiscretePath& b);

}  // namespace kropina
