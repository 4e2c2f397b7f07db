#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "kropina/geodesic_flow.hpp"

namespace kropina {

// Axis-aligned lattice of cell centers over a chart box.
struct GridSpec {
  Vec lo, hi;
  double h = 0.0;

  std::vector<int> cells_per_axis() const;
  long total_cells() const;
};

// Grid-indexed membership for the forward reachable set I^+_omega(x), with
// arrival costs (chord Kropina lengths along the search tree).
struct ReachableSet {
  GridSpec grid;
  Vec source;
  std::vector<int> dims;
  std::vector<std::uint8_t> reached;
  std::vector<double> cost;
  std::vector<long> predecessor;  // -1 at source / unreached
  long source_cell = -1;
  // inflated working grid used by the search (set when it differs from the
  // reporting box); predecessor chains live there
  std::shared_ptr<ReachableSet> work;
  std::vector<int> work_shift;

  long index_of(const std::vector<int>& coords) const;
  std::vector<int> coords_of(long index) const;
  Vec cell_center(long index) const;
  long cell_containing(const Vec& x) const;  // -1 if outside

  long reached_count() const;
  double reached_fraction() const;
  bool all_reached() const;

  // Search-tree path from the source cell to the given cell (cell centers).
  DiscretePath predecessor_path(long cell) const;

  // Centers of reached cells with at least one unreached in-grid face
  // neighbor.
  std::vector<Vec> boundary_samples() const;
};

// Dijkstra-style label-correcting propagation. A cell edge is traversable iff
// the chord direction is admissible at the chord midpoint; the edge weight is
// the chord Kropina length. The neighbor stencil contains all lattice offsets
// with Chebyshev radius <= 2; 
// minimum of 8 directions. Cells inside the ||omega|| guard or the chart
// guard band are excluded.
//
// Membership means reachability by admissible curves in the manifold, not
// curves confined to the reporting box, so the search runs on a working grid
// inflated by box_inflation (per side, as a fraction of the box extent,
// clamped to the chart) and the result is restricted to the requested box.
ReachableSet propagate(const ManifoldModel& model, const Vec& source, const GridSpec& grid,
                       int cone_samples = 124, double box_inflation = 0.5);

struct TangencyReport {
  int boundary_count = 0;
  double max_angle_deg = 0.0;
  double mean_angle_deg = 0.0;
  std::vector<Vec> points;
  std::vector<Vec> normals;
  std::vector<double> angles_deg;
  std::vector<double> wedge_density;  // omega ^ d omega density at samples (dim 3)
};

// Estimates local tangent planes of the reached-set boundary by PCA over a
// radius-3h neighborhood and reports the angle between each normal and
// omega^sharp. Throws BoundaryEmpty when the reached set is empty or full.
TangencyReport boundary_tangency_test(const ManifoldModel& model, const ReachableSet& rs);

struct ScanReport {
  std::vector<Vec> points;
  std::vector<double> values;     // wedge density (dim 3) or rank proxy value
  double nonzero_fraction = 0.0;  // fraction with |value| > 1e-9
  bool rank_proxy = false;        // true when dim > 3
};

// Samples the non-integrability density omega ^ d omega over a box. In
// dimension 3 this is the exact scalar density; in dimension 2 it is zero; in
// higher dimension the report carries the norm of d omega restricted to
// ker(omega) as a bracket-style proxy and sets rank_proxy.
ScanReport nonintegrability_scan(const ManifoldModel& model, const Vec& lo, const Vec& hi,
                                 int samples, std::uint64_t seed = 12345);

}  // namespace kropina
