#include "kropina/reachable.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>

namespace kropina {

std::vector<int> GridSpec::cells_per_axis() const {
  std::vector<int> n(lo.size());
  for (int i = 0; i < lo.size(); ++i)
    n[i] = std::max(1, static_cast<int>(std::llround((hi[i] - lo[i]) / h)));
  return n;
}

long GridSpec::total_cells() const {
  long t = 1;
  for (int n : cells_per_axis()) t *= n;
  return t;
}

long ReachableSet::index_of(const std::vector<int>& coords) const {
  long idx = 0;
  for (std::size_t i = 0; i < coords.size(); ++i) idx = idx * dims[i] + coords[i];
  return idx;
}

std::vector<int> ReachableSet::coords_of(long index) const {
  std::vector<int> c(dims.size());
  for (int i = static_cast<int>(dims.size()) - 1; i >= 0; --i) {
    c[i] = static_cast<int>(index % dims[i]);
    index /= dims[i];
  }
  return c;
}

Vec ReachableSet::cell_center(long index) const {
  std::vector<int> c = coords_of(index);
  Vec x(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i) x[i] = grid.lo[i] + (c[i] + 0.5) * grid.h;
  return x;
}

long ReachableSet::cell_containing(const Vec& x) const {
  std::vector<int> c(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const int ci = static_cast<int>(std::floor((x[i] - grid.lo[i]) / grid.h));
    if (ci < 0 || ci >= dims[i]) return -1;
    c[i] = ci;
  }
  return index_of(c);
}

long ReachableSet::reached_count() const {
  long n = 0;
  for (auto r : reached) n += r ? 1 : 0;
  return n;
}

double ReachableSet::reached_fraction() const {
  return static_cast<double>(reached_count()) / static_cast<double>(reached.size());
}

bool ReachableSet::all_reached() const { return reached_count() == static_cast<long>(reached.size()); }

DiscretePath ReachableSet::predecessor_path(long cell) const {
  if (work) {
    std::vector<int> c = coords_of(cell);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += work_shift[i];
    return work->predecessor_path(work->index_of(c));
  }
  std::vector<Vec> rev;
  long cur = cell;
  while (cur >= 0) {
    rev.push_back(cell_center(cur));
    if (cur == source_cell) break;
    cur = predecessor[cur];
  }
  DiscretePath p;
  p.points.assign(rev.rbegin(), rev.rend());
  p.points.front() = source;  // start at the exact source point
  p.params = Vec::LinSpaced(p.points.size(), 0.0, 1.0);
  return p;
}

std::vector<Vec> ReachableSet::boundary_samples() const {
  std::vector<Vec> out;
  const int n = static_cast<int>(dims.size());
  for (long idx = 0; idx < static_cast<long>(reached.size()); ++idx) {
    if (!reached[idx] || idx == source_cell) continue;  // source is the search root
    std::vector<int> c = coords_of(idx);
    bool boundary = false;
    for (int i = 0; i < n && !boundary; ++i) {
      for (int d : {-1, 1}) {
        std::vector<int> nb = c;
        nb[i] += d;
        if (nb[i] < 0 || nb[i] >= dims[i]) continue;  // box faces are not boundary
        if (!reached[index_of(nb)]) {
          boundary = true;
          break;
        }
      }
    }
    if (boundary) out.push_back(cell_center(idx));
  }
  return out;
}

namespace {

std::vector<std::vector<int>> stencil_offsets(int dim, int radius) {
  std::vector<std::vector<int>> offsets;
  std::vector<int> cur(dim, -radius);
  while (true) {
    bool all_zero = std::all_of(cur.begin(), cur.end(), [](int v) { return v == 0; });
    if (!all_zero) offsets.push_back(cur);
    int i = 0;
    while (i < dim) {
      if (++cur[i] <= radius) break;
      cur[i] = -radius;
      ++i;
    }
    if (i == dim) break;
  }
  return offsets;
}

}  // namespace

ReachableSet propagate(const ManifoldModel& model, const Vec& source, const GridSpec& grid,
                       int cone_samples, double box_inflation) {
  if (cone_samples < 8)
    throw std::invalid_argument("reachable.propagate: cone_samples must be >= 8");
  if (grid.h <= 0.0) throw std::invalid_argument("reachable.propagate: h must be positive");

  const int n = model.dim;

  // working grid: the reporting box inflated by whole cells, clamped to the
  // guarded chart, so detours may leave the box
  GridSpec work = grid;
  std::vector<int> shift(n, 0);
  for (int i = 0; i < n; ++i) {
    const double extent = grid.hi[i] - grid.lo[i];
    int extra = static_cast<int>(std::floor(box_inflation * extent / grid.h));
    double lo_limit = -std::numeric_limits<double>::infinity();
    double hi_limit = std::numeric_limits<double>::infinity();
    if (!model.chart.periodic[i]) {
      lo_limit = model.chart.lo[i] + model.chart.guard;
      hi_limit = model.chart.hi[i] - model.chart.guard;
    }
    int lo_extra = extra;
    while (lo_extra > 0 && grid.lo[i] - lo_extra * grid.h < lo_limit) --lo_extra;
    int hi_extra = extra;
    while (hi_extra > 0 && grid.hi[i] + hi_extra * grid.h > hi_limit) --hi_extra;
    work.lo[i] = grid.lo[i] - lo_extra * grid.h;
    work.hi[i] = grid.hi[i] + hi_extra * grid.h;
    shift[i] = lo_extra;
  }

  ReachableSet ws;
  ws.grid = work;
  ws.source = source;
  ws.dims = work.cells_per_axis();
  const long wtotal = work.total_cells();
  ws.reached.assign(wtotal, 0);
  ws.cost.assign(wtotal, std::numeric_limits<double>::infinity());
  ws.predecessor.assign(wtotal, -1);

  // the source must sit in the reporting box
  {
    ReachableSet probe;
    probe.grid = grid;
    probe.dims = grid.cells_per_axis();
    if (probe.cell_containing(source) < 0)
      throw SourceOutsideBox("reachable.propagate: source point outside the grid box");
  }
  ws.source_cell = ws.cell_containing(source);

  const auto offsets = stencil_offsets(n, 2);
  auto cell_ok = [&](const Vec& x) {
    return model.chart.contains(x) && model.chart.in_guarded(x) &&
           omega_norm(model, x) >= model.tol_omega;
  };
  auto edge_weight = [&](const Vec& a, const Vec& b) -> double {
    const Vec m = 0.5 * (a + b);
    if (!model.chart.contains(m)) return -1.0;
    const Vec d = b - a;
    const Vec om = model.one_form_at(m);
    const double B = om.dot(d);
    if (!(-B > kTolAdmissible)) return -1.0;
    const double A = d.dot(model.metric_at(m) * d);
    return -A / (2.0 * B);
  };

  using Item = std::pair<double, long>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  ws.cost[ws.source_cell] = 0.0;
  ws.reached[ws.source_cell] = 1;
  queue.emplace(0.0, ws.source_cell);

  std::vector<int> coords(n), nb(n);
  while (!queue.empty()) {
    auto [dist, cur] = queue.top();
    queue.pop();
    if (dist > ws.cost[cur]) continue;
    coords = ws.coords_of(cur);
    const Vec xc = ws.cell_center(cur);
    if (cur != ws.source_cell && !cell_ok(xc)) continue;

    for (const auto& off : offsets) {
      bool inside = true;
      for (int i = 0; i < n; ++i) {
        nb[i] = coords[i] + off[i];
        if (nb[i] < 0 || nb[i] >= ws.dims[i]) {
          inside = false;
          break;
        }
      }
      if (!inside) continue;
      const long nb_idx = ws.index_of(nb);
      const Vec xn = ws.cell_center(nb_idx);
      if (!cell_ok(xn)) continue;
      const Vec xa = (cur == ws.source_cell) ? source : xc;
      const double w = edge_weight(xa, xn);
      if (w < 0.0) continue;
      const double cand = ws.cost[cur] + w;
      if (cand < ws.cost[nb_idx] - 1e-15) {
        ws.cost[nb_idx] = cand;
        ws.reached[nb_idx] = 1;
        ws.predecessor[nb_idx] = cur;
        queue.emplace(cand, nb_idx);
      }
    }
  }

  bool trivial = true;
  for (int i = 0; i < n; ++i) trivial = trivial && shift[i] == 0 &&
                                        ws.dims[i] == grid.cells_per_axis()[i];
  if (trivial) return ws;

  // restrict to the requested box; predecessor chains stay on the working
  // grid, so keep it for path extraction
  ReachableSet rs;
  rs.grid = grid;
  rs.source = source;
  rs.dims = grid.cells_per_axis();
  const long total = grid.total_cells();
  rs.reached.assign(total, 0);
  rs.cost.assign(total, std::numeric_limits<double>::infinity());
  rs.predecessor.assign(total, -1);
  rs.work = std::make_shared<ReachableSet>(std::move(ws));
  rs.work_shift = shift;
  rs.source_cell = rs.cell_containing(source);
  for (long idx = 0; idx < total; ++idx) {
    std::vector<int> c = rs.coords_of(idx);
    for (int i = 0; i < n; ++i) c[i] += shift[i];
    const long widx = rs.work->index_of(c);
    rs.reached[idx] = rs.work->reached[widx];
    rs.cost[idx] = rs.work->cost[widx];
  }
  return rs;
}

TangencyReport boundary_tangency_test(const ManifoldModel& model, const ReachableSet& rs) {
  const long reached = rs.reached_count();
  if (reached == 0 || rs.all_reached())
    throw BoundaryEmpty("reachable.boundary_tangency_test: reached set is " +
                        std::string(reached == 0 ? "empty" : "the full grid"));

  TangencyReport report;
  std::vector<Vec> samples = rs.boundary_samples();
  const double radius = 3.0 * rs.grid.h;
  const int n = model.dim;

  double angle_sum = 0.0;
  for (const Vec& q : samples) {
    // PCA over the boundary samples within radius
    std::vector<const Vec*> local;
    for (const Vec& p : samples)
      if ((p - q).norm() <= radius) local.push_back(&p);
    if (static_cast<int>(local.size()) < n) continue;
    Vec mean = Vec::Zero(n);
    for (auto* p : local) mean += *p;
    mean /= static_cast<double>(local.size());
    Mat cov = Mat::Zero(n, n);
    for (auto* p : local) cov += (*p - mean) * (*p - mean).transpose();
    Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
    Vec normal = eig.eigenvectors().col(0);

    Vec axis = sharp(model, q, model.one_form_at(q));
    const double an = axis.norm();
    if (an < model.tol_omega) continue;
    axis /= an;
    const double cosang = std::min(1.0, std::abs(normal.dot(axis) / normal.norm()));
    const double angle = std::acos(cosang) * 180.0 / M_PI;

    report.points.push_back(q);
    report.normals.push_back(normal);
    report.angles_deg.push_back(angle);
    if (model.dim == 3) report.wedge_density.push_back(wedge_density3(model, q));
    report.max_angle_deg = std::max(report.max_angle_deg, angle);
    angle_sum += angle;
  }
  report.boundary_count = static_cast<int>(report.points.size());
  if (report.boundary_count > 0) report.mean_angle_deg = angle_sum / report.boundary_count;
  return report;
}

ScanReport nonintegrability_scan(const ManifoldModel& model, const Vec& lo, const Vec& hi,
                                 int samples, std::uint64_t seed) {
  ScanReport report;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = model.dim;
  report.rank_proxy = n > 3;

  int nonzero = 0;
  for (int s = 0; s < samples; ++s) {
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = lo[i] + (hi[i] - lo[i]) * unit(rng);
    if (!model.chart.contains(x) || !model.chart.in_guarded(x)) {
      --s;  // resample; the box is expected to sit inside the chart
      continue;
    }
    double value = 0.0;
    if (n <= 3) {
      value = wedge_density3(model, x);
    } else {
      // proxy: norm of d omega restricted to ker(omega)
      Vec om = model.one_form_at(x);
      Mat Om = d_omega_at(model, x);
      Mat om_col = om;
      Eigen::HouseholderQR<Mat> qr(om_col);  // n x 1; Q's trailing columns span ker
      Mat Q = qr.householderQ();
      Mat kernel = Q.rightCols(n - 1);
      value = (kernel.transpose() * Om * kernel).norm();
    }
    report.points.push_back(x);
    report.values.push_back(value);
    if (std::abs(value) > 1e-9) ++nonzero;
  }
  report.nonzero_fraction =
      report.values.empty() ? 0.0 : static_cast<double>(nonzero) / report.values.size();
  return report;
}

}  // namespace kropina
