#include "kropina/connect.hpp"

#include "kropina/reachable.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "kropina/detail/energy.hpp"
#include "kropina/detail/optim.hpp"

namespace kropina {

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::NoAdmissibleSeed: return "NoAdmissibleSeed";
    case SolveStatus::ConeCollapse: return "ConeCollapse";
    case SolveStatus::MaxIterations: return "MaxIterations";
    case SolveStatus::Collapsed: return "Collapsed";
  }
  return "Unknown";
}

std::vector<double> ConnectProblem::default_eps_schedule() {
  std::vector<double> eps;
  for (int k = 0; k <= 14; ++k) eps.push_back(std::pow(2.0, -k));
  return eps;
}

DiscretePath straight_seed(const ManifoldModel& model, const Vec& x0, const Vec& x1, int n) {
  model.require_inside(x0, "connect.straight_seed");
  model.require_inside(x1, "connect.straight_seed");
  DiscretePath p;
  p.params = Vec::LinSpaced(n + 1, 0.0, 1.0);
  p.points.resize(n + 1);
  for (int k = 0; k <= n; ++k) p.points[k] = x0 + (static_cast<double>(k) / n) * (x1 - x0);
  return p;
}

namespace {

// Cosine-type chord margin: -omega(m)(d) normalized by ||d||_g ||omega||_g at
// the midpoint; in [-1, 1], positive inside the cone.
double chord_margin(const ManifoldModel& model, const Vec& a, const Vec& b, long& budget) {
  --budget;
  const Vec m = 0.5 * (a + b);
  const Vec d = b - a;
  if (!model.chart.contains(m) || !model.chart.in_guarded(m)) return -2.0;
  const Mat g = model.metric_at(m);
  const Vec om = model.one_form_at(m);
  const double dn = std::sqrt(std::max(d.dot(g * d), 0.0));
  const double on = std::sqrt(std::max(om.dot(g.llt().solve(om)), 0.0));
  if (dn <= 0.0 || on < model.tol_omega) return -2.0;
  return -om.dot(d) / (dn * on);
}

// Minimum cone margin of the fixed chord direction sampled along the chord,
// endpoints included; guards against chords admissible at the midpoint only.
double chord_margin_profile(const ManifoldModel& model, const Vec& a, const Vec& b, long& budget,
                            int samples = 11) {
  const Vec d = b - a;
  double worst = 2.0;
  for (int j = 0; j < samples; ++j) {
    --budget;
    const double t = static_cast<double>(j) / (samples - 1);
    const Vec x = a + t * d;
    if (!model.chart.contains(x) || !model.chart.in_guarded(x)) return -2.0;
    const Mat g = model.metric_at(x);
    const Vec om = model.one_form_at(x);
    const double dn = std::sqrt(std::max(d.dot(g * d), 0.0));
    const double on = std::sqrt(std::max(om.dot(g.llt().solve(om)), 0.0));
    if (dn <= 0.0 || on < model.tol_omega) return -2.0;
    worst = std::min(worst, -om.dot(d) / (dn * on));
    if (worst <= -2.0) break;
  }
  return worst;
}

struct DetourSearch {
  const ManifoldModel& model;
  const AdmissibilizeOptions& opts;
  long budget;
  double accept_margin = 1e-3;

  std::vector<Vec> directions() const {
    const int n = model.dim;
    std::vector<Vec> dirs;
    for (int i = 0; i < n; ++i) {
      Vec e = Vec::Zero(n);
      e[i] = 1.0;
      dirs.push_back(e);
      dirs.push_back(-e);
    }
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        for (double si : {1.0, -1.0})
          for (double sj : {1.0, -1.0}) {
            Vec e = Vec::Zero(n);
            e[i] = si * M_SQRT1_2;
            e[j] = sj * M_SQRT1_2;
            dirs.push_back(e);
          }
    return dirs;
  }

  bool repair(const Vec& a, const Vec& b, int depth, std::vector<Vec>& out) {
    if (budget <= 0) return false;
    const double m = chord_margin_profile(model, a, b, budget);
    if (m > accept_margin) {
      out.push_back(b);
      return true;
    }
    if (depth <= 0) return false;

    const Vec mid = 0.5 * (a + b);
    const double len = (b - a).norm();
    struct Cand {
      double score;
      Vec w;
    };
    std::vector<Cand> cands;
    for (const Vec& dir : directions()) {
      for (double r : {0.45, 0.9, 1.8, 3.6}) {
        Vec w = mid + (r * std::max(len, 1e-6)) * dir;
        if (!model.chart.contains(w) || !model.chart.in_guarded(w)) continue;
        const double m1 = chord_margin_profile(model, a, w, budget, 3);
        const double m2 = chord_margin_profile(model, w, b, budget, 3);
        if (budget <= 0) return false;
        cands.push_back({std::min(m1, m2) + 0.1 * (m1 + m2), w});
      }
    }
    std::sort(cands.begin(), cands.end(),
              [](const Cand& lhs, const Cand& rhs) { return lhs.score > rhs.score; });
    const int tries = std::min<int>(8, static_cast<int>(cands.size()));
    for (int i = 0; i < tries; ++i) {
      std::vector<Vec> left, right;
      if (!repair(a, cands[i].w, depth - 1, left)) continue;
      if (!repair(cands[i].w, b, depth - 1, right)) continue;
      out.insert(out.end(), left.begin(), left.end());
      out.insert(out.end(), right.begin(), right.end());
      return true;
    }
    return false;
  }
};

}  // namespace

namespace {

// Global cone-aligned detour: Dijkstra front propagation on a local lattice
// around the endpoints. Edges require the chord direction to clear the cone
// gate at both chord ends and the midpoint, so the extracted polyline is
// admissible as a curve, not just cell-to-cell.
std::optional<std::vector<Vec>> grid_detour(const ManifoldModel& model, const Vec& x0,
                                            const Vec& x1) {
  const int n = model.dim;
  const double span = (x1 - x0).norm();
  if (span < 1e-10) return std::nullopt;  // degenerate pair: nothing to aim for

  Vec lo(n), hi(n);
  const double pad = 1.3 * span;
  double extent = 0.0;
  for (int i = 0; i < n; ++i) {
    lo[i] = std::min(x0[i], x1[i]) - pad;
    hi[i] = std::max(x0[i], x1[i]) + pad;
    if (!model.chart.periodic[i]) {
      lo[i] = std::max(lo[i], model.chart.lo[i] + model.chart.guard);
      hi[i] = std::min(hi[i], model.chart.hi[i] - model.chart.guard);
    }
    extent = std::max(extent, hi[i] - lo[i]);
  }

  const double margin_gate = 1e-3;
  auto edge_ok = [&](const Vec& a, const Vec& b) {
    const Vec d = b - a;
    for (double t : {0.0, 0.5, 1.0}) {
      const Vec x = a + t * d;
      if (!model.chart.contains(x) || !model.chart.in_guarded(x)) return false;
      const Mat g = model.metric_at(x);
      const Vec om = model.one_form_at(x);
      const double dn = std::sqrt(std::max(d.dot(g * d), 0.0));
      const double on = std::sqrt(std::max(om.dot(g.llt().solve(om)), 0.0));
      if (dn <= 0.0 || on < model.tol_omega) return false;
      if (-om.dot(d) / (dn * on) <= margin_gate) return false;
    }
    return true;
  };

  double h = extent / 26.0;
  for (int attempt = 0; attempt < 2; ++attempt, h /= 1.6) {
    std::vector<int> dims(n);
    long total = 1;
    for (int i = 0; i < n; ++i) {
      dims[i] = std::max(1, static_cast<int>(std::llround((hi[i] - lo[i]) / h)));
      total *= dims[i];
    }
    if (total > 400000) continue;

    auto center = [&](long idx) {
      Vec x(n);
      for (int i = n - 1; i >= 0; --i) {
        x[i] = lo[i] + (idx % dims[i] + 0.5) * h;
        idx /= dims[i];
      }
      return x;
    };
    auto index_of = [&](const Vec& x) -> long {
      long idx = 0;
      for (int i = 0; i < n; ++i) {
        const int c = static_cast<int>(std::floor((x[i] - lo[i]) / h));
        if (c < 0 || c >= dims[i]) return -1;
        idx = idx * dims[i] + c;
      }
      return idx;
    };

    // cell index layout matches center(): reversed mixed radix
    const long source = index_of(x0);
    const long target = index_of(x1);
    if (source < 0 || target < 0) continue;

    std::vector<std::vector<int>> offsets;
    {
      std::vector<int> cur(n, -2);
      while (true) {
        bool all_zero = std::all_of(cur.begin(), cur.end(), [](int v) { return v == 0; });
        if (!all_zero) offsets.push_back(cur);
        int i = 0;
        while (i < n && ++cur[i] > 2) cur[i++] = -2;
        if (i == n) break;
      }
    }

    std::vector<double> cost(total, std::numeric_limits<double>::infinity());
    std::vector<long> pred(total, -1);
    using Item = std::pair<double, long>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    cost[source] = 0.0;
    pq.emplace(0.0, source);
    while (!pq.empty()) {
      auto [dist, cur] = pq.top();
      pq.pop();
      if (dist > cost[cur]) continue;
      if (cur == target) break;
      const Vec xa = (cur == source) ? x0 : center(cur);
      std::vector<int> cc(n);
      {
        long idx = cur;
        for (int i = n - 1; i >= 0; --i) {
          cc[i] = static_cast<int>(idx % dims[i]);
          idx /= dims[i];
        }
      }
      for (const auto& off : offsets) {
        long nb = 0;
        bool inside = true;
        for (int i = 0; i < n; ++i) {
          const int c = cc[i] + off[i];
          if (c < 0 || c >= dims[i]) {
            inside = false;
            break;
          }
          nb = nb * dims[i] + c;
        }
        if (!inside) continue;
        const Vec xb = (nb == target) ? x1 : center(nb);
        if (!edge_ok(xa, xb)) continue;
        const Vec d = xb - xa;
        const Vec m = 0.5 * (xa + xb);
        const double B = model.one_form_at(m).dot(d);
        const double w = -d.dot(model.metric_at(m) * d) / (2.0 * B);
        if (cost[cur] + w < cost[nb] - 1e-15) {
          cost[nb] = cost[cur] + w;
          pred[nb] = cur;
          pq.emplace(cost[nb], nb);
        }
      }
    }
    if (!std::isfinite(cost[target])) continue;

    std::vector<Vec> rev;
    long cur = target;
    while (cur >= 0) {
      rev.push_back(cur == target ? x1 : cur == source ? x0 : center(cur));
      if (cur == source) break;
      cur = pred[cur];
    }
    return std::vector<Vec>(rev.rbegin(), rev.rend());
  }
  return std::nullopt;
}

}  // namespace

namespace {

// Shortcut smoothing: greedily replace node runs by direct chords that clear
// a healthy margin. Shortens staircase detours and improves their cone
// margins before minimization.
void shortcut_pass(const ManifoldModel& model, std::vector<Vec>& nodes, double gate) {
  long budget = 1 << 22;
  bool changed = true;
  while (changed && budget > 0) {
    changed = false;
    std::vector<Vec> out;
    std::size_t i = 0;
    out.push_back(nodes[0]);
    while (i + 1 < nodes.size()) {
      std::size_t best = i + 1;
      for (std::size_t j = nodes.size() - 1; j > i + 1; --j) {
        if (chord_margin_profile(model, nodes[i], nodes[j], budget) > gate) {
          best = j;
          break;
        }
        if (budget <= 0) break;
      }
      out.push_back(nodes[best]);
      if (best > i + 1) changed = true;
      i = best;
    }
    nodes = std::move(out);
  }
}

}  // namespace

std::optional<DiscretePath> admissibilize_seed(const ManifoldModel& model,
                                               const DiscretePath& path,
                                               const AdmissibilizeOptions& opts) {
  if (path.points.size() < 2)
    throw std::invalid_argument("connect.admissibilize_seed: need at least two nodes");
  for (const Vec& p : path.points) model.require_inside(p, "connect.admissibilize_seed");

  // already admissible: returned unchanged
  bool all_ok = true;
  for (int k = 0; k + 1 < static_cast<int>(path.points.size()) && all_ok; ++k) {
    long probe = 16;
    all_ok = chord_margin_profile(model, path.points[k], path.points[k + 1], probe) >
             kTolAdmissible;
  }
  if (all_ok) return path;

  auto nodes = grid_detour(model, path.points.front(), path.points.back());
  if (!nodes) return std::nullopt;
  shortcut_pass(model, *nodes, 0.02);

  // patch any locally marginal chord of the grid polyline
  DetourSearch search{model, opts, opts.eval_budget};
  std::vector<Vec> final_nodes;
  final_nodes.push_back(nodes->front());
  for (int k = 0; k + 1 < static_cast<int>(nodes->size()); ++k) {
    const Vec& a = (*nodes)[k];
    const Vec& b = (*nodes)[k + 1];
    long probe = 16;
    if (chord_margin_profile(model, a, b, probe) > search.accept_margin) {
      final_nodes.push_back(b);
      continue;
    }
    std::vector<Vec> repaired;
    if (!search.repair(a, b, opts.max_depth, repaired)) return std::nullopt;
    final_nodes.insert(final_nodes.end(), repaired.begin(), repaired.end());
  }

  DiscretePath out;
  out.closed = path.closed;
  out.points = std::move(final_nodes);
  detail::uniformize_params(out);
  if (!straight_line_homotopy_in_chart(model, path, out)) return std::nullopt;
  return out;
}

bool straight_line_homotopy_in_chart(const ManifoldModel& model, const DiscretePath& a,
                                     const DiscretePath& b) {
  const int samples = 64;
  auto sample = [&](const DiscretePath& p, double s) {
    const int segs = p.segments();
    const double u = s * segs;
    const int k = std::min(static_cast<int>(u), segs - 1);
    return Vec(p.points[k] + (u - k) * (p.points[k + 1] - p.points[k]));
  };
  for (int i = 0; i <= samples; ++i) {
    const double s = static_cast<double>(i) / samples;
    const Vec pa = sample(a, s);
    const Vec pb = sample(b, s);
    for (int j = 0; j <= 8; ++j) {
      const double t = static_cast<double>(j) / 8.0;
      if (!model.chart.contains(pa + t * (pb - pa))) return false;
    }
  }
  return true;
}

namespace {

struct StageOutcome {
  detail::LbfgsResult lbfgs;
  std::vector<Vec> nodes;
};

StageOutcome run_stage(const detail::ChordObjective& objective, const std::vector<Vec>& nodes,
                       double grad_tol, int max_iters) {
  detail::LbfgsOptions lopt;
  lopt.grad_tol = grad_tol;
  lopt.max_iters = max_iters;
  StageOutcome out;
  auto fg = [&objective](const Vec& z, Vec& g) { return objective(z, g); };
  out.lbfgs = detail::lbfgs_minimize(fg, objective.pack(nodes), lopt);
  out.nodes = objective.unpack(out.lbfgs.x);
  return out;
}

DiscretePath nodes_to_path(std::vector<Vec> nodes, bool closed) {
  DiscretePath p;
  p.points = std::move(nodes);
  p.closed = closed;
  detail::uniformize_params(p);
  return p;
}

// Single shooting against kropina_spray: Newton on v0 with finite-difference
// Jacobian, matching x(1) = x1.
struct ShootOutcome {
  bool ok = false;
  GeodesicSolution solution;
  double endpoint_error = 0.0;
};

ShootOutcome shoot_connect(const ManifoldModel& model, const Vec& x0, const Vec& x1, Vec v0,
                           double target = 1e-9) {
  const int n = model.dim;
  IntegrateOptions iopts;
  iopts.tol = 1e-12;
  ShootOutcome out;

  auto endpoint = [&](const Vec& v) -> std::optional<Vec> {
    try {
      GeodesicSolution s = integrate(model, FlowKind::kropina(), x0, v, 1.0, iopts);
      return Vec(s.path.points.back() - x1);
    } catch (const KropinaError&) {
      return std::nullopt;
    }
  };

  auto r0 = endpoint(v0);
  if (!r0) return out;
  double err = r0->norm();
  for (int it = 0; it < 30 && err > target; ++it) {
    Mat J(n, n);
    const double step = 1e-7 * std::max(1.0, v0.norm());
    bool jac_ok = true;
    for (int j = 0; j < n; ++j) {
      Vec vp = v0;
      vp[j] += step;
      auto rp = endpoint(vp);
      if (!rp) {
        jac_ok = false;
        break;
      }
      J.col(j) = (*rp - *r0) / step;
    }
    if (!jac_ok) break;
    const Vec dv = J.colPivHouseholderQr().solve(-*r0);
    double t = 1.0;
    bool improved = false;
    for (int bt = 0; bt < 10; ++bt) {
      auto rn = endpoint(v0 + t * dv);
      if (rn && rn->norm() < err) {
        v0 += t * dv;
        r0 = rn;
        err = rn->norm();
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) break;
  }
  if (err <= target * 10.0) {
    out.ok = true;
    out.solution = integrate(model, FlowKind::kropina(), x0, v0, 1.0, iopts);
    out.endpoint_error = err;
  }
  return out;
}

// Resample a polyline at equal increments of -omega(dx), matching the
// conserved omega(xdot) = c0 parametrization of the reduced flow. A shooting
// guess in this parametrization starts much closer to the Newton target.
DiscretePath reparametrize_omega(const ManifoldModel& model, const DiscretePath& path) {
  const int segs = path.segments();
  std::vector<double> cum(segs + 1, 0.0);
  for (int k = 0; k < segs; ++k) {
    const Vec d = path.points[k + 1] - path.points[k];
    const Vec m = 0.5 * (path.points[k] + path.points[k + 1]);
    cum[k + 1] = cum[k] + std::max(-model.one_form_at(m).dot(d), 1e-12);
  }
  const double total = cum.back();
  DiscretePath out;
  out.closed = path.closed;
  out.params = Vec::LinSpaced(segs + 1, 0.0, 1.0);
  out.points.resize(segs + 1);
  out.points.front() = path.points.front();
  out.points.back() = path.points.back();
  for (int i = 1; i < segs; ++i) {
    const double target = total * i / segs;
    int k = 0;
    while (k + 1 < segs && cum[k + 1] < target) ++k;
    const double t = (target - cum[k]) / std::max(cum[k + 1] - cum[k], 1e-300);
    out.points[i] = path.points[k] + t * (path.points[k + 1] - path.points[k]);
  }
  return out;
}

// Multiple shooting: knots at s_j = j/M with per-segment integration;
// unknowns are the interior knot states and all knot velocities, matched by
// continuity plus the terminal condition. Square Newton system solved with
// finite-difference Jacobians and damping.
ShootOutcome shoot_connect_multiple(const ManifoldModel& model, const Vec& x0, const Vec& x1,
                                    const DiscretePath& guess, int segments,
                                    double target = 1e-9) {
  const int n = model.dim;
  const int M = segments;
  IntegrateOptions iopts;
  iopts.tol = 1e-12;
  ShootOutcome out;

  auto sample_state = [&](double s, Vec& x, Vec& v) {
    const int nodes = static_cast<int>(guess.points.size());
    const double u = s * (nodes - 1);
    const int k = std::min(static_cast<int>(u), nodes - 2);
    const double t = u - k;
    x = guess.points[k] + t * (guess.points[k + 1] - guess.points[k]);
    v = static_cast<double>(nodes - 1) * (guess.points[k + 1] - guess.points[k]);
  };

  // unknown layout: x_1..x_{M-1}, then v_0..v_{M-1}
  const int nu = (2 * M - 1) * n;
  Vec u(nu);
  for (int j = 1; j < M; ++j) {
    Vec x, v;
    sample_state(static_cast<double>(j) / M, x, v);
    u.segment((j - 1) * n, n) = x;
  }
  for (int j = 0; j < M; ++j) {
    Vec x, v;
    sample_state((j + 0.5) / M, x, v);
    u.segment((M - 1 + j) * n, n) = v;
  }

  auto knot_x = [&](const Vec& uu, int j) -> Vec {
    if (j == 0) return x0;
    return uu.segment((j - 1) * n, n);
  };
  auto knot_v = [&](const Vec& uu, int j) -> Vec { return uu.segment((M - 1 + j) * n, n); };

  auto residual = [&](const Vec& uu) -> std::optional<Vec> {
    Vec r(nu);
    try {
      for (int j = 0; j < M; ++j) {
        GeodesicSolution seg =
            integrate(model, FlowKind::kropina(), knot_x(uu, j), knot_v(uu, j), 1.0 / M, iopts);
        const Vec xe = seg.path.points.back();
        const Vec ve = seg.path.velocities.back();
        if (j + 1 < M) {
          r.segment(2 * j * n, n) = xe - knot_x(uu, j + 1);
          r.segment((2 * j + 1) * n, n) = ve - knot_v(uu, j + 1);
        } else {
          r.segment(2 * j * n, n) = xe - x1;
        }
      }
      return r;
    } catch (const KropinaError&) {
      return std::nullopt;
    }
  };

  // endpoint map of one segment, for the block-sparse FD Jacobian
  auto segment_end = [&](const Vec& x, const Vec& v) -> std::optional<std::pair<Vec, Vec>> {
    try {
      GeodesicSolution seg = integrate(model, FlowKind::kropina(), x, v, 1.0 / M, iopts);
      return std::make_pair(seg.path.points.back(), seg.path.velocities.back());
    } catch (const KropinaError&) {
      return std::nullopt;
    }
  };

  auto r = residual(u);
  if (!r) return out;
  double err = r->norm();
  for (int it = 0; it < 40 && err > target; ++it) {
    // J column for unknown c touches only its segment's residual blocks plus
    // the analytic -I coupling to the next knot
    Mat J = Mat::Zero(nu, nu);
    bool ok = true;
    for (int j = 0; j < M && ok; ++j) {
      const Vec xj = knot_x(u, j);
      const Vec vj = knot_v(u, j);
      auto base = segment_end(xj, vj);
      if (!base) {
        ok = false;
        break;
      }
      auto fill = [&](int unknown_col, const Vec& xe, const Vec& ve, double step) {
        if (j + 1 < M) {
          J.block(2 * j * n, unknown_col, n, 1) = (xe - base->first) / step;
          J.block((2 * j + 1) * n, unknown_col, n, 1) = (ve - base->second) / step;
        } else {
          J.block(2 * j * n, unknown_col, n, 1) = (xe - base->first) / step;
        }
      };
      for (int i = 0; i < n && ok; ++i) {
        if (j > 0) {  // x_j unknown
          Vec xp = xj;
          const double step = 1e-7 * std::max(1.0, std::abs(xj[i]));
          xp[i] += step;
          auto pe = segment_end(xp, vj);
          if (!pe) {
            ok = false;
            break;
          }
          fill((j - 1) * n + i, pe->first, pe->second, step);
        }
        Vec vp = vj;
        const double vstep = 1e-7 * std::max(1.0, std::abs(vj[i]));
        vp[i] += vstep;
        auto pe = segment_end(xj, vp);
        if (!pe) {
          ok = false;
          break;
        }
        fill((M - 1 + j) * n + i, pe->first, pe->second, vstep);
      }
      if (j + 1 < M) {
        // d(X_j(end) - x_{j+1})/dx_{j+1} and d(V_j(end) - v_{j+1})/dv_{j+1}
        J.block(2 * j * n, j * n, n, n) -= Mat::Identity(n, n);
        J.block((2 * j + 1) * n, (M + j) * n, n, n) -= Mat::Identity(n, n);
      }
    }
    if (!ok) break;
    const Vec du = J.colPivHouseholderQr().solve(-*r);
    double t = 1.0;
    bool improved = false;
    for (int bt = 0; bt < 12; ++bt) {
      auto rn = residual(u + t * du);
      if (rn && rn->norm() < err) {
        u += t * du;
        r = rn;
        err = rn->norm();
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) break;
  }
  if (err > 1e-8) return out;

  // stitch the converged segments into one solution record
  GeodesicSolution full;
  for (int j = 0; j < M; ++j) {
    GeodesicSolution seg =
        integrate(model, FlowKind::kropina(), knot_x(u, j), knot_v(u, j), 1.0 / M, iopts);
    const double s_off = static_cast<double>(j) / M;
    const double t_off = full.lift_t.empty() ? 0.0 : full.lift_t.back();
    const std::size_t skip = (j == 0) ? 0 : 1;
    for (std::size_t k = skip; k < seg.path.points.size(); ++k) {
      full.path.points.push_back(seg.path.points[k]);
      full.path.velocities.push_back(seg.path.velocities[k]);
      full.lift_t.push_back(t_off + seg.lift_t[k]);
      full.omega_trace.push_back(seg.omega_trace[k]);
      full.speed_trace.push_back(seg.speed_trace[k]);
      full.c_eps_trace.push_back(seg.c_eps_trace[k]);
    }
    std::vector<double> params_acc;
    full.stats.steps += seg.stats.steps;
    full.stats.rejected += seg.stats.rejected;
    (void)params_acc;
    const std::size_t base = full.path.params.size();
    full.path.params.conservativeResize(full.path.points.size());
    for (std::size_t k = skip; k < seg.path.points.size(); ++k)
      full.path.params[base + (k - skip)] = s_off + seg.path.params[k];
  }
  full.kind = FlowKind::kropina();
  auto drift = [](const std::vector<double>& tr) {
    double d = 0.0;
    for (double t : tr) d = std::max(d, std::abs(t - tr.front()));
    return d;
  };
  full.residuals.omega_drift = drift(full.omega_trace);
  full.residuals.speed_drift = drift(full.speed_trace);
  out.ok = true;
  out.solution = std::move(full);
  out.endpoint_error = err;
  return out;
}

ConnectResult finish_kropina(const ManifoldModel& model, const ConnectProblem& problem,
                             const DiscretePath& seed_adm, std::vector<Vec> nodes,
                             const detail::LbfgsResult& last_stage, ConnectResult result) {
  const int N = static_cast<int>(nodes.size()) - 1;
  DiscretePath discrete = nodes_to_path(nodes, false);

  // degenerate endpoints: report a collapsed run instead of a fake geodesic
  if ((problem.x0 - problem.x1).norm() < 1e-10 &&
      discrete.diameter() < std::max(1e-3, 1e-6)) {
    result.status = SolveStatus::Collapsed;
    result.path = discrete;
    result.length = path_length(model, FlowKind::kropina(), discrete);
    result.detail = "path collapsed toward the endpoint; length infimum not attained";
    return result;
  }

  if (last_stage.line_search_failed) {
    result.status = SolveStatus::ConeCollapse;
    result.path = discrete;
    result.detail = "line search could not stay inside the admissible cone";
    return result;
  }
  const bool stage_ok =
      last_stage.converged ||
      (last_stage.stalled &&
       last_stage.grad_norm <= 20.0 * problem.grad_tol * std::max(1.0, last_stage.f));
  if (!stage_ok) {
    result.status = SolveStatus::MaxIterations;
    result.path = discrete;
    result.detail = "gradient tolerance not reached";
    return result;
  }

  result.first_variation_residual = last_stage.grad_norm;
  result.path = reparametrize_constant_speed(model, FlowKind::kropina(), discrete);

  const DiscretePath guess = reparametrize_omega(model, discrete);
  const double discrete_length = path_length(model, FlowKind::kropina(), discrete);
  // a refinement is only accepted if it stays on the minimizer's geodesic,
  // not some other solution of the same boundary problem
  auto acceptable = [&](const ShootOutcome& s) {
    if (!s.ok) return false;
    const double L = solution_length(model, s.solution);
    return std::abs(L - discrete_length) <= 0.05 * discrete_length + 1e-3;
  };
  Vec v0 = static_cast<double>(N) * (guess.points[1] - guess.points[0]);
  ShootOutcome shot = shoot_connect(model, problem.x0, problem.x1, v0);
  if (!acceptable(shot)) shot = shoot_connect_multiple(model, problem.x0, problem.x1, guess, 8);
  if (!acceptable(shot)) shot = shoot_connect_multiple(model, problem.x0, problem.x1, guess, 16);
  if (!acceptable(shot)) shot = shoot_connect_multiple(model, problem.x0, problem.x1, guess, 32);
  if (!acceptable(shot)) {
    result.status = SolveStatus::MaxIterations;
    result.detail = "shooting refinement did not reach endpoint tolerance";
    result.length = discrete_length;
    return result;
  }
  result.status = SolveStatus::Converged;
  result.solution = std::move(shot.solution);
  result.endpoint_error = shot.endpoint_error;
  result.length = path_length(model, FlowKind::kropina(), result.solution.path);
  result.homotopy_check_ok = straight_line_homotopy_in_chart(model, seed_adm, result.path);
  return result;
}

}  // namespace

ConnectResult minimize_length(const ManifoldModel& model, const ConnectProblem& problem) {
  ConnectResult result;
  auto seed_adm = admissibilize_seed(model, problem.seed);
  if (!seed_adm) {
    result.status = SolveStatus::NoAdmissibleSeed;
    result.detail = "no admissible representative found in the seed's homotopy class";
    return result;
  }

  DiscretePath work = detail::subdivide_to(*seed_adm, problem.discretization + 1);
  const int N = work.segments();

  detail::ChordObjective objective;
  objective.model = &model;
  objective.kind = FlowKind::kropina();
  objective.cyclic = false;
  objective.fixed_first = problem.x0;
  objective.fixed_last = problem.x1;
  objective.chords = N;

  // annealed admissibility barrier, then the pure energy
  std::vector<Vec> nodes = work.points;
  detail::LbfgsResult stage;
  for (double mu : {1e-2, 1e-4, 1e-6, 0.0}) {
    Vec z = objective.pack(nodes);
    Vec gtmp(z.size());
    objective.mu = 0.0;
    const double e_now = std::max(objective(z, gtmp), 1e-12);  // rescale per stage
    objective.mu = mu * e_now;
    const int iters = mu == 0.0 ? std::max(3000, 60 * N) : 800;
    StageOutcome out = run_stage(objective, nodes, mu == 0.0 ? problem.grad_tol : 1e-6, iters);
    nodes = std::move(out.nodes);
    stage = out.lbfgs;
    if (stage.line_search_failed && mu > 0.0) break;
  }
  return finish_kropina(model, problem, *seed_adm, std::move(nodes), stage, std::move(result));
}

ConnectResult epsilon_homotopy(const ManifoldModel& model, const ConnectProblem& problem) {
  ConnectResult result;
  auto seed_adm = admissibilize_seed(model, problem.seed);
  if (!seed_adm) {
    result.status = SolveStatus::NoAdmissibleSeed;
    result.detail = "no admissible representative found in the seed's homotopy class";
    return result;
  }

  std::vector<double> schedule =
      problem.eps_schedule.empty() ? ConnectProblem::default_eps_schedule() : problem.eps_schedule;
  for (std::size_t i = 0; i + 1 < schedule.size(); ++i)
    if (schedule[i + 1] >= schedule[i])
      throw std::invalid_argument("connect.epsilon_homotopy: schedule must decrease");

  DiscretePath work = detail::subdivide_to(*seed_adm, problem.discretization + 1);
  const int N = work.segments();
  std::vector<Vec> nodes = work.points;

  detail::ChordObjective objective;
  objective.model = &model;
  objective.cyclic = false;
  objective.fixed_first = problem.x0;
  objective.fixed_last = problem.x1;
  objective.chords = N;
  objective.mu = 0.0;

  for (double eps : schedule) {
    objective.kind = FlowKind::randers(eps);
    StageOutcome out = run_stage(objective, nodes, problem.grad_tol, 600);
    if (out.lbfgs.line_search_failed || !(out.lbfgs.converged || out.lbfgs.stalled)) {
      result.status = out.lbfgs.line_search_failed ? SolveStatus::ConeCollapse
                                                   : SolveStatus::MaxIterations;
      result.detail = "stage eps=" + std::to_string(eps) + " failed";
      result.path = nodes_to_path(out.nodes, false);
      return result;
    }
    nodes = std::move(out.nodes);
    EpsStage st;
    st.eps = eps;
    st.length = path_length(model, FlowKind::randers(eps), nodes_to_path(nodes, false));
    st.iters = out.lbfgs.iters;
    result.eps_trace.push_back(st);
  }

  // final Kropina polish from the limit path
  objective.kind = FlowKind::kropina();
  StageOutcome out = run_stage(objective, nodes, problem.grad_tol, 600);
  return finish_kropina(model, problem, *seed_adm, std::move(out.nodes), out.lbfgs,
                        std::move(result));
}

}  // namespace kropina
