#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "kropina/geodesic_flow.hpp"

namespace kropina::detail {

// Energy density e(x, v) with partial derivatives, where e = K^2/2 for the
// Kropina kind (plus an optional log barrier on -omega(v)) and e = F_eps^2/2
// for the Randers kinds. Inadmissible Kropina evaluations report +inf.
struct DensityPartials {
  double value = 0.0;
  Vec dv, dx;
  double omega_v = 0.0;
  bool finite = true;
};

inline DensityPartials chord_density(const ManifoldModel& model, FlowKind kind, double mu,
                                     const Vec& x, const Vec& v) {
  DensityPartials out;
  const int n = model.dim;
  const Mat g = model.metric_at(x);
  const Vec om = model.one_form_at(x);
  const std::vector<Mat> dg = model.metric_jet(x);
  const Mat dom = model.one_form_jet(x);

  const double A = v.dot(g * v);
  const double B = om.dot(v);
  out.omega_v = B;
  const Vec G = g * v;
  Vec dA(n);
  for (int k = 0; k < n; ++k) dA[k] = v.dot(dg[k] * v);
  const Vec dB = dom.transpose() * v;

  if (kind.is_kropina()) {
    if (!(-B > kTolAdmissible)) {
      out.finite = false;
      out.value = std::numeric_limits<double>::infinity();
      return out;
    }
    const double B2 = B * B, B3 = B2 * B;
    out.value = A * A / (8.0 * B2);
    out.dv = (A / (2.0 * B2)) * G - (A * A / (4.0 * B3)) * om;
    out.dx = (A / (4.0 * B2)) * dA - (A * A / (4.0 * B3)) * dB;
    if (mu > 0.0) {
      out.value += -mu * std::log(-B);
      out.dv += (-mu / B) * om;
      out.dx += (-mu / B) * dB;
    }
    return out;
  }

  const double eps = kind.eps;
  const double c = kind.family == RandersFamily::KatokZermelo ? 1.0 - eps : 1.0;
  const double sc = std::sqrt(c);
  const double S = std::sqrt(eps * A + c * B * B);
  const double F = (S + sc * B) / eps;
  if (S <= 0.0) {  // v = 0
    out.finite = false;
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  const Vec dF_dv = ((eps * G + c * B * om) / S + sc * om) / eps;
  const Vec dF_dx = ((eps * dA + 2.0 * c * B * dB) / (2.0 * S) + sc * dB) / eps;
  out.value = 0.5 * F * F;
  out.dv = F * dF_dv;
  out.dx = F * dF_dx;
  return out;
}

// Discretized path energy sum_k e(m_k, N (x_{k+1}-x_k)) / N over the chords
// of a node chain. Open problems fix both endpoints; cyclic problems leave
// every node free and close the chain with x_N = x_0 + winding.
struct ChordObjective {
  const ManifoldModel* model = nullptr;
  FlowKind kind = FlowKind::kropina();
  double mu = 0.0;
  bool cyclic = false;
  Vec fixed_first, fixed_last;  // open: endpoints
  Vec winding;                  // cyclic: x_N - x_0
  int chords = 0;

  int free_nodes() const { return cyclic ? chords : chords - 1; }

  Vec pack(const std::vector<Vec>& nodes) const {
    const int n = model->dim;
    const int first = cyclic ? 0 : 1;
    Vec z(free_nodes() * n);
    for (int i = 0; i < free_nodes(); ++i) z.segment(i * n, n) = nodes[first + i];
    return z;
  }

  std::vector<Vec> unpack(const Vec& z) const {
    const int n = model->dim;
    std::vector<Vec> nodes(chords + 1);
    if (cyclic) {
      for (int i = 0; i < chords; ++i) nodes[i] = z.segment(i * n, n);
      nodes[chords] = nodes[0] + winding;
    } else {
      nodes[0] = fixed_first;
      for (int i = 0; i < chords - 1; ++i) nodes[i + 1] = z.segment(i * n, n);
      nodes[chords] = fixed_last;
    }
    return nodes;
  }

  double operator()(const Vec& z, Vec& grad) const {
    const int n = model->dim;
    const int N = chords;
    std::vector<Vec> nodes = unpack(z);
    grad = Vec::Zero(z.size());
    double total = 0.0;

    auto add_grad = [&](int node_index, const Vec& g) {
      if (cyclic) {
        grad.segment((node_index % N) * n, n) += g;
      } else if (node_index > 0 && node_index < N) {
        grad.segment((node_index - 1) * n, n) += g;
      }
    };

    for (int k = 0; k < N; ++k) {
      const Vec& a = nodes[k];
      const Vec& b = nodes[k + 1];
      const Vec m = 0.5 * (a + b);
      const Vec v = static_cast<double>(N) * (b - a);
      if (!model->chart.contains(m)) return std::numeric_limits<double>::infinity();
      DensityPartials d = chord_density(*model, kind, mu, m, v);
      if (!d.finite) return std::numeric_limits<double>::infinity();
      total += d.value / N;
      const Vec ga = (0.5 * d.dx - static_cast<double>(N) * d.dv) / N;
      const Vec gb = (0.5 * d.dx + static_cast<double>(N) * d.dv) / N;
      add_grad(k, ga);
      add_grad(k + 1, gb);
    }
    return total;
  }
};

// Splits every chord into equal parts so the result has at least min_nodes
// nodes while keeping the original waypoints.
inline DiscretePath subdivide_to(const DiscretePath& path, int min_nodes) {
  const int segs = path.segments();
  int per = 1;
  while (segs * per + 1 < min_nodes) ++per;
  DiscretePath out;
  out.closed = path.closed;
  out.points.reserve(segs * per + 1);
  std::vector<double> params;
  params.reserve(segs * per + 1);
  for (int k = 0; k < segs; ++k) {
    for (int j = 0; j < per; ++j) {
      const double t = static_cast<double>(j) / per;
      out.points.push_back(path.points[k] + t * (path.points[k + 1] - path.points[k]));
      params.push_back(path.params[k] + t * (path.params[k + 1] - path.params[k]));
    }
  }
  out.points.push_back(path.points.back());
  params.push_back(path.params[path.segments()]);
  out.params = Eigen::Map<Vec>(params.data(), params.size());
  return out;
}

// Uniform parameter grid 0..1 over the nodes of a path.
inline void uniformize_params(DiscretePath& path) {
  path.params = Vec::LinSpaced(path.points.size(), 0.0, 1.0);
}

}  // namespace kropina::detail
