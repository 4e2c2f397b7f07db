#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <string>

#include "kropina/core.hpp"

namespace kropina::detail {

struct LbfgsOptions {
  int history = 10;
  int max_iters = 2000;
  double grad_tol = 1e-8;       // on ||grad||_inf
  double step_init = 1.0;
  int max_backtracks = 60;
  double f_stall_tol = 1e-14;   // relative decrease treated as stagnation
  int stall_iters = 12;
};

struct LbfgsResult {
  Vec x;
  double f = 0.0;
  double grad_norm = 0.0;
  int iters = 0;
  bool converged = false;
  bool stalled = false;
  bool line_search_failed = false;
};

// Limited-memory BFGS with Armijo backtracking. The objective returns f and
// fills grad; it may return +inf to reject a trial point (barrier/cone
// violations), which the line search treats as a failed step.
inline LbfgsResult lbfgs_minimize(
    const std::function<double(const Vec&, Vec&)>& fg, Vec x0, const LbfgsOptions& opt = {}) {
  const double inf = std::numeric_limits<double>::infinity();
  LbfgsResult res;
  Vec x = std::move(x0);
  Vec g(x.size());
  double f = fg(x, g);
  if (!std::isfinite(f)) {
    res.x = x;
    res.f = f;
    res.line_search_failed = true;
    return res;
  }

  std::deque<Vec> s_hist, y_hist;
  std::deque<double> rho_hist;
  int stall_count = 0;

  for (int it = 0; it < opt.max_iters; ++it) {
    res.grad_norm = g.lpNorm<Eigen::Infinity>();
    if (res.grad_norm <= opt.grad_tol) {
      res.converged = true;
      break;
    }

    // two-loop recursion
    Vec q = g;
    std::vector<double> alpha(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    if (!s_hist.empty()) {
      const Vec& sl = s_hist.back();
      const Vec& yl = y_hist.back();
      q *= sl.dot(yl) / yl.squaredNorm();
    }
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    Vec d = -q;
    double gd = g.dot(d);
    if (gd >= 0.0) {  // not a descent direction; fall back to steepest descent
      d = -g;
      gd = -g.squaredNorm();
    }

    double t = (it == 0 && s_hist.empty()) ? std::min(opt.step_init, 1.0 / std::max(1.0, res.grad_norm))
                                           : opt.step_init;
    Vec x_try;
    Vec g_try(x.size());
    double f_try = inf;
    bool accepted = false;
    for (int bt = 0; bt < opt.max_backtracks; ++bt) {
      x_try = x + t * d;
      f_try = fg(x_try, g_try);
      if (std::isfinite(f_try) && f_try <= f + 1e-4 * t * gd) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      res.line_search_failed = true;
      break;
    }

    if (f - f_try < opt.f_stall_tol * std::max(1.0, std::abs(f))) {
      if (++stall_count >= opt.stall_iters) {
        x = std::move(x_try);
        f = f_try;
        g = g_try;
        res.iters = it + 1;
        res.stalled = true;
        break;
      }
    } else {
      stall_count = 0;
    }

    Vec s_vec = x_try - x;
    Vec y_vec = g_try - g;
    double sy = s_vec.dot(y_vec);
    if (sy > 1e-14 * s_vec.norm() * y_vec.norm()) {
      s_hist.push_back(s_vec);
      y_hist.push_back(y_vec);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opt.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    x = std::move(x_try);
    f = f_try;
    g = g_try;
    res.iters = it + 1;
  }

  res.x = std::move(x);
  res.f = f;
  if (!res.converged) res.grad_norm = g.lpNorm<Eigen::Infinity>();
  return res;
}

}  // namespace kropina::detail
