#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "kropina/core.hpp"

namespace kropina::detail {

struct RkOptions {
  double tol = 1e-10;
  double h_init = 1e-3;
  double h_min = 1e-14;
  double h_max = 0.1;
  int max_steps = 2000000;
  bool fixed_step = false;
};

struct RkSample {
  double s;
  Vec y;
  Vec dy;  // f(s, y), stored for Hermite resampling
};

// Dormand-Prince 5(4) with step control on the embedded error estimate.
// monitor(s, y) runs after every accepted step and may throw to abort.
template <class F, class Monitor>
std::vector<RkSample> rk45(F f, Vec y0, double s_end, const RkOptions& opt, int& steps,
                           int& rejected, Monitor monitor) {
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                      a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                      b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                      e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  std::vector<RkSample> out;
  double s = 0.0;
  Vec y = std::move(y0);
  Vec k1 = f(s, y);
  out.push_back({s, y, k1});

  double h = opt.fixed_step ? opt.h_max : std::min(opt.h_init, opt.h_max);
  steps = 0;
  rejected = 0;

  while (s < s_end) {
    if (h < opt.h_min)
      throw StepUnderflow("ode: step size underflow at s=" + std::to_string(s));
    if (steps + rejected > opt.max_steps)
      throw StepUnderflow("ode: step budget exhausted at s=" + std::to_string(s));
    h = std::min(h, s_end - s);

    Vec k2 = f(s + c2 * h, y + h * (a21 * k1));
    Vec k3 = f(s + c3 * h, y + h * (a31 * k1 + a32 * k2));
    Vec k4 = f(s + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    Vec k5 = f(s + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    Vec k6 = f(s + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    Vec ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    Vec k7 = f(s + h, ynew);
    Vec err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double scale = 0.0;
    for (int i = 0; i < y.size(); ++i) {
      double sc = opt.tol + opt.tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      scale = std::max(scale, std::abs(err[i]) / sc);
    }

    if (opt.fixed_step || scale <= 1.0) {
      s += h;
      y = std::move(ynew);
      k1 = std::move(k7);  // FSAL
      out.push_back({s, y, k1});
      ++steps;
      monitor(s, y);
      if (!opt.fixed_step) {
        double grow = 0.9 * std::pow(std::max(scale, 1e-10), -0.2);
        h = std::min(h * std::min(grow, 5.0), opt.h_max);
      }
    } else {
      ++rejected;
      h *= std::max(0.9 * std::pow(scale, -0.2), 0.2);
    }
  }
  return out;
}

}  // namespace kropina::detail
