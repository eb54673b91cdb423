#pragma once

#include <functional>

#include "s2s/types.hpp"

namespace s2s::test {

// Classical RK4 for x' = f(x), independent of the library's integrators.
inline Vec rk4(const std::function<Vec(const Vec&)>& f, Vec x, double h, long n) {
  for (long k = 0; k < n; ++k) {
    const Vec k1 = f(x);
    const Vec k2 = f(x + 0.5 * h * k1);
    const Vec k3 = f(x + 0.5 * h * k2);
    const Vec k4 = f(x + h * k3);
    x += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return x;
}

// Early quadratic flow in reduced time, state [a_1..a_D, v].
inline Vec quad_rhs(const Vec& x, const Vec& s) {
  const int d = static_cast<int>(s.size());
  Vec out(d + 1);
  const double v = x[d];
  double dv = 0.0;
  for (int k = 0; k < d; ++k) {
    out[k] = v * s[k] * x[k];
    dv += s[k] * x[k] * x[k];
  }
  out[d] = dv;
  return out;
}

}  // namespace s2s::test
