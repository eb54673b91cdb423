#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include "s2s/theory.hpp"

namespace s2s {

namespace {

constexpr int kMaxPhases = 16;

void require_quad(const SpectralDecomp& d) {
  if (d.kind != SpectralCase::kQuadEig) {
    throw InvalidInput("quadratic-case theory needs a quad-eig decomposition");
  }
}

// One phase of the reduced flow with pi = pi_m and exponents e_k = s_k / s_m.
struct Phase {
  double v0 = 0.0;
  Vec a0;
  Vec e;
  double sm = 0.0;

  // R(pi) through log pi, so tiny and huge pi stay finite.
  double radicand(double log_pi) const {
    double r = v0 * v0;
    for (Eigen::Index k = 0; k < a0.size(); ++k) {
      if (a0[k] != 0.0) r += a0[k] * a0[k] * std::expm1(2.0 * e[k] * log_pi);
    }
    return r;
  }

  // 1 / (w sqrt(R(1/w))) written as 1 / sqrt(w^2 R).
  double integrand(double w) const {
    const double lw = std::log(w);
    double r = w * w * v0 * v0;
    for (Eigen::Index k = 0; k < a0.size(); ++k) {
      if (a0[k] == 0.0) continue;
      r += a0[k] * a0[k] * (std::exp((2.0 - 2.0 * e[k]) * lw) - w * w);
    }
    return r > 0.0 ? 1.0 / std::sqrt(r) : 0.0;
  }
};

struct ModeChoice {
  int m = -1;
  double sign = 0.0;
};

// Mode that grows fastest given the sign of v (or of dv/dtau when v = 0).
ModeChoice choose_mode(double v0, const Vec& a0, const Vec& s, bool allow_shrinking) {
  ModeChoice c;
  if (v0 != 0.0) {
    c.sign = v0 > 0.0 ? 1.0 : -1.0;
  } else {
    double g = 0.0;
    for (Eigen::Index k = 0; k < s.size(); ++k) g += s[k] * a0[k] * a0[k];
    if (g == 0.0) return c;
    c.sign = g > 0.0 ? 1.0 : -1.0;
  }
  double best = -INFINITY;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (a0[k] == 0.0 || s[k] == 0.0) continue;
    const double score = c.sign * s[k];
    if (score > best) {
      best = score;
      c.m = static_cast<int>(k);
    }
  }
  if (c.m >= 0 && best <= 0.0 && !allow_shrinking) c.m = -1;
  return c;
}

Phase make_phase(double v0, const Vec& a0, const Vec& s, int m) {
  Phase p;
  p.v0 = v0;
  p.a0 = a0;
  p.sm = s[m];
  p.e = s / s[m];
  return p;
}

double integrate_w(const Phase& p, double lo, double hi, double tol) {
  boost::math::quadrature::tanh_sinh<double> ts;
  return ts.integrate([&](double w) { return p.integrand(w); }, lo, hi, tol);
}

}  // namespace

QuadCoords quad_coords(const UnitParams& unit, const SpectralDecomp& d) {
  require_quad(d);
  if (unit.u.size() != d.nu || unit.v.size() != 1) {
    throw ShapeError("quadratic unit must have a scalar v and u of length " +
                     std::to_string(d.nu));
  }
  QuadCoords c;
  c.a = d.r.transpose() * unit.u / std::sqrt(2.0);
  c.v = unit.v[0];
  return c;
}

Vec quad_coords_inverse(const Vec& a, const SpectralDecomp& d) {
  require_quad(d);
  if (a.size() != d.modes()) throw ShapeError("mode vector has the wrong length");
  return std::sqrt(2.0) * d.r * a;
}

double conservation(const QuadCoords& c) { return c.v * c.v - c.a.squaredNorm(); }

void quad_flow(const QuadCoords& c, const Vec& s, Vec& da, double& dv) {
  da = c.v * s.cwiseProduct(c.a);
  dv = s.dot(c.a.cwiseAbs2());
}

TInfinity t_infinity(const QuadCoords& init, const SpectralDecomp& d, double rel_tol) {
  require_quad(d);
  if (init.a.size() != d.modes()) throw ShapeError("mode vector has the wrong length");
  TInfinity out;
  double v0 = init.v;
  Vec a0 = init.a;
  double tau = 0.0;
  using boost::math::tools::toms748_solve;
  boost::math::tools::eps_tolerance<double> tol(50);
  for (int phase = 0; phase < kMaxPhases; ++phase) {
    out.phases = phase + 1;
    const ModeChoice mc = choose_mode(v0, a0, d.s, true);
    if (mc.m < 0) break;
    const Phase p = make_phase(v0, a0, d.s, mc.m);
    const double rate = std::abs(p.sm);
    double log_root = 0.0;
    bool hits_zero = false;
    if (mc.sign * p.sm > 0.0) {
      // pi grows; v may still pass through zero on the way.
      double prev = 0.0;
      for (double y = 0.01; y <= 80.0; y += 0.01) {
        if (p.radicand(y) < 0.0) {
          std::uintmax_t it = 100;
          auto f = [&](double z) { return p.radicand(z); };
          const auto br = toms748_solve(f, prev, y, f(prev), f(y), tol, it);
          log_root = 0.5 * (br.first + br.second);
          hits_zero = true;
          break;
        }
        prev = y;
      }
      if (!hits_zero) {
        out.reduced = tau + integrate_w(p, 0.0, 1.0, rel_tol) / rate;
        out.time = out.reduced / kReducedTimeScale;
        return out;
      }
      tau += integrate_w(p, std::exp(-log_root), 1.0, rel_tol) / rate;
    } else {
      // Every populated mode shrinks while v keeps its sign; v reaches zero
      // only if R(0+) = v0^2 - sum a_k^2 < 0.
      double lo = -1.0;
      while (p.radicand(lo) >= 0.0 && lo > -1e6) lo *= 2.0;
      if (p.radicand(lo) >= 0.0) break;
      std::uintmax_t it = 100;
      auto f = [&](double z) { return p.radicand(z); };
      const auto br = toms748_solve(f, lo, 0.0, f(lo), f(0.0), tol, it);
      log_root = 0.5 * (br.first + br.second);
      tau += integrate_w(p, 1.0, std::exp(-log_root), rel_tol) / rate;
    }
    for (Eigen::Index k = 0; k < a0.size(); ++k) a0[k] *= std::exp(p.e[k] * log_root);
    v0 = 0.0;
  }
  out.finite = false;
  out.reduced = out.time = INFINITY;
  return out;
}

ReducedSolution reduced_ode(const QuadCoords& init, const SpectralDecomp& d,
                            const std::vector<double>& grid) {
  require_quad(d);
  if (init.a.size() != d.modes()) throw ShapeError("mode vector has the wrong length");
  if (grid.empty() || grid.front() != 0.0 ||
      !std::is_sorted(grid.begin(), grid.end())) {
    throw InvalidInput("grid must be ascending and start at 0");
  }
  const ModeChoice mc = choose_mode(init.v, init.a, d.s, false);
  if (mc.m < 0) {
    throw InvalidInput("no mode grows: sign(v0) s_m <= 0 for every populated mode");
  }
  const Phase p = make_phase(init.v, init.a, d.s, mc.m);
  ReducedSolution sol;
  sol.mode = mc.m;
  sol.sign = mc.sign;
  const double coef = mc.sign * p.sm;
  auto rhs = [&](const double& y, double& dy, double) {
    double r = p.radicand(y);
    if (r < 0.0) {
      sol.clamped = true;
      r = 0.0;
    }
    dy = coef * std::sqrt(r);
  };
  namespace odeint = boost::numeric::odeint;
  auto stepper = odeint::make_dense_output(1e-13, 1e-13, odeint::runge_kutta_dopri5<double>());
  const double y_max = 60.0;
  double y = 0.0;
  stepper.initialize(y, 0.0, 1e-6);
  const std::size_t n = grid.size();
  sol.a.resize(d.modes(), static_cast<Eigen::Index>(n));
  long steps = 0;
  for (std::size_t g = 0; g < n; ++g) {
    const double tau = kReducedTimeScale * grid[g];
    double yg = INFINITY;
    if (tau <= 0.0) {
      yg = 0.0;  // no step taken yet; dense output is not initialized
    } else if (!sol.blew_up) {
      while (stepper.current_time() < tau && !sol.blew_up) {
        stepper.do_step(rhs);
        if (stepper.current_state() > y_max || ++steps > 10000000) sol.blew_up = true;
      }
      if (!sol.blew_up) {
        if (tau <= stepper.current_time() && tau >= stepper.previous_time()) {
          stepper.calc_state(tau, yg);
        } else {
          yg = stepper.current_state();
        }
      } else if (tau <= stepper.current_time()) {
        stepper.calc_state(tau, yg);
        if (yg > y_max) yg = INFINITY;
      }
    }
    sol.t.push_back(grid[g]);
    sol.pi.push_back(std::exp(yg));
    for (Eigen::Index k = 0; k < d.modes(); ++k) {
      sol.a(k, static_cast<Eigen::Index>(g)) =
          std::isfinite(yg) ? init.a[k] * std::exp(p.e[k] * yg) : INFINITY;
    }
    const double r = std::isfinite(yg) ? p.radicand(yg) : INFINITY;
    sol.v.push_back(mc.sign * std::sqrt(std::max(r, 0.0)));
  }
  return sol;
}

UnitOrder unit_order_prediction(const UnitLayerNet& net, const SpectralDecomp& d) {
  require_quad(d);
  if (net.activation().tag() != ActivationTag::kQuadraticFc) {
    throw InvalidInput("unit order prediction needs a quadratic-fc network");
  }
  UnitOrder out;
  const int h = net.width();
  for (int i = 0; i < h; ++i) {
    out.t_infinity.push_back(t_infinity(quad_coords(net.unit(i), d), d).time);
  }
  out.order.resize(h);
  std::iota(out.order.begin(), out.order.end(), 0);
  std::stable_sort(out.order.begin(), out.order.end(), [&](int x, int y) {
    return out.t_infinity[x] < out.t_infinity[y];
  });
  auto same = [](double x, double y) {
    if (x == y) return true;
    return std::abs(x - y) <= 1e-9 * std::max(std::abs(x), std::abs(y));
  };
  for (int k = 0; k < h;) {
    int e = k + 1;
    while (e < h && same(out.t_infinity[out.order[k]], out.t_infinity[out.order[e]])) ++e;
    if (e - k > 1) out.ties.emplace_back(out.order.begin() + k, out.order.begin() + e);
    k = e;
  }
  return out;
}

}  // namespace s2s
