#include <cmath>
#include <fstream>
#include <iomanip>
#include <string>

#include "s2s/manifold.hpp"

namespace s2s {

namespace {

using Kind = ManifoldConstraint::Kind;

Vec theta(const UnitLayerNet& net, int i) {
  Vec t(net.nv() + net.nu());
  t << net.v().col(i), net.u().col(i);
  return t;
}

void set_theta(UnitLayerNet& net, int i, const Vec& t) {
  net.v().col(i) = t.head(net.nv());
  net.u().col(i) = t.tail(net.nu());
}

}  // namespace

double residual(const UnitLayerNet& net, const ManifoldConstraint& c) {
  return constraint_residual(net, c);
}

std::vector<double> fit_lindep(const UnitLayerNet& net, int i) {
  const int h = net.width();
  if (i < 0 || i >= h) throw InvalidInput("unit index out of range");
  std::vector<double> coeffs(h, 0.0);
  if (h == 1) return coeffs;
  Mat basis(net.nv() + net.nu(), h - 1);
  for (int j = 0, c = 0; j < h; ++j) {
    if (j != i) basis.col(c++) = theta(net, j);
  }
  const Vec g = basis.completeOrthogonalDecomposition().solve(theta(net, i));
  for (int j = 0, c = 0; j < h; ++j) {
    if (j != i) coeffs[j] = g[c++];
  }
  return coeffs;
}

Projection project_resolved(const UnitLayerNet& net,
                            const ManifoldConstraint& request) {
  ManifoldConstraint c = request;
  if (c.kind == Kind::kLinDep && c.coeffs.empty()) {
    if (c.i < 0 || c.i >= net.width()) throw InvalidInput("unit index out of range");
    c.coeffs = fit_lindep(net, c.i);
  }
  check_constraint(net, c);
  Projection p{net, c};
  UnitLayerNet& out = p.net;
  switch (c.kind) {
    case Kind::kEqual: {
      const Vec mean = 0.5 * (theta(net, c.i) + theta(net, c.j));
      set_theta(out, c.i, mean);
      set_theta(out, c.j, mean);
      break;
    }
    case Kind::kZero:
      set_theta(out, c.i, Vec::Zero(net.nv() + net.nu()));
      break;
    case Kind::kProportional: {
      const Vec ti = theta(net, c.i);
      const Vec tj = theta(net, c.j);
      double gamma = 0.0;
      if (c.gamma) {
        gamma = *c.gamma;
      } else {
        Mat pair(ti.size(), 2);
        pair << ti, tj;
        Eigen::JacobiSVD<Mat> svd(pair, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Vec b = svd.matrixV().col(0);
        gamma = b[1] != 0.0 ? b[0] / b[1] : 0.0;
        if (net.activation().positive_only() && gamma < 0.0) gamma = 0.0;
      }
      const Vec w = (tj + gamma * ti) / (1.0 + gamma * gamma);
      set_theta(out, c.j, w);
      set_theta(out, c.i, gamma * w);
      p.constraint.gamma = gamma;
      break;
    }
    case Kind::kLinDep: {
      std::vector<double> coeffs = c.coeffs;
      coeffs[c.i] = 0.0;
      Vec comb = Vec::Zero(net.nv() + net.nu());
      for (int j = 0; j < net.width(); ++j) {
        if (j != c.i) comb += coeffs[j] * theta(net, j);
      }
      set_theta(out, c.i, comb);
      p.constraint.coeffs = coeffs;
      break;
    }
  }
  return p;
}

UnitLayerNet project(const UnitLayerNet& net, const ManifoldConstraint& c) {
  return project_resolved(net, c).net;
}

ManifoldFixedPoint manifold_fixed_point(const UnitLayerNet& base,
                                        EmbeddingSpec::Variant variant,
                                        int donor, double gamma_u,
                                        const std::vector<double>& gamma_u_list) {
  using V = EmbeddingSpec::Variant;
  const int h = base.width();
  switch (variant) {
    case V::kGeneric:
      return {embed_unit(base, EmbeddingSpec::generic(donor, 0.5)),
              ManifoldConstraint::equal(h, donor)};
    case V::kZero:
      return {embed_unit(base, EmbeddingSpec::zero()),
              ManifoldConstraint::zero(h)};
    case V::kHomogeneous: {
      const double gamma_v = gamma_u / (1.0 + gamma_u * gamma_u);
      return {embed_unit(base, EmbeddingSpec::homogeneous(donor, gamma_u, gamma_v)),
              ManifoldConstraint::proportional(h, donor, gamma_u)};
    }
    case V::kLinear: {
      if (static_cast<int>(gamma_u_list.size()) != h) {
        throw InvalidInput("linear variant needs one gamma_u per unit");
      }
      double ss = 0.0;
      for (double g : gamma_u_list) ss += g * g;
      std::vector<double> gamma_v;
      for (double g : gamma_u_list) gamma_v.push_back(g / (1.0 + ss));
      std::vector<double> coeffs = gamma_u_list;
      coeffs.push_back(0.0);
      return {embed_unit(base, EmbeddingSpec::linear(gamma_u_list, gamma_v)),
              ManifoldConstraint::lindep(h, coeffs)};
    }
  }
  throw Unsupported("unknown embedding variant");
}

DriftResult drift_test(const UnitLayerNet& net, const ManifoldConstraint& c,
                       const Objective& objective, double eta, long steps,
                       Scheme scheme, long record_every) {
  if (!(eta > 0.0)) throw InvalidInput("step size eta must be > 0");
  if (record_every < 1) record_every = 1;
  if (scheme == Scheme::kRk4 && !net.activation().smooth()) {
    throw InvalidInput("rk4 requires a smooth activation");
  }
  DriftResult r;
  UnitLayerNet cur = net;
  auto observe = [&](long step) {
    const double res = residual(cur, c);
    const double scale = cur.flatten().norm();
    r.max_residual = std::max(r.max_residual, res);
    if (scale > 0.0) r.max_relative = std::max(r.max_relative, res / scale);
    if (step % record_every == 0 || step == steps) {
      r.series.push_back({step, step * eta, res});
    }
    return res;
  };
  r.initial_residual = observe(0);
  UnitLayerNet last_good = cur;
  for (long s = 1; s <= steps; ++s) {
    step_once(cur, objective, eta, scheme);
    const double res = observe(s);
    if (!std::isfinite(res)) {
      throw DivergenceError("non-finite state during drift test at step " +
                                std::to_string(s),
                            last_good, s);
    }
    last_good = cur;
  }
  r.final_residual = r.series.empty() ? r.initial_residual : r.series.back().residual;
  r.final_net = std::move(cur);
  return r;
}

void write_residual_csv(const std::vector<ResidualSample>& series,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "step,time,residual\n" << std::setprecision(17);
  for (const auto& s : series) {
    out << s.step << "," << s.time << "," << s.residual << "\n";
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace s2s
