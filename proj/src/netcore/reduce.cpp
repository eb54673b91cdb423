#include <string>

#include "s2s/netcore.hpp"

namespace s2s {

namespace {

using Kind = ManifoldConstraint::Kind;

void check_index(int k, int h, const char* what) {
  if (k < 0 || k >= h) {
    throw InvalidInput(std::string(what) + " index " + std::to_string(k) +
                       " out of range for width " + std::to_string(h));
  }
}

Vec theta(const UnitLayerNet& net, int i) {
  Vec t(net.nv() + net.nu());
  t << net.v().col(i), net.u().col(i);
  return t;
}

double gamma_of(const UnitLayerNet& net, const ManifoldConstraint& c) {
  return c.gamma ? *c.gamma : fit_gamma(net, c.i, c.j);
}

}  // namespace

void check_constraint(const UnitLayerNet& net, const ManifoldConstraint& c) {
  const ActivationKind& act = net.activation();
  const int h = net.width();
  if (net.out_map().kind == OutMap::Kind::kSkipLinear) {
    throw Unsupported("unit constraints are not defined across skip connections");
  }
  check_index(c.i, h, "unit");
  switch (c.kind) {
    case Kind::kEqual:
      check_index(c.j, h, "partner");
      if (c.i == c.j) throw InvalidInput("equal constraint needs i != j");
      return;
    case Kind::kZero:
      if (!act.has_zero_unit()) {
        throw Unsupported(act.name() + " has no zero unit");
      }
      return;
    case Kind::kProportional:
      check_index(c.j, h, "partner");
      if (c.i == c.j) throw InvalidInput("proportional constraint needs i != j");
      if (!act.homogeneous()) {
        throw Unsupported(act.name() + " is not degree-1 homogeneous");
      }
      if (c.gamma && act.positive_only() && *c.gamma < 0.0) {
        throw InvalidInput("gamma must be >= 0 for " + act.name());
      }
      return;
    case Kind::kLinDep:
      if (!act.linear_in_u()) {
        throw Unsupported(act.name() + " is not linear in u");
      }
      if (static_cast<int>(c.coeffs.size()) != h) {
        throw InvalidInput("lindep needs one coefficient per unit (" +
                           std::to_string(h) + "), got " +
                           std::to_string(c.coeffs.size()));
      }
      return;
  }
}

double fit_gamma(const UnitLayerNet& net, int i, int j) {
  const Vec tj = theta(net, j);
  const double nn = tj.squaredNorm();
  if (nn == 0.0) return 0.0;
  return theta(net, i).dot(tj) / nn;
}

double constraint_residual(const UnitLayerNet& net, const ManifoldConstraint& c) {
  check_constraint(net, c);
  const Vec ti = theta(net, c.i);
  switch (c.kind) {
    case Kind::kEqual:
      return (ti - theta(net, c.j)).norm();
    case Kind::kZero:
      return ti.norm();
    case Kind::kProportional:
      return (ti - gamma_of(net, c) * theta(net, c.j)).norm();
    case Kind::kLinDep: {
      Vec comb = Vec::Zero(ti.size());
      for (int j = 0; j < net.width(); ++j) {
        if (j != c.i) comb += c.coeffs[j] * theta(net, j);
      }
      return (ti - comb).norm();
    }
  }
  return 0.0;
}

UnitLayerNet reduce_width(const UnitLayerNet& net, const ManifoldConstraint& c,
                          double tol) {
  const double res = constraint_residual(net, c);
  if (!(res <= tol)) {
    throw NotOnManifold(c.describe() + " residual " + std::to_string(res) +
                        " exceeds tolerance " + std::to_string(tol));
  }
  // Folding v_i into the partners equals the textbook rules on the manifold
  // (v_j doubled, scaled by 1 + gamma^2, ...) and only relies on the u part.
  UnitLayerNet out = net;
  const Vec vi = net.v().col(c.i);
  switch (c.kind) {
    case Kind::kEqual:
      out.v().col(c.j) += vi;
      break;
    case Kind::kZero:
      break;
    case Kind::kProportional:
      out.v().col(c.j) += gamma_of(net, c) * vi;
      break;
    case Kind::kLinDep:
      for (int j = 0; j < net.width(); ++j) {
        if (j != c.i) out.v().col(j) += c.coeffs[j] * vi;
      }
      break;
  }
  out.remove_unit(c.i);
  return out;
}

}  // namespace s2s
