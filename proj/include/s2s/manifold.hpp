#pragma once

#include <string>
#include <vector>

#include "s2s/constraint.hpp"
#include "s2s/dynamics.hpp"
#include "s2s/landscape.hpp"
#include "s2s/netcore.hpp"

namespace s2s {

/// Constraint residual after a legality check (see constraint_residual).
double residual(const UnitLayerNet& net, const ManifoldConstraint& c);

/// Least-squares coefficients expressing theta_i through the other units
/// (entry i is 0).
std::vector<double> fit_lindep(const UnitLayerNet& net, int i);

/// Closest state satisfying `c`. An unset proportional gamma is chosen jointly
/// with the projection (best rank-1 fit of the pair); an empty lindep
/// coefficient list projects theta_i onto the span of the other units.
UnitLayerNet project(const UnitLayerNet& net, const ManifoldConstraint& c);

/// `project` plus the fully specified constraint the result satisfies.
struct Projection {
  UnitLayerNet net;
  ManifoldConstraint constraint;
};
Projection project_resolved(const UnitLayerNet& net, const ManifoldConstraint& c);

struct ManifoldFixedPoint {
  UnitLayerNet net;
  ManifoldConstraint constraint;
};

/// Embeds one unit so that the new fixed point also lies on an invariant
/// manifold: generic (gamma_v = 1/2, equal units), zero (zero unit),
/// homogeneous (gamma_v = gamma_u / (1 + gamma_u^2), proportional units),
/// linear (gamma_v_i = gamma_u_i / (1 + sum gamma_u^2), linear dependence).
ManifoldFixedPoint manifold_fixed_point(const UnitLayerNet& base,
                                        EmbeddingSpec::Variant variant,
                                        int donor = 0, double gamma_u = 1.0,
                                        const std::vector<double>& gamma_u_list = {});

struct ResidualSample {
  long step = 0;
  double time = 0.0;
  double residual = 0.0;
};

struct DriftResult {
  double max_residual = 0.0;
  double max_relative = 0.0;  // residual / ||theta|| at the same step
  double initial_residual = 0.0;
  double final_residual = 0.0;
  std::vector<ResidualSample> series;
  UnitLayerNet final_net;
};

/// Integrates from `net` and monitors the residual after every step; the
/// series keeps every `record_every`-th sample.
DriftResult drift_test(const UnitLayerNet& net, const ManifoldConstraint& c,
                       const Objective& objective, double eta, long steps,
                       Scheme scheme = Scheme::kEuler, long record_every = 100);

void write_residual_csv(const std::vector<ResidualSample>& series,
                        const std::string& path);

}  // namespace s2s
