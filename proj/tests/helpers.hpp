#pragma once

#include <random>
#include <string>
#include <vector>

#include "s2s/data.hpp"
#include "s2s/netcore.hpp"

namespace s2s::test {

inline Mat gauss(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Mat m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = g(rng);
  return m;
}

inline Vec gauss_vec(Eigen::Index n, Rng& rng, double scale = 1.0) {
  return gauss(n, 1, rng, scale).col(0);
}

// Small geometry so attention tests stay fast.
inline ActivationKind small_attention() {
  return ActivationKind::attention({2, 4, 1});
}

inline std::vector<ActivationKind> all_kinds() {
  return {ActivationKind::parse("linear-fc"),     ActivationKind::parse("relu-fc"),
          ActivationKind::parse("conv1d-linear"), ActivationKind::parse("conv1d-relu"),
          ActivationKind::parse("quadratic-fc"),  ActivationKind::poly(3),
          ActivationKind::parse("tanh-fc"),       ActivationKind::parse("sigmoid-fc"),
          ActivationKind::parse("sin-fc"),        ActivationKind::parse("ztanh-fc"),
          small_attention()};
}

// Input width that suits every kind: conv needs an even width, attention a
// full token matrix.
inline int input_dim_for(const ActivationKind& act) {
  if (act.tag() == ActivationTag::kLinearAttention) {
    return act.geometry().token_dim() * act.geometry().tokens();
  }
  return 4;
}

inline int output_dim_for(const ActivationKind& act) { return act.is_fc() ? 2 : 1; }

inline UnitLayerNet random_net(const ActivationKind& act, int width, Rng& rng,
                               double scale = 0.5) {
  const int in = input_dim_for(act);
  const UnitDims d = unit_dims(act, in, output_dim_for(act));
  return UnitLayerNet(act, in, gauss(d.nv, width, rng, scale), gauss(d.nu, width, rng, scale));
}

inline Dataset noise_data(const ActivationKind& act, int p, Rng& rng) {
  Dataset d;
  d.x = gauss(p, input_dim_for(act), rng);
  d.y = gauss(p, output_dim_for(act), rng);
  d.kind = "random";
  return d;
}

inline double rel_err(const Vec& a, const Vec& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-300});
  return (a - b).norm() / scale;
}

inline DataStats linear_stats(const Mat& yz, const Mat& zz) {
  DataStats s;
  s.features = FeatureMap::kIdentity;
  s.yz = yz;
  s.zz = zz;
  s.yy = (yz * zz.inverse() * yz.transpose()).trace();
  s.provenance = Provenance::kPrescribed;
  return s;
}

// Smallest |u_i . x| over samples and units; kinked activations need it away
// from zero for finite differences.
inline double min_abs_preactivation(const UnitLayerNet& net, const Dataset& d) {
  double m = 1e300;
  const ActivationKind& act = net.activation();
  for (int mu = 0; mu < d.size(); ++mu) {
    const Vec x = d.x.row(mu).transpose();
    for (int i = 0; i < net.width(); ++i) {
      if (act.is_conv()) {
        for (int p = 0; p + 1 < x.size(); p += 2) {
          m = std::min(m, std::abs(net.u().col(i).dot(x.segment(p, 2))));
        }
      } else if (act.is_fc()) {
        m = std::min(m, std::abs(net.u().col(i).dot(x)));
      }
    }
  }
  return m;
}

}  // namespace s2s::test
