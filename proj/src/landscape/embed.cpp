#include <string>
#include <utility>

#include "s2s/landscape.hpp"

namespace s2s {

using Variant = EmbeddingSpec::Variant;

EmbeddingSpec EmbeddingSpec::generic(int donor, double gamma_v) {
  EmbeddingSpec s;
  s.variant = Variant::kGeneric;
  s.donor = donor;
  s.gamma_v = gamma_v;
  return s;
}

EmbeddingSpec EmbeddingSpec::zero() {
  EmbeddingSpec s;
  s.variant = Variant::kZero;
  return s;
}

EmbeddingSpec EmbeddingSpec::homogeneous(int donor, double gamma_u,
                                         double gamma_v) {
  EmbeddingSpec s;
  s.variant = Variant::kHomogeneous;
  s.donor = donor;
  s.gamma_u = gamma_u;
  s.gamma_v = gamma_v;
  return s;
}

EmbeddingSpec EmbeddingSpec::linear(std::vector<double> gamma_u,
                                    std::vector<double> gamma_v) {
  EmbeddingSpec s;
  s.variant = Variant::kLinear;
  s.gamma_u_list = std::move(gamma_u);
  s.gamma_v_list = std::move(gamma_v);
  return s;
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kGeneric:
      return "generic";
    case Variant::kZero:
      return "zero";
    case Variant::kHomogeneous:
      return "homogeneous";
    case Variant::kLinear:
      return "linear";
  }
  return "unknown";
}

bool variant_legal(Variant v, const ActivationKind& act) {
  switch (v) {
    case Variant::kGeneric:
      return true;
    case Variant::kZero:
      return act.has_zero_unit();
    case Variant::kHomogeneous:
      return act.homogeneous();
    case Variant::kLinear:
      return act.linear_in_u();
  }
  return false;
}

UnitLayerNet embed_unit(const UnitLayerNet& base, const EmbeddingSpec& spec) {
  const ActivationKind& act = base.activation();
  if (!variant_legal(spec.variant, act)) {
    throw Unsupported(variant_name(spec.variant) +
                      " embedding does not apply to " + act.name());
  }
  if (base.out_map().kind == OutMap::Kind::kSkipLinear) {
    throw Unsupported("embedding across skip connections is not supported");
  }
  const int h = base.width();
  auto check_donor = [&] {
    if (spec.donor < 0 || spec.donor >= h) {
      throw InvalidInput("donor unit " + std::to_string(spec.donor) +
                         " out of range for width " + std::to_string(h));
    }
  };
  UnitLayerNet out = base;
  switch (spec.variant) {
    case Variant::kGeneric: {
      check_donor();
      const Vec v = base.v().col(spec.donor);
      out.v().col(spec.donor) = (1.0 - spec.gamma_v) * v;
      out.append_unit({spec.gamma_v * v, base.u().col(spec.donor)});
      break;
    }
    case Variant::kZero:
      out.append_unit({Vec::Zero(base.nv()), Vec::Zero(base.nu())});
      break;
    case Variant::kHomogeneous: {
      check_donor();
      if (act.positive_only() && spec.gamma_u < 0.0) {
        throw InvalidInput("gamma_u must be >= 0 for " + act.name());
      }
      const Vec v = base.v().col(spec.donor);
      out.v().col(spec.donor) = (1.0 - spec.gamma_u * spec.gamma_v) * v;
      out.append_unit(
          {spec.gamma_v * v, spec.gamma_u * base.u().col(spec.donor)});
      break;
    }
    case Variant::kLinear: {
      if (static_cast<int>(spec.gamma_u_list.size()) != h ||
          static_cast<int>(spec.gamma_v_list.size()) != h) {
        throw InvalidInput("linear embedding needs " + std::to_string(h) +
                           " gamma_u and gamma_v coefficients");
      }
      Vec vsum = Vec::Zero(base.nv());
      Vec usum = Vec::Zero(base.nu());
      for (int j = 0; j < h; ++j) {
        vsum += spec.gamma_v_list[j] * base.v().col(j);
        usum += spec.gamma_u_list[j] * base.u().col(j);
      }
      for (int i = 0; i < h; ++i) {
        out.v().col(i) = base.v().col(i) - spec.gamma_u_list[i] * vsum;
      }
      out.append_unit({vsum, usum});
      break;
    }
  }
  return out;
}

namespace {

// W_1 = U^T, W_2 = V, then the chain matrices.
std::vector<Mat> chain_layers(const UnitLayerNet& net) {
  std::vector<Mat> ws{net.u().transpose(), net.v()};
  for (const Mat& w : net.out_map().mats) ws.push_back(w);
  return ws;
}

}  // namespace

std::vector<int> chain_widths(const UnitLayerNet& net) {
  if (net.activation().tag() != ActivationTag::kLinearFc ||
      net.out_map().kind == OutMap::Kind::kSkipLinear) {
    return {net.width()};
  }
  const auto ws = chain_layers(net);
  std::vector<int> widths;
  for (std::size_t l = 0; l + 1 < ws.size(); ++l) {
    widths.push_back(static_cast<int>(ws[l].rows()));
  }
  return widths;
}

UnitLayerNet embed_deep(const UnitLayerNet& base,
                        const std::vector<int>& target_widths,
                        const std::vector<EmbeddingSpec>& spec_per_layer) {
  const std::vector<int> widths = chain_widths(base);
  if (target_widths.size() != widths.size()) {
    throw InvalidInput("expected " + std::to_string(widths.size()) +
                       " target widths, got " +
                       std::to_string(target_widths.size()));
  }
  if (!spec_per_layer.empty() && spec_per_layer.size() != widths.size()) {
    throw InvalidInput("need one embedding spec per hidden layer");
  }
  for (std::size_t l = 0; l < widths.size(); ++l) {
    if (target_widths[l] < widths[l]) {
      throw InvalidInput("target width " + std::to_string(target_widths[l]) +
                         " shrinks layer " + std::to_string(l + 1) +
                         " of width " + std::to_string(widths[l]));
    }
  }
  if (widths.size() == 1) {
    UnitLayerNet net = base;
    const EmbeddingSpec spec =
        spec_per_layer.empty() ? EmbeddingSpec::zero() : spec_per_layer[0];
    while (net.width() < target_widths[0]) net = embed_unit(net, spec);
    return net;
  }
  std::vector<Mat> ws = chain_layers(base);
  const ActivationKind lin(ActivationTag::kLinearFc);
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const EmbeddingSpec spec =
        spec_per_layer.empty() ? EmbeddingSpec::zero() : spec_per_layer[l];
    // Layer l's units: incoming rows of W_l, outgoing columns of W_{l+1}.
    UnitLayerNet layer(lin, static_cast<int>(ws[l].cols()), ws[l + 1],
                       ws[l].transpose());
    while (layer.width() < target_widths[l]) layer = embed_unit(layer, spec);
    ws[l] = layer.u().transpose();
    ws[l + 1] = layer.v();
  }
  std::vector<Mat> mats(ws.begin() + 2, ws.end());
  return UnitLayerNet(lin, base.input_dim(), ws[1], ws[0].transpose(),
                      OutMap::chain(std::move(mats)));
}

FixedPointCheck verify_fixed_point(const UnitLayerNet& net,
                                   const Objective& objective, double tau) {
  FixedPointCheck c;
  c.grad_norm = objective.grad(net).norm();
  c.is_fixed = c.grad_norm <= tau;
  return c;
}

}  // namespace s2s
