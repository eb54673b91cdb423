#include <cmath>
#include <sstream>
#include <string>

#include "s2s/netcore.hpp"

namespace s2s {

namespace {

struct NamedTag {
  std::string_view name;
  ActivationTag tag;
};

constexpr NamedTag kNames[] = {
    {"linear-fc", ActivationTag::kLinearFc},
    {"relu-fc", ActivationTag::kReluFc},
    {"conv1d-linear", ActivationTag::kConv1dLinear},
    {"conv1d-relu", ActivationTag::kConv1dRelu},
    {"quadratic-fc", ActivationTag::kQuadraticFc},
    {"poly-fc", ActivationTag::kPolyFc},
    {"tanh-fc", ActivationTag::kTanhFc},
    {"sigmoid-fc", ActivationTag::kSigmoidFc},
    {"sin-fc", ActivationTag::kSinFc},
    {"ztanh-fc", ActivationTag::kZtanhFc},
    {"linear-attention", ActivationTag::kLinearAttention},
};

}  // namespace

ActivationKind::ActivationKind(ActivationTag tag, int degree,
                               AttentionGeometry attention)
    : tag_(tag), degree_(degree), attention_(attention) {
  if (tag_ == ActivationTag::kQuadraticFc) degree_ = 2;
  if (tag_ == ActivationTag::kPolyFc && degree_ < 2) {
    throw InvalidInput("poly-fc degree must be >= 2, got " +
                       std::to_string(degree_));
  }
  if (tag_ == ActivationTag::kLinearAttention &&
      (attention_.embed_dim < 1 || attention_.context_len < 1 ||
       attention_.head_rank < 1)) {
    throw InvalidInput("linear-attention geometry must be positive");
  }
}

ActivationKind ActivationKind::poly(int degree) {
  return ActivationKind(ActivationTag::kPolyFc, degree);
}

ActivationKind ActivationKind::attention(AttentionGeometry geometry) {
  return ActivationKind(ActivationTag::kLinearAttention, 2, geometry);
}

ActivationKind ActivationKind::parse(std::string_view name) {
  std::string_view base = name;
  std::string_view arg;
  if (auto colon = name.find(':'); colon != std::string_view::npos) {
    base = name.substr(0, colon);
    arg = name.substr(colon + 1);
  }
  for (const auto& entry : kNames) {
    if (entry.name != base) continue;
    if (entry.tag == ActivationTag::kPolyFc) {
      int degree = 3;
      if (!arg.empty()) degree = std::stoi(std::string(arg));
      return poly(degree);
    }
    if (entry.tag == ActivationTag::kLinearAttention && !arg.empty()) {
      AttentionGeometry g;
      char sep1 = 0, sep2 = 0;
      std::istringstream in{std::string(arg)};
      in >> g.embed_dim >> sep1 >> g.context_len >> sep2 >> g.head_rank;
      if (!in || sep1 != ',' || sep2 != ',') {
        throw InvalidInput("linear-attention expects D,N,R after ':'");
      }
      return attention(g);
    }
    if (!arg.empty()) {
      throw InvalidInput("activation '" + std::string(base) +
                         "' takes no argument");
    }
    return ActivationKind(entry.tag);
  }
  throw InvalidInput("unknown activation kind '" + std::string(name) + "'");
}

std::string ActivationKind::name() const {
  for (const auto& entry : kNames) {
    if (entry.tag != tag_) continue;
    std::string out(entry.name);
    if (tag_ == ActivationTag::kPolyFc) out += ":" + std::to_string(degree_);
    if (tag_ == ActivationTag::kLinearAttention) {
      out += ":" + std::to_string(attention_.embed_dim) + "," +
             std::to_string(attention_.context_len) + "," +
             std::to_string(attention_.head_rank);
    }
    return out;
  }
  return "unknown";
}

bool ActivationKind::is_conv() const {
  return tag_ == ActivationTag::kConv1dLinear ||
         tag_ == ActivationTag::kConv1dRelu;
}

bool ActivationKind::is_fc() const {
  return !is_conv() && tag_ != ActivationTag::kLinearAttention;
}

bool ActivationKind::has_zero_unit() const {
  return tag_ != ActivationTag::kSigmoidFc;
}

bool ActivationKind::homogeneous() const {
  switch (tag_) {
    case ActivationTag::kLinearFc:
    case ActivationTag::kReluFc:
    case ActivationTag::kConv1dLinear:
    case ActivationTag::kConv1dRelu:
      return true;
    default:
      return false;
  }
}

bool ActivationKind::positive_only() const {
  return tag_ == ActivationTag::kReluFc || tag_ == ActivationTag::kConv1dRelu;
}

bool ActivationKind::linear_in_u() const {
  return tag_ == ActivationTag::kLinearFc ||
         tag_ == ActivationTag::kConv1dLinear;
}

bool ActivationKind::smooth() const { return !positive_only(); }

std::optional<FeatureMap> ActivationKind::feature_map() const {
  switch (tag_) {
    case ActivationTag::kLinearFc:
    case ActivationTag::kConv1dLinear:
      return FeatureMap::kIdentity;
    case ActivationTag::kQuadraticFc:
      return FeatureMap::kOuter;
    case ActivationTag::kLinearAttention:
      return FeatureMap::kAttention;
    default:
      return std::nullopt;
  }
}

double ActivationKind::sigma(double a) const {
  switch (tag_) {
    case ActivationTag::kLinearFc:
    case ActivationTag::kConv1dLinear:
      return a;
    case ActivationTag::kReluFc:
    case ActivationTag::kConv1dRelu:
      return a > 0.0 ? a : 0.0;
    case ActivationTag::kQuadraticFc:
      return a * a;
    case ActivationTag::kPolyFc:
      return std::pow(a, degree_);
    case ActivationTag::kTanhFc:
      return std::tanh(a);
    case ActivationTag::kSigmoidFc:
      return 1.0 / (1.0 + std::exp(-a));
    case ActivationTag::kSinFc:
      return std::sin(a);
    case ActivationTag::kZtanhFc:
      return a * std::tanh(a);
    case ActivationTag::kLinearAttention:
      break;
  }
  throw Unsupported("sigma() is undefined for " + name());
}

double ActivationKind::sigma_prime(double a) const {
  switch (tag_) {
    case ActivationTag::kLinearFc:
    case ActivationTag::kConv1dLinear:
      return 1.0;
    case ActivationTag::kReluFc:
    case ActivationTag::kConv1dRelu:
      // Subgradient at the kink is 0.
      return a > 0.0 ? 1.0 : 0.0;
    case ActivationTag::kQuadraticFc:
      return 2.0 * a;
    case ActivationTag::kPolyFc:
      return degree_ * std::pow(a, degree_ - 1);
    case ActivationTag::kTanhFc: {
      const double t = std::tanh(a);
      return 1.0 - t * t;
    }
    case ActivationTag::kSigmoidFc: {
      const double s = 1.0 / (1.0 + std::exp(-a));
      return s * (1.0 - s);
    }
    case ActivationTag::kSinFc:
      return std::cos(a);
    case ActivationTag::kZtanhFc: {
      const double t = std::tanh(a);
      return t + a * (1.0 - t * t);
    }
    case ActivationTag::kLinearAttention:
      break;
  }
  throw Unsupported("sigma_prime() is undefined for " + name());
}

}  // namespace s2s
