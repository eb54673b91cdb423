#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "s2s/constraint.hpp"
#include "s2s/dataset.hpp"
#include "s2s/types.hpp"

namespace s2s {

enum class ActivationTag {
  kLinearFc,
  kReluFc,
  kConv1dLinear,
  kConv1dRelu,
  kQuadraticFc,
  kPolyFc,
  kTanhFc,
  kSigmoidFc,
  kSinFc,
  kZtanhFc,
  kLinearAttention,
};

/// Geometry of a linear self-attention layer: tokens are (embed_dim + 1)
/// dimensional, the context holds context_len tokens plus one query, and each
/// head has key/query rank head_rank.
struct AttentionGeometry {
  int embed_dim = 2;
  int context_len = 32;
  int head_rank = 1;

  int token_dim() const { return embed_dim + 1; }
  int tokens() const { return context_len + 1; }

  friend bool operator==(const AttentionGeometry&, const AttentionGeometry&) = default;
};

/// The per-unit nonlinearity phi(z; u) of a unit layer.
class ActivationKind {
 public:
  ActivationKind() = default;
  explicit ActivationKind(ActivationTag tag, int degree = 2,
                          AttentionGeometry attention = {});

  static ActivationKind poly(int degree);
  static ActivationKind attention(AttentionGeometry geometry);

  /// Parses "linear-fc", "relu-fc", "poly-fc:3", "linear-attention", ...
  static ActivationKind parse(std::string_view name);

  ActivationTag tag() const { return tag_; }
  int degree() const { return degree_; }
  const AttentionGeometry& geometry() const { return attention_; }
  std::string name() const;

  bool is_conv() const;
  bool is_fc() const;
  /// phi(z; 0) = 0 for every z.
  bool has_zero_unit() const;
  /// phi(z; a u) = a phi(z; u) for a in R (or R>=0 when positive_only()).
  bool homogeneous() const;
  bool positive_only() const;
  bool linear_in_u() const;
  bool smooth() const;
  /// Output is linear in a fixed feature map of the input (moment path).
  std::optional<FeatureMap> feature_map() const;

  /// Scalar activation sigma(a) and its derivative for fc/conv kinds.
  double sigma(double a) const;
  double sigma_prime(double a) const;

  friend bool operator==(const ActivationKind&, const ActivationKind&) = default;

 private:
  ActivationTag tag_ = ActivationTag::kLinearFc;
  int degree_ = 2;
  AttentionGeometry attention_{};
};

struct UnitParams {
  Vec v;
  Vec u;
};

enum class SkipPattern { kNone, kSkip1, kSkip2 };

/// Post-processing g_out applied to zeta = sum_i phi(x; u_i) v_i. Deep chains
/// and skip networks are restricted to linear-fc layers.
struct OutMap {
  enum class Kind { kIdentity, kDeepLinearChain, kSkipLinear };
  Kind kind = Kind::kIdentity;
  SkipPattern pattern = SkipPattern::kNone;
  // Chain: W_1..W_L applied in order after zeta. Skip: {W3, W4}.
  std::vector<Mat> mats;

  static OutMap identity() { return {}; }
  static OutMap chain(std::vector<Mat> mats);
  static OutMap skip(SkipPattern pattern, Mat w3, Mat w4);
};

/// A layer of H units; unit i owns column i of v() (N_v) and of u() (N_u).
class UnitLayerNet {
 public:
  UnitLayerNet() = default;
  UnitLayerNet(ActivationKind act, int input_dim, Mat v, Mat u,
               OutMap out = OutMap::identity());

  /// All-zero parameters with the canonical unit dimensions for `act`.
  /// `zeta_dim` is the fc output width (N_v); ignored for conv/attention.
  static UnitLayerNet zeros(const ActivationKind& act, int input_dim,
                            int zeta_dim, int width,
                            OutMap out = OutMap::identity());

  const ActivationKind& activation() const { return act_; }
  const OutMap& out_map() const { return out_; }
  OutMap& out_map() { return out_; }

  int width() const { return static_cast<int>(v_.cols()); }
  int nv() const { return static_cast<int>(v_.rows()); }
  int nu() const { return static_cast<int>(u_.rows()); }
  int input_dim() const { return input_dim_; }
  int output_dim() const;

  const Mat& v() const { return v_; }
  const Mat& u() const { return u_; }
  Mat& v() { return v_; }
  Mat& u() { return u_; }

  UnitParams unit(int i) const;
  void set_unit(int i, const UnitParams& p);
  void append_unit(const UnitParams& p);
  void remove_unit(int i);

  /// theta_i = [v_i; u_i] as columns of an (N_v + N_u) x H matrix.
  Mat stacked() const;
  /// sum_i v_i u_i^T (N_v x N_u).
  Mat product() const { return v_ * u_.transpose(); }

  int num_params() const;
  /// Unit-major: v_1, u_1, v_2, u_2, ..., then out-map matrices column-major.
  Vec flatten() const;
  void assign(const Vec& params);

  void validate() const;

 private:
  ActivationKind act_{};
  int input_dim_ = 0;
  Mat v_;
  Mat u_;
  OutMap out_{};
};

/// Canonical (N_u, N_v) of one unit.
struct UnitDims {
  int nu;
  int nv;
};
UnitDims unit_dims(const ActivationKind& act, int input_dim, int zeta_dim);

/// dL/dtheta with the same layout as the network.
struct Gradient {
  Mat dv;
  Mat du;
  std::vector<Mat> dout;

  Vec flatten() const;
  double norm() const;
};

// Forward map on one input and on a batch (rows of x).
Vec forward(const UnitLayerNet& net, const Vec& x);
Mat forward_batch(const UnitLayerNet& net, const Mat& x);

/// L = (1/P) sum_mu 1/2 ||y_mu - f(x_mu)||^2.
double loss(const UnitLayerNet& net, const Dataset& data);
Gradient grad(const UnitLayerNet& net, const Dataset& data);

/// Same quantities from second-moment statistics (moment-path kinds only).
double loss(const UnitLayerNet& net, const DataStats& stats);
Gradient grad(const UnitLayerNet& net, const DataStats& stats);

/// Central differences of loss over every parameter.
Gradient grad_fd(const UnitLayerNet& net, const Dataset& data, double h);

/// The matrix A(theta) with f(x) = A(theta) * features(x) for moment kinds.
Mat moment_map(const UnitLayerNet& net);
/// Moment features of one input and the parameter-free part of the output
/// (the residual-stream term X[D, N] for attention, zero otherwise).
Vec moment_features(const ActivationKind& act, const Vec& x,
                    double* offset = nullptr);
/// Chain rule from dL/dA back to parameters.
Gradient moment_backprop(const UnitLayerNet& net, const Mat& dA);

Gradient zero_gradient(const UnitLayerNet& net);
Gradient unflatten_gradient(const UnitLayerNet& net, const Vec& flat);

/// Distance of `net` from the constraint set: ||theta_i - theta_j|| (equal),
/// ||theta_i|| (zero), ||theta_i - gamma theta_j|| (proportional; gamma is fitted
/// when unset), ||theta_i - sum_j coeffs_j theta_j|| (lindep).
double constraint_residual(const UnitLayerNet& net, const ManifoldConstraint& c);
/// Throws Unsupported when the constraint kind is not preserved for this
/// activation, InvalidInput for bad indices or a negative gamma on ReLU kinds.
void check_constraint(const UnitLayerNet& net, const ManifoldConstraint& c);
/// Least-squares gamma = <theta_i, theta_j> / ||theta_j||^2.
double fit_gamma(const UnitLayerNet& net, int i, int j);

/// Removes one unit from a net that satisfies `c` (residual <= tol) while
/// keeping its input-output map. Throws NotOnManifold otherwise.
UnitLayerNet reduce_width(const UnitLayerNet& net, const ManifoldConstraint& c,
                          double tol = 1e-10);

}  // namespace s2s
