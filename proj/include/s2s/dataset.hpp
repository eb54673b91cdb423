#pragma once

#include <string>

#include "s2s/types.hpp"

namespace s2s {

/// Training pairs, one sample per row. Token matrices (attention inputs) are
/// stored column-major flattened, so every input is a plain row vector.
struct Dataset {
  Mat x;             // P x input_dim
  Mat y;             // P x output_dim
  std::string kind;  // generator tag, informational

  int size() const { return static_cast<int>(x.rows()); }
  int input_dim() const { return static_cast<int>(x.cols()); }
  int output_dim() const { return static_cast<int>(y.cols()); }

  void validate() const;
};

/// Which fixed feature map turns an input into the moment features the
/// network output is linear in.
enum class FeatureMap {
  kIdentity,   // z = x                      (linear-fc, conv1d-linear)
  kOuter,      // Z = x x^T, vec'd           (quadratic-fc)
  kAttention,  // T[a,b,c] = (X X^T)[a,b] X[c,N], vec'd (linear-attention)
};

enum class Provenance { kEmpirical, kPrescribed };

/// Second-moment statistics of a dataset under a feature map:
///   yz = E[y f^T], zz = E[f f^T], yy = E||y||^2.
/// For kOuter, yz reshaped to d x d is Sigma_yZ and zz is Sigma_ZZ.
struct DataStats {
  FeatureMap features = FeatureMap::kIdentity;
  Mat yz;
  Mat zz;
  double yy = 0.0;
  Provenance provenance = Provenance::kEmpirical;
  int samples = 0;

  int feature_dim() const { return static_cast<int>(zz.rows()); }
  int output_dim() const { return static_cast<int>(yz.rows()); }

  /// Sigma_yZ as a symmetric d x d matrix (kOuter only, scalar output).
  Mat sigma_yZ() const;
};

}  // namespace s2s
