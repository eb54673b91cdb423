#pragma once

#include <optional>
#include <string>
#include <vector>

namespace s2s {

/// A relation between units that gradient flow preserves. Unit indices are
/// zero-based.
struct ManifoldConstraint {
  enum class Kind { kEqual, kZero, kProportional, kLinDep };

  Kind kind = Kind::kEqual;
  int i = 0;
  int j = 0;
  // theta_i = gamma * theta_j. Unset means "fit gamma" where an operation
  // supports it (project).
  std::optional<double> gamma;
  // theta_i = sum_{j != i} coeffs[j] * theta_j; coeffs has one entry per unit
  // and coeffs[i] is ignored.
  std::vector<double> coeffs;

  static ManifoldConstraint equal(int i, int j);
  static ManifoldConstraint zero(int i);
  static ManifoldConstraint proportional(int i, int j,
                                         std::optional<double> gamma);
  static ManifoldConstraint lindep(int i, std::vector<double> coeffs);

  std::string describe() const;
};

}  // namespace s2s
