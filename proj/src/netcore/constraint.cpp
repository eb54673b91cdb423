#include <sstream>
#include <utility>

#include "s2s/constraint.hpp"

namespace s2s {

ManifoldConstraint ManifoldConstraint::equal(int i, int j) {
  ManifoldConstraint c;
  c.kind = Kind::kEqual;
  c.i = i;
  c.j = j;
  return c;
}

ManifoldConstraint ManifoldConstraint::zero(int i) {
  ManifoldConstraint c;
  c.kind = Kind::kZero;
  c.i = i;
  c.j = i;
  return c;
}

ManifoldConstraint ManifoldConstraint::proportional(int i, int j,
                                                    std::optional<double> gamma) {
  ManifoldConstraint c;
  c.kind = Kind::kProportional;
  c.i = i;
  c.j = j;
  c.gamma = gamma;
  return c;
}

ManifoldConstraint ManifoldConstraint::lindep(int i, std::vector<double> coeffs) {
  ManifoldConstraint c;
  c.kind = Kind::kLinDep;
  c.i = i;
  c.j = i;
  c.coeffs = std::move(coeffs);
  return c;
}

std::string ManifoldConstraint::describe() const {
  std::ostringstream out;
  switch (kind) {
    case Kind::kEqual:
      out << "equal(" << i << "," << j << ")";
      break;
    case Kind::kZero:
      out << "zero(" << i << ")";
      break;
    case Kind::kProportional:
      out << "proportional(" << i << "," << j << ",";
      if (gamma) {
        out << *gamma;
      } else {
        out << "fit";
      }
      out << ")";
      break;
    case Kind::kLinDep:
      out << "lindep(" << i << ",[";
      for (std::size_t k = 0; k < coeffs.size(); ++k) {
        if (k) out << ",";
        out << coeffs[k];
      }
      out << "])";
      break;
  }
  return out.str();
}

}  // namespace s2s
