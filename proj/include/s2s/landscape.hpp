#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "s2s/dataset.hpp"
#include "s2s/dynamics.hpp"
#include "s2s/netcore.hpp"

namespace s2s {

/// One way of adding a unit to a fixed point without changing its map.
struct EmbeddingSpec {
  enum class Variant { kGeneric, kZero, kHomogeneous, kLinear };
  Variant variant = Variant::kGeneric;
  int donor = 0;          // generic / homogeneous
  double gamma_v = 0.5;   // generic / homogeneous
  double gamma_u = 1.0;   // homogeneous
  std::vector<double> gamma_u_list;  // linear, one per existing unit
  std::vector<double> gamma_v_list;  // linear, one per existing unit

  static EmbeddingSpec generic(int donor, double gamma_v);
  static EmbeddingSpec zero();
  static EmbeddingSpec homogeneous(int donor, double gamma_u, double gamma_v);
  static EmbeddingSpec linear(std::vector<double> gamma_u,
                              std::vector<double> gamma_v);
};

std::string variant_name(EmbeddingSpec::Variant v);
/// Whether construction `v` applies to `act`.
bool variant_legal(EmbeddingSpec::Variant v, const ActivationKind& act);

/// Width H-1 -> H, same input-output map. Throws Unsupported for illegal
/// pairings and InvalidInput for gamma_u < 0 on ReLU kinds.
UnitLayerNet embed_unit(const UnitLayerNet& base, const EmbeddingSpec& spec);

/// Hidden-layer widths of a linear chain: the unit layer, then one per chain
/// matrix except the last.
std::vector<int> chain_widths(const UnitLayerNet& net);

/// Grows every hidden layer of a linear-fc net (identity or deep chain) to
/// `target_widths` by repeated embedding; `spec_per_layer` (optional, one per
/// layer) picks the construction, default zero.
UnitLayerNet embed_deep(const UnitLayerNet& base,
                        const std::vector<int>& target_widths,
                        const std::vector<EmbeddingSpec>& spec_per_layer = {});

struct FixedPointCheck {
  bool is_fixed = false;
  double grad_norm = 0.0;
};

FixedPointCheck verify_fixed_point(const UnitLayerNet& net,
                                   const Objective& objective, double tau);

struct LinearSaddleSpec {
  std::vector<int> index_set;  // zero-based mode indices
  std::uint64_t mask = 0;      // bit k set when mode k is in the set
  int rank = 0;
  Mat w_star;                  // N_v x N_u
  double loss = 0.0;
  Mat v;                       // canonical factorization, one column per mode
  Mat u;
  bool degenerate = false;     // eigenvalue multiplicity near the set
};

struct LinearFpModes {
  Vec lambda;  // eigenvalues of Sigma_yz Sigma_zz^-1 Sigma_yz^T, descending
  Mat e;       // eigenvectors as columns, first largest-magnitude entry > 0
  Mat solve;   // Sigma_zz^-1 Sigma_yz^T
  bool degenerate = false;
};

/// Modes e_k of the linear fixed-point lattice.
LinearFpModes linear_fp_modes(const DataStats& stats, double cond_limit = 1e12);

/// All 2^D saddles (r < 0) or those of rank r, ordered by rank and then
/// lexicographically by index set.
std::vector<LinearSaddleSpec> enumerate_linear_saddles(const DataStats& stats,
                                                       int r = -1);
/// The saddle for one explicit index set.
LinearSaddleSpec linear_saddle(const DataStats& stats,
                               const std::vector<int>& index_set);

/// Width-H linear-fc net placing the canonical factorization in the first
/// units and zeros elsewhere.
UnitLayerNet saddle_net(const LinearSaddleSpec& spec, int width);

/// Sum over k outside the set of e_k e_k^T Sigma_yz.
Mat projected_stats(const DataStats& stats, const std::vector<int>& index_set);

void write_saddle_atlas_csv(const std::vector<LinearSaddleSpec>& saddles,
                            const std::string& path);

struct PolishOptions {
  int gd_steps = 20000;
  double eta = 0.01;
  int newton_iters = 30;
  double tol = 1e-10;
};

struct PolishResult {
  UnitLayerNet net;
  double grad_norm = 0.0;
  double loss = 0.0;
  bool converged = false;
};

/// Drives `net` to a nearby fixed point: gradient descent, then Newton steps
/// on the gradient with a finite-difference Jacobian and a pseudo-inverse.
PolishResult polish_fixed_point(const UnitLayerNet& net,
                                const Objective& objective,
                                const PolishOptions& options = {});

}  // namespace s2s
