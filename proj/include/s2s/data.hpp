#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "s2s/constraint.hpp"
#include "s2s/dataset.hpp"
#include "s2s/netcore.hpp"

namespace s2s {

using Rng = std::mt19937_64;

/// Independent generator for a named purpose ("init", "data", ...). Changing
/// one stream's consumer never shifts another stream.
Rng substream(std::uint64_t seed, std::string_view name);

/// Knobs for gen_dataset; each kind reads only the fields it documents.
struct DatasetParams {
  // linear-fc-teacher: y = W* x with x ~ N(0, [[1,1],[1,4]]). Default W* = I.
  Mat teacher_w;
  // icl-regression geometry.
  int embed_dim = 2;
  int context_len = 32;
  // Per-coordinate std of the token inputs; empty means all ones.
  std::vector<double> token_scales;
  // generic-teacher: y = sum_k teacher_v[k] phi(x; teacher_u[:, k]),
  // x ~ N(0, I_input_dim).
  std::string teacher_activation = "tanh-fc";
  Mat teacher_u;
  Mat teacher_v;
  // csv
  std::string path;
};

/// Kinds: linear-fc-teacher, linear-conv, relu-orthogonal, relu-conv,
/// icl-regression, quadratic-teacher, generic-teacher, csv.
Dataset gen_dataset(std::string_view kind, const DatasetParams& params, int p,
                    std::uint64_t seed);

std::vector<std::string> dataset_kinds();

enum class SpectrumMode { kLinear, kQuadratic };

struct SpectrumData {
  Dataset data;
  DataStats stats;  // prescribed
  Vec s;            // normalized power law s_n = n^-kappa, sum 1
};

/// Normalized power law of length d.
Vec power_law(double kappa, int d);

/// Linear mode: Sigma_zz = I, Sigma_yz = Q diag(s) R^T, y = Sigma_yz z.
/// Quadratic mode: symmetric Sigma_yZ of size (d+1) with eigenvalues s and one
/// extra eigenvalue -0.5 s_d, realized by a Gaussian quadratic teacher.
SpectrumData gen_spectrum_dataset(double kappa, int d, SpectrumMode mode, int p,
                                  std::uint64_t seed);

/// Empirical moments of `data` under the feature map of `act`.
DataStats compute_stats(const Dataset& data, const ActivationKind& act);

/// Haar-random orthogonal matrix.
Mat random_orthogonal(int n, Rng& rng);

struct InitSpec {
  enum class Scheme { kIsotropic, kLowRank, kManifoldAdjacent };
  Scheme scheme = Scheme::kIsotropic;
  double epsilon = 1e-6;  // isotropic std (also the base for manifold-adjacent)
  int rank = 1;           // low-rank
  double sigma = 1.0;     // low-rank scale
  double delta = 0.0;     // perturbation std
  std::vector<ManifoldConstraint> constraints;
  std::uint64_t seed = 0;
};

/// Fills every parameter of `shape` (width, dims, out map) per `spec`.
UnitLayerNet init_weights(const UnitLayerNet& shape, const InitSpec& spec);

// CSV: header x0..x{n-1},y0..y{m-1}; one sample per line.
Dataset read_csv_dataset(const std::string& path);
void write_csv_dataset(const Dataset& data, const std::string& path);

// Matrix files: first line "rows,cols", then one comma-separated row per line.
Mat read_matrix_csv(const std::string& path);
void write_matrix_csv(const Mat& m, const std::string& path);

}  // namespace s2s
