#pragma once

#include <string>
#include <vector>

#include "s2s/dataset.hpp"
#include "s2s/netcore.hpp"
#include "s2s/types.hpp"

namespace s2s {

enum class SpectralCase { kLinearSvd, kQuadEig, kLinFpEig };

SpectralCase parse_spectral_case(std::string_view name);
std::string spectral_case_name(SpectralCase c);

/// Modes that drive the small-weight dynamics.
///   linear-svd: Sigma_yz = sum_k s_k q_k r_k^T (full SVD, s descending).
///   quad-eig:   Sigma_yZ = sum_k s_k r_k r_k^T (s descending, signed).
///   lin-fp-eig: eigenpairs of Sigma_yz Sigma_zz^-1 Sigma_yz^T, q = r = e_k.
/// Singular/eigen vectors carry the sign convention "largest-magnitude entry
/// positive"; for linear-svd the sign is fixed on r_k and q_k follows.
struct SpectralDecomp {
  SpectralCase kind = SpectralCase::kLinearSvd;
  Vec s;
  Mat q;  // N_v x D (linear-svd), empty for quad-eig
  Mat r;  // N_u x D
  int multiplicity = 1;  // how many s_k tie with s_1 at relative gap 1e-9
  int nv = 0;
  int nu = 0;

  int modes() const { return static_cast<int>(s.size()); }
  /// Top-`multiplicity` projector on stacked (v, u) space (linear-svd):
  /// P = 1/2 sum_{k <= r} [q_k; r_k][q_k; r_k]^T.
  Mat projector() const;
  /// The block matrix [[0, Sigma_yz], [Sigma_yz^T, 0]] rebuilt from the modes.
  Mat block() const;
};

/// `symmetric_tol` bounds ||Sigma_yZ - Sigma_yZ^T|| / ||Sigma_yZ|| for
/// quad-eig; larger asymmetry is rejected unless `symmetrize` is set.
SpectralDecomp spectral(const DataStats& stats, SpectralCase kind,
                        bool symmetrize = false, double symmetric_tol = 1e-10);

/// Decomposition of an explicit Sigma_yz (linear-svd) or symmetric Sigma_yZ
/// (quad-eig).
SpectralDecomp spectral_from_matrix(const Mat& sigma, SpectralCase kind);

// ---- linear case ----------------------------------------------------------

/// Projection constants of one unit on the modes of M.
struct LinearCoeffs {
  Vec c;   // 1/2 (q_k^T v + r_k^T u)
  Vec b;   // 1/2 (q_k^T v - r_k^T u)
  Vec xi;  // remainder outside every [q_k; +-r_k]
};
LinearCoeffs linear_coeffs(const Vec& theta, const SpectralDecomp& d);

/// Exact solution of theta' = M theta for every column of `theta0`
/// ((N_v + N_u) x H).
Mat linear_closed_form(const Mat& theta0, const SpectralDecomp& d, double t);

/// (1/s_1) ln(threshold / ||P Theta(0)||) with the Frobenius norm over all
/// units. Returns +inf when the projection vanishes.
double escape_time(const SpectralDecomp& d, const Mat& theta0,
                   double threshold = 1.0);

struct Alignment {
  double parallel = 0.0;       // ||P theta||
  double perpendicular = 0.0;  // ||(I - P) theta||
};
/// One entry per column of `theta`.
std::vector<Alignment> alignment_residual(const Mat& theta, const SpectralDecomp& d);
/// Frobenius norms over all columns.
Alignment alignment_total(const Mat& theta, const SpectralDecomp& d);

// ---- quadratic case -------------------------------------------------------
//
// A unit of a quadratic network contributes v (u^T x)^2. Writing
// a_k = r_k^T u / sqrt(2), the small-weight flow in reduced time tau = 2t is
//   da_k/dtau = v s_k a_k,   dv/dtau = sum_k s_k a_k^2.
// Every time below is reported in training time t = tau / 2 unless the field
// name says "reduced".

constexpr double kReducedTimeScale = 2.0;

struct QuadCoords {
  Vec a;
  double v = 0.0;
};

QuadCoords quad_coords(const UnitParams& unit, const SpectralDecomp& d);
Vec quad_coords_inverse(const Vec& a, const SpectralDecomp& d);
/// v^2 - sum_k a_k^2.
double conservation(const QuadCoords& c);

/// Right-hand side of the reduced-time flow, for simulations.
void quad_flow(const QuadCoords& c, const Vec& s, Vec& da, double& dv);

struct ReducedSolution {
  int mode = 0;       // m
  double sign = 1.0;  // sign(v(0))
  std::vector<double> t;  // training time
  std::vector<double> pi;
  Mat a;  // modes x grid
  std::vector<double> v;
  bool clamped = false;  // a negative radicand was clamped to 0
  bool blew_up = false;  // pi left the representable range before the grid end
};

/// Integrates d pi_m/dtau = sign(v0) s_m pi_m sqrt(R(pi_m)) from pi_m = 1,
/// R(pi) = v0^2 + sum_k a_k0^2 (pi^(2 s_k / s_m) - 1), and rebuilds a_k and v.
/// `grid` holds training times in ascending order starting at 0. Throws
/// InvalidInput when sign(v0) s_m <= 0 (no mode grows).
ReducedSolution reduced_ode(const QuadCoords& init, const SpectralDecomp& d,
                            const std::vector<double>& grid);

struct TInfinity {
  double reduced = 0.0;  // tau units
  double time = 0.0;     // training time
  int phases = 0;        // sign changes of v passed before blow-up, plus one
  bool finite = true;
};

/// Blow-up time of the reduced flow by tanh-sinh quadrature over w = 1/pi.
/// When v(0) has the wrong sign for every mode, v first runs to zero and the
/// flow is restarted from there.
TInfinity t_infinity(const QuadCoords& init, const SpectralDecomp& d,
                     double rel_tol = 1e-8);

struct UnitOrder {
  std::vector<int> order;          // ascending t_infinity
  std::vector<double> t_infinity;  // training time, per unit index
  std::vector<std::vector<int>> ties;  // groups equal to relative 1e-9
};

UnitOrder unit_order_prediction(const UnitLayerNet& net, const SpectralDecomp& d);

}  // namespace s2s
