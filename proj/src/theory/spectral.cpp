#include <cmath>
#include <string>

#include "s2s/landscape.hpp"
#include "s2s/theory.hpp"

namespace s2s {

namespace {

constexpr double kTieGap = 1e-9;

// Flips `x` (and `partner` with it) so the largest-magnitude entry is positive.
void fix_sign(Eigen::Ref<Vec> x, Eigen::Ref<Vec> partner) {
  if (x.size() == 0) return;
  Eigen::Index k = 0;
  x.cwiseAbs().maxCoeff(&k);
  if (x[k] < 0.0) {
    x = -x;
    partner = -partner;
  }
}

int top_multiplicity(const Vec& s) {
  if (s.size() == 0) return 0;
  const double scale = std::max(std::abs(s[0]), 1e-300);
  int r = 1;
  while (r < s.size() && std::abs(s[r] - s[0]) <= kTieGap * scale) ++r;
  return r;
}

void require_linear(const SpectralDecomp& d, const char* what) {
  if (d.kind == SpectralCase::kQuadEig) {
    throw InvalidInput(std::string(what) + " needs a linear decomposition");
  }
}

}  // namespace

SpectralCase parse_spectral_case(std::string_view name) {
  if (name == "linear-svd") return SpectralCase::kLinearSvd;
  if (name == "quad-eig") return SpectralCase::kQuadEig;
  if (name == "lin-fp-eig") return SpectralCase::kLinFpEig;
  throw InvalidInput("unknown spectral case '" + std::string(name) + "'");
}

std::string spectral_case_name(SpectralCase c) {
  switch (c) {
    case SpectralCase::kLinearSvd:
      return "linear-svd";
    case SpectralCase::kQuadEig:
      return "quad-eig";
    case SpectralCase::kLinFpEig:
      return "lin-fp-eig";
  }
  return "unknown";
}

SpectralDecomp spectral_from_matrix(const Mat& sigma, SpectralCase kind) {
  SpectralDecomp d;
  d.kind = kind;
  if (sigma.size() == 0) throw ShapeError("empty moment matrix");
  if (kind == SpectralCase::kQuadEig) {
    if (sigma.rows() != sigma.cols()) throw ShapeError("Sigma_yZ must be square");
    const double asym =
        (sigma - sigma.transpose()).norm() / std::max(sigma.norm(), 1e-300);
    if (asym > 1e-10) {
      throw InvalidInput("Sigma_yZ is not symmetric (relative asymmetry " +
                         std::to_string(asym) + ")");
    }
    Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (sigma + sigma.transpose()));
    const Eigen::Index n = sigma.rows();
    d.s.resize(n);
    d.r.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
      d.s[k] = eig.eigenvalues()[n - 1 - k];
      d.r.col(k) = eig.eigenvectors().col(n - 1 - k);
      Vec dummy(0);
      fix_sign(d.r.col(k), dummy);
    }
    d.nu = static_cast<int>(n);
    d.nv = 1;
  } else if (kind == SpectralCase::kLinearSvd) {
    Eigen::JacobiSVD<Mat> svd(sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Index n = std::min(sigma.rows(), sigma.cols());
    d.s = svd.singularValues().head(n);
    d.q = svd.matrixU().leftCols(n);
    d.r = svd.matrixV().leftCols(n);
    for (Eigen::Index k = 0; k < n; ++k) fix_sign(d.r.col(k), d.q.col(k));
    d.nv = static_cast<int>(sigma.rows());
    d.nu = static_cast<int>(sigma.cols());
  } else {
    throw InvalidInput("lin-fp-eig needs full statistics, use spectral()");
  }
  d.multiplicity = top_multiplicity(d.s);
  return d;
}

SpectralDecomp spectral(const DataStats& stats, SpectralCase kind, bool symmetrize,
                        double symmetric_tol) {
  switch (kind) {
    case SpectralCase::kLinearSvd:
      return spectral_from_matrix(stats.yz, kind);
    case SpectralCase::kQuadEig: {
      if (stats.features != FeatureMap::kOuter || stats.yz.rows() != 1) {
        throw InvalidInput("quad-eig needs outer-product statistics with a scalar output");
      }
      const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(stats.yz.cols())));
      const Mat raw = stats.yz.row(0).reshaped(n, n);
      const double scale = std::max(raw.norm(), 1e-300);
      const double asym = (raw - raw.transpose()).norm() / scale;
      if (asym > symmetric_tol && !symmetrize) {
        throw InvalidInput("Sigma_yZ is not symmetric (relative asymmetry " +
                           std::to_string(asym) + ")");
      }
      return spectral_from_matrix(0.5 * (raw + raw.transpose()), kind);
    }
    case SpectralCase::kLinFpEig: {
      const LinearFpModes m = linear_fp_modes(stats);
      SpectralDecomp d;
      d.kind = kind;
      d.s = m.lambda;
      d.q = m.e;
      d.r = m.e;
      d.nv = d.nu = static_cast<int>(m.e.rows());
      d.multiplicity = top_multiplicity(d.s);
      return d;
    }
  }
  throw InvalidInput("unknown spectral case");
}

Mat SpectralDecomp::projector() const {
  if (kind == SpectralCase::kQuadEig) {
    Mat p = Mat::Zero(nu, nu);
    for (int k = 0; k < multiplicity; ++k) p += r.col(k) * r.col(k).transpose();
    return p;
  }
  Mat p = Mat::Zero(nv + nu, nv + nu);
  for (int k = 0; k < multiplicity; ++k) {
    Vec w(nv + nu);
    w << q.col(k), r.col(k);
    p += 0.5 * w * w.transpose();
  }
  return p;
}

Mat SpectralDecomp::block() const {
  require_linear(*this, "block()");
  const Mat sigma = q * s.asDiagonal() * r.transpose();
  Mat m = Mat::Zero(nv + nu, nv + nu);
  m.topRightCorner(nv, nu) = sigma;
  m.bottomLeftCorner(nu, nv) = sigma.transpose();
  return m;
}

LinearCoeffs linear_coeffs(const Vec& theta, const SpectralDecomp& d) {
  require_linear(d, "linear_coeffs");
  if (theta.size() != d.nv + d.nu) throw ShapeError("theta has the wrong length");
  const Vec v = theta.head(d.nv);
  const Vec u = theta.tail(d.nu);
  const Vec qv = d.q.transpose() * v;
  const Vec ru = d.r.transpose() * u;
  LinearCoeffs c;
  c.c = 0.5 * (qv + ru);
  c.b = 0.5 * (qv - ru);
  c.xi.resize(theta.size());
  c.xi << v - d.q * qv, u - d.r * ru;
  return c;
}

Mat linear_closed_form(const Mat& theta0, const SpectralDecomp& d, double t) {
  require_linear(d, "linear_closed_form");
  if (theta0.rows() != d.nv + d.nu) throw ShapeError("theta has the wrong length");
  // Written as theta(0) plus the change, so t = 0 returns theta(0) exactly.
  Mat out = theta0;
  const Vec grow = (d.s * t).array().unaryExpr([](double x) { return std::expm1(x); });
  const Vec decay = (-d.s * t).array().unaryExpr([](double x) { return std::expm1(x); });
  for (Eigen::Index i = 0; i < theta0.cols(); ++i) {
    const LinearCoeffs c = linear_coeffs(theta0.col(i), d);
    const Vec plus = c.c.cwiseProduct(grow);
    const Vec minus = c.b.cwiseProduct(decay);
    out.col(i).head(d.nv) += d.q * (plus + minus);
    out.col(i).tail(d.nu) += d.r * (plus - minus);
  }
  return out;
}

double escape_time(const SpectralDecomp& d, const Mat& theta0, double threshold) {
  require_linear(d, "escape_time");
  if (!(threshold > 0.0)) throw InvalidInput("escape threshold must be > 0");
  if (d.modes() == 0 || !(d.s[0] > 0.0)) return INFINITY;
  const double proj = (d.projector() * theta0).norm();
  if (!(proj > 0.0)) return INFINITY;
  return std::log(threshold / proj) / d.s[0];
}

std::vector<Alignment> alignment_residual(const Mat& theta, const SpectralDecomp& d) {
  const Mat p = d.projector();
  if (theta.rows() != p.rows()) throw ShapeError("theta has the wrong length");
  std::vector<Alignment> out;
  for (Eigen::Index i = 0; i < theta.cols(); ++i) {
    const Vec par = p * theta.col(i);
    out.push_back({par.norm(), (theta.col(i) - par).norm()});
  }
  return out;
}

Alignment alignment_total(const Mat& theta, const SpectralDecomp& d) {
  const Mat p = d.projector();
  if (theta.rows() != p.rows()) throw ShapeError("theta has the wrong length");
  const Mat par = p * theta;
  return {par.norm(), (theta - par).norm()};
}

}  // namespace s2s
