#include <algorithm>
#include <cmath>
#include <string>

#include "s2s/data.hpp"
#include "s2s/manifold.hpp"

namespace s2s {

void Dataset::validate() const {
  if (x.rows() != y.rows()) {
    throw ShapeError("dataset has " + std::to_string(x.rows()) + " inputs but " +
                     std::to_string(y.rows()) + " targets");
  }
  if (!x.allFinite() || !y.allFinite()) {
    throw InvalidInput("dataset contains non-finite values");
  }
}

Mat DataStats::sigma_yZ() const {
  if (features != FeatureMap::kOuter || yz.rows() != 1) {
    throw InvalidInput("Sigma_yZ needs outer-product features and a scalar output");
  }
  const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(yz.cols())));
  const Mat m = yz.row(0).reshaped(d, d);
  return 0.5 * (m + m.transpose());
}

Rng substream(std::uint64_t seed, std::string_view name) {
  // FNV-1a keeps stream identities stable across platforms.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h),
                    static_cast<std::uint32_t>(h >> 32)};
  return Rng(seq);
}

namespace {

Mat gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Mat m(rows, cols);
  // Fill row by row so a sample's entries are drawn together.
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = n(rng);
  return m;
}

Mat correlated(const Mat& cov, int p, Rng& rng) {
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success) throw InvalidInput("covariance is not positive definite");
  return gaussian(p, cov.rows(), rng) * llt.matrixL().transpose();
}

void require_p(int p) {
  if (p < 1) throw InvalidInput("sample count P must be >= 1");
}

}  // namespace

Mat random_orthogonal(int n, Rng& rng) {
  const Mat g = gaussian(n, n, rng);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ() * Mat::Identity(n, n);
  const Mat r = qr.matrixQR();
  for (int k = 0; k < n; ++k) {
    if (r(k, k) < 0.0) q.col(k) = -q.col(k);
  }
  return q;
}

std::vector<std::string> dataset_kinds() {
  return {"linear-fc-teacher", "linear-conv",       "relu-orthogonal",
          "relu-conv",         "icl-regression",    "quadratic-teacher",
          "generic-teacher",   "csv"};
}

Dataset gen_dataset(std::string_view kind, const DatasetParams& params, int p,
                    std::uint64_t seed) {
  Rng rng = substream(seed, "data");
  Dataset d;
  d.kind = std::string(kind);
  if (kind == "linear-fc-teacher") {
    require_p(p);
    Mat cov(2, 2);
    cov << 1, 1, 1, 4;
    const Mat w = params.teacher_w.size() ? params.teacher_w : Mat::Identity(2, 2);
    if (w.cols() != 2) throw ShapeError("teacher W* must have 2 columns");
    d.x = correlated(cov, p, rng);
    d.y = d.x * w.transpose();
  } else if (kind == "linear-conv") {
    require_p(p);
    const Vec cov = (Vec(4) << 1, 1, 2, 1).finished();
    const Vec w = (Vec(4) << 1, 1, -1, 1).finished() / std::sqrt(5.0);
    d.x = correlated(cov.asDiagonal().toDenseMatrix(), p, rng);
    d.y = d.x * w;
  } else if (kind == "relu-orthogonal") {
    d.x.resize(2, 2);
    d.x << 1, 0.5, -1, 2;
    d.y.resize(2, 1);
    d.y << 1, -1;
  } else if (kind == "relu-conv") {
    d.x = Mat::Zero(4, 4);
    d.x(0, 0) = 2;
    d.x(1, 1) = 2;
    d.x(2, 2) = 2 * std::sqrt(2.0);
    d.x(3, 3) = 2;
    const Vec w = (Vec(4) << 1, 1, -1, 1).finished() / std::sqrt(5.0);
    d.y = d.x * w;
  } else if (kind == "icl-regression") {
    require_p(p);
    const int dim = params.embed_dim;
    const int n = params.context_len;
    if (dim < 1 || n < 1) throw InvalidInput("icl-regression needs D, N >= 1");
    Vec scale = Vec::Ones(dim);
    if (!params.token_scales.empty()) {
      if (static_cast<int>(params.token_scales.size()) != dim) {
        throw InvalidInput("icl-regression token_scales needs one entry per input dimension");
      }
      for (int k = 0; k < dim; ++k) {
        if (!(params.token_scales[k] > 0.0)) throw InvalidInput("token_scales must be > 0");
        scale[k] = params.token_scales[k];
      }
    }
    const int td = dim + 1;
    d.x.resize(p, td * (n + 1));
    d.y.resize(p, 1);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int mu = 0; mu < p; ++mu) {
      Vec w(dim);
      for (int k = 0; k < dim; ++k) w[k] = g(rng);
      Mat tok = Mat::Zero(td, n + 1);
      for (int c = 0; c <= n; ++c) {
        for (int k = 0; k < dim; ++k) tok(k, c) = scale[k] * g(rng);
        if (c < n) tok(dim, c) = w.dot(tok.col(c).head(dim));
      }
      d.y(mu, 0) = w.dot(tok.col(n).head(dim));
      d.x.row(mu) = tok.reshaped().transpose();
    }
  } else if (kind == "quadratic-teacher") {
    require_p(p);
    d.x = gaussian(p, 2, rng);
    d.y = d.x.array().square().rowwise().sum().matrix();
  } else if (kind == "generic-teacher") {
    require_p(p);
    if (params.teacher_u.size() == 0 || params.teacher_v.size() == 0) {
      throw InvalidInput("generic-teacher needs teacher_u and teacher_v");
    }
    const ActivationKind act = ActivationKind::parse(params.teacher_activation);
    if (!act.is_fc()) throw Unsupported("generic-teacher supports fc activations only");
    const UnitLayerNet teacher(act, static_cast<int>(params.teacher_u.rows()),
                               params.teacher_v, params.teacher_u);
    d.x = gaussian(p, params.teacher_u.rows(), rng);
    d.y = forward_batch(teacher, d.x);
  } else if (kind == "csv") {
    d = read_csv_dataset(params.path);
    d.kind = "csv";
  } else {
    throw InvalidInput("unknown dataset kind '" + std::string(kind) + "'");
  }
  d.validate();
  return d;
}

Vec power_law(double kappa, int d) {
  if (kappa < 0.0) throw InvalidInput("kappa must be >= 0");
  if (d < 1) throw InvalidInput("spectrum dimension must be >= 1");
  Vec s(d);
  for (int n = 0; n < d; ++n) s[n] = std::pow(n + 1.0, -kappa);
  return s / s.sum();
}

SpectrumData gen_spectrum_dataset(double kappa, int d, SpectrumMode mode, int p,
                                  std::uint64_t seed) {
  require_p(p);
  SpectrumData out;
  out.s = power_law(kappa, d);
  Rng basis_rng = substream(seed, "spectrum");
  Rng rng = substream(seed, "data");
  if (mode == SpectrumMode::kLinear) {
    const Mat q = random_orthogonal(d, basis_rng);
    const Mat r = random_orthogonal(d, basis_rng);
    const Mat syz = q * out.s.asDiagonal() * r.transpose();
    out.data.kind = "spectrum-linear";
    out.data.x = gaussian(p, d, rng);
    out.data.y = out.data.x * syz.transpose();
    out.stats.features = FeatureMap::kIdentity;
    out.stats.yz = syz;
    out.stats.zz = Mat::Identity(d, d);
    out.stats.yy = out.s.squaredNorm();
  } else {
    const int dd = d + 1;
    Vec eig(dd);
    eig.head(d) = out.s;
    eig[d] = -0.5 * out.s[d - 1];
    const Mat r = random_orthogonal(dd, basis_rng);
    const Mat sigma = r * eig.asDiagonal() * r.transpose();
    // E[(x^T C x) x x^T] = 2C + tr(C) I for x ~ N(0, I).
    const Mat c = 0.5 * (sigma - sigma.trace() / (dd + 2.0) * Mat::Identity(dd, dd));
    out.data.kind = "spectrum-quadratic";
    out.data.x = gaussian(p, dd, rng);
    out.data.y = ((out.data.x * c).cwiseProduct(out.data.x)).rowwise().sum();
    out.stats.features = FeatureMap::kOuter;
    out.stats.yz = sigma.reshaped().transpose();
    // Gaussian fourth moments: E[x_a x_b x_c x_e] by pairings.
    Mat zz(dd * dd, dd * dd);
    for (int b = 0; b < dd; ++b)
      for (int a = 0; a < dd; ++a)
        for (int e = 0; e < dd; ++e)
          for (int cc = 0; cc < dd; ++cc) {
            zz(a + dd * b, cc + dd * e) = (a == b) * (cc == e) +
                                          (a == cc) * (b == e) +
                                          (a == e) * (b == cc);
          }
    out.stats.zz = zz;
    out.stats.yy = 2.0 * (c * c).trace() + c.trace() * c.trace();
  }
  out.stats.provenance = Provenance::kPrescribed;
  out.stats.samples = 0;
  return out;
}

DataStats compute_stats(const Dataset& data, const ActivationKind& act) {
  data.validate();
  if (data.size() == 0) throw InvalidInput("dataset is empty");
  const auto fm = act.feature_map();
  if (!fm) throw Unsupported(act.name() + " has no moment representation");
  DataStats s;
  s.features = *fm;
  s.provenance = Provenance::kEmpirical;
  s.samples = data.size();
  const int p = data.size();
  Mat f;
  Mat y = data.y;
  if (*fm == FeatureMap::kIdentity) {
    f = data.x;
  } else {
    const Vec first = moment_features(act, data.x.row(0).transpose());
    f.resize(p, first.size());
    for (int mu = 0; mu < p; ++mu) {
      double offset = 0.0;
      f.row(mu) = moment_features(act, data.x.row(mu).transpose(), &offset).transpose();
      // Targets are taken relative to the parameter-free part of the output.
      y.row(mu).array() -= offset;
    }
  }
  s.yz = y.transpose() * f / p;
  s.zz = f.transpose() * f / p;
  s.zz = 0.5 * (s.zz + s.zz.transpose());
  s.yy = y.squaredNorm() / p;
  return s;
}

UnitLayerNet init_weights(const UnitLayerNet& shape, const InitSpec& spec) {
  if (spec.delta < 0.0) throw InvalidInput("perturbation delta must be >= 0");
  Rng rng = substream(spec.seed, "init");
  UnitLayerNet net = shape;
  auto fill_out = [&](double sd) {
    for (Mat& w : net.out_map().mats) w = gaussian(w.rows(), w.cols(), rng, sd);
  };
  auto perturb = [&] {
    if (spec.delta > 0.0) {
      net.v() += gaussian(net.nv(), net.width(), rng, spec.delta);
      net.u() += gaussian(net.nu(), net.width(), rng, spec.delta);
    }
  };
  switch (spec.scheme) {
    case InitSpec::Scheme::kIsotropic: {
      if (!(spec.epsilon > 0.0)) throw InvalidInput("epsilon must be > 0");
      // Unit-major so that widening a net keeps the earlier units' draws.
      for (int i = 0; i < net.width(); ++i) {
        net.v().col(i) = gaussian(net.nv(), 1, rng, spec.epsilon);
        net.u().col(i) = gaussian(net.nu(), 1, rng, spec.epsilon);
      }
      fill_out(spec.epsilon);
      break;
    }
    case InitSpec::Scheme::kLowRank: {
      if (!(spec.sigma > 0.0)) throw InvalidInput("sigma must be > 0");
      const int maxr = std::min(net.nv(), net.nu());
      if (spec.rank < 1 || spec.rank > maxr) {
        throw InvalidInput("low-rank init rank must be in [1, " +
                           std::to_string(maxr) + "]");
      }
      const Mat q = random_orthogonal(net.nv(), rng).leftCols(spec.rank);
      const Mat r = random_orthogonal(net.nu(), rng).leftCols(spec.rank);
      const Mat alpha = gaussian(spec.rank, net.width(), rng);
      net.v() = spec.sigma * q * alpha;
      net.u() = spec.sigma * r * alpha;
      perturb();
      fill_out(spec.epsilon);
      break;
    }
    case InitSpec::Scheme::kManifoldAdjacent: {
      if (!(spec.epsilon > 0.0)) throw InvalidInput("epsilon must be > 0");
      net.v() = gaussian(net.nv(), net.width(), rng, spec.epsilon);
      net.u() = gaussian(net.nu(), net.width(), rng, spec.epsilon);
      fill_out(spec.epsilon);
      for (const auto& c : spec.constraints) net = project(net, c);
      perturb();
      break;
    }
  }
  return net;
}

}  // namespace s2s
