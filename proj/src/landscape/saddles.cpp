#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <string>

#include "s2s/landscape.hpp"

namespace s2s {

namespace {

constexpr double kDegenerateGap = 1e-9;

void fix_sign(Eigen::Ref<Vec> e) {
  Eigen::Index k = 0;
  e.cwiseAbs().maxCoeff(&k);
  if (e[k] < 0.0) e = -e;
}

double stats_loss(const DataStats& stats, const Mat& w) {
  const double l = 0.5 * (stats.yy - 2.0 * w.cwiseProduct(stats.yz).sum() +
                          (w * stats.zz).cwiseProduct(w).sum());
  return std::max(l, 0.0);
}

bool near(double a, double b, double scale) {
  return std::abs(a - b) <= kDegenerateGap * std::max(scale, 1e-300);
}

}  // namespace

LinearFpModes linear_fp_modes(const DataStats& stats, double cond_limit) {
  if (stats.features != FeatureMap::kIdentity) {
    throw InvalidInput("the linear fixed-point lattice needs identity features");
  }
  Eigen::SelfAdjointEigenSolver<Mat> zz(stats.zz);
  const Vec ev = zz.eigenvalues();
  if (ev.size() == 0 || ev.minCoeff() <= 0.0 ||
      ev.maxCoeff() / ev.minCoeff() > cond_limit) {
    throw IllConditioned("Sigma_zz is singular or its condition number exceeds " +
                         std::to_string(cond_limit));
  }
  LinearFpModes m;
  m.solve = stats.zz.ldlt().solve(stats.yz.transpose());
  const Mat b = stats.yz * m.solve;
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (b + b.transpose()));
  const Eigen::Index d = b.rows();
  m.lambda.resize(d);
  m.e.resize(d, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    m.lambda[k] = eig.eigenvalues()[d - 1 - k];
    m.e.col(k) = eig.eigenvectors().col(d - 1 - k);
    fix_sign(m.e.col(k));
  }
  const double scale = m.lambda.cwiseAbs().maxCoeff();
  for (Eigen::Index k = 0; k + 1 < d; ++k) {
    if (near(m.lambda[k], m.lambda[k + 1], scale)) m.degenerate = true;
  }
  return m;
}

namespace {

LinearSaddleSpec build_saddle(const DataStats& stats, const LinearFpModes& m,
                              const std::vector<int>& set) {
  const Eigen::Index d = m.e.rows();
  LinearSaddleSpec s;
  s.index_set = set;
  s.rank = static_cast<int>(set.size());
  s.w_star = Mat::Zero(stats.yz.rows(), stats.yz.cols());
  s.v = Mat::Zero(d, s.rank);
  s.u = Mat::Zero(stats.yz.cols(), s.rank);
  const double scale = m.lambda.cwiseAbs().maxCoeff();
  for (int c = 0; c < s.rank; ++c) {
    const int k = set[c];
    if (k < 0 || k >= d) {
      throw InvalidInput("mode index " + std::to_string(k) + " out of range");
    }
    s.mask |= std::uint64_t{1} << k;
    const Vec e = m.e.col(k);
    const Vec w = m.solve * e;
    s.w_star += e * w.transpose();
    const double n = w.norm();
    if (n > 0.0) {
      const double a = std::sqrt(n);
      s.v.col(c) = a * e;
      s.u.col(c) = w / a;
    }
    for (Eigen::Index j = 0; j < d; ++j) {
      const bool inside = std::find(set.begin(), set.end(), j) != set.end();
      if (!inside && near(m.lambda[k], m.lambda[j], scale)) s.degenerate = true;
    }
  }
  s.loss = stats_loss(stats, s.w_star);
  return s;
}

}  // namespace

LinearSaddleSpec linear_saddle(const DataStats& stats,
                               const std::vector<int>& index_set) {
  return build_saddle(stats, linear_fp_modes(stats), index_set);
}

std::vector<LinearSaddleSpec> enumerate_linear_saddles(const DataStats& stats,
                                                       int r) {
  const LinearFpModes m = linear_fp_modes(stats);
  const int d = static_cast<int>(m.e.rows());
  if (d > 30) throw InvalidInput("too many modes to enumerate");
  if (r > d) throw InvalidInput("rank exceeds the number of modes");
  std::vector<std::vector<int>> sets;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << d); ++mask) {
    std::vector<int> set;
    for (int k = 0; k < d; ++k) {
      if (mask & (std::uint64_t{1} << k)) set.push_back(k);
    }
    if (r < 0 || static_cast<int>(set.size()) == r) sets.push_back(set);
  }
  std::sort(sets.begin(), sets.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  });
  std::vector<LinearSaddleSpec> out;
  for (const auto& set : sets) out.push_back(build_saddle(stats, m, set));
  return out;
}

UnitLayerNet saddle_net(const LinearSaddleSpec& spec, int width) {
  if (width < spec.rank) {
    throw InvalidInput("width " + std::to_string(width) +
                       " cannot hold a rank-" + std::to_string(spec.rank) +
                       " saddle");
  }
  Mat v = Mat::Zero(spec.v.rows(), width);
  Mat u = Mat::Zero(spec.u.rows(), width);
  v.leftCols(spec.rank) = spec.v;
  u.leftCols(spec.rank) = spec.u;
  return UnitLayerNet(ActivationKind(ActivationTag::kLinearFc),
                      static_cast<int>(u.rows()), v, u);
}

Mat projected_stats(const DataStats& stats, const std::vector<int>& index_set) {
  const LinearFpModes m = linear_fp_modes(stats);
  Mat p = Mat::Identity(m.e.rows(), m.e.rows());
  for (int k : index_set) {
    if (k < 0 || k >= m.e.rows()) throw InvalidInput("mode index out of range");
    p -= m.e.col(k) * m.e.col(k).transpose();
  }
  return p * stats.yz;
}

void write_saddle_atlas_csv(const std::vector<LinearSaddleSpec>& saddles,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "index_set,rank,saddle_loss\n" << std::setprecision(17);
  for (const auto& s : saddles) {
    out << s.mask << "," << s.rank << "," << s.loss << "\n";
  }
  if (!out) throw IoError("failed writing " + path);
}

PolishResult polish_fixed_point(const UnitLayerNet& net,
                                const Objective& objective,
                                const PolishOptions& options) {
  UnitLayerNet cur = net;
  double gn = objective.grad(cur).norm();
  for (int s = 0; s < options.gd_steps && gn > options.tol; ++s) {
    step_once(cur, objective, options.eta, Scheme::kEuler);
    if (s % 100 == 0) gn = objective.grad(cur).norm();
  }
  gn = objective.grad(cur).norm();
  const int n = cur.num_params();
  UnitLayerNet probe = cur;
  for (int it = 0; it < options.newton_iters && gn > options.tol; ++it) {
    const Vec theta = cur.flatten();
    const Vec g = objective.grad(cur).flatten();
    Mat jac(n, n);
    const double h = 1e-6;
    for (int k = 0; k < n; ++k) {
      Vec t = theta;
      t[k] += h;
      probe.assign(t);
      const Vec gp = objective.grad(probe).flatten();
      t[k] -= 2.0 * h;
      probe.assign(t);
      const Vec gm = objective.grad(probe).flatten();
      jac.col(k) = (gp - gm) / (2.0 * h);
    }
    jac = 0.5 * (jac + jac.transpose());
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(jac);
    cod.setThreshold(1e-10);
    const Vec step = cod.solve(g);
    probe.assign(theta - step);
    const double gn_new = objective.grad(probe).norm();
    if (!(gn_new < gn)) break;
    cur = probe;
    gn = gn_new;
  }
  PolishResult r;
  r.grad_norm = gn;
  r.loss = objective.loss(cur);
  r.converged = gn <= options.tol;
  r.net = std::move(cur);
  return r;
}

}  // namespace s2s
