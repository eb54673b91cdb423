#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "s2s/data.hpp"
#include "s2s/dynamics.hpp"
#include "s2s/manifold.hpp"

using namespace s2s;
using namespace s2s::test;

TEST_CASE("fixed datasets") {
  const Dataset r = gen_dataset("relu-orthogonal", {}, 2, 0);
  REQUIRE(r.size() == 2);
  Mat x(2, 2);
  x << 1, 0.5, -1, 2;
  CHECK(r.x == x);
  CHECK(r.y(0, 0) == 1);
  CHECK(r.y(1, 0) == -1);

  const Dataset c = gen_dataset("relu-conv", {}, 4, 0);
  REQUIRE(c.size() == 4);
  CHECK(c.x(2, 2) == doctest::Approx(2 * std::sqrt(2.0)));
  CHECK(c.x.row(2).sum() == doctest::Approx(2 * std::sqrt(2.0)));

  const Dataset q = gen_dataset("quadratic-teacher", {}, 64, 1);
  for (int mu = 0; mu < q.size(); ++mu) {
    CHECK(q.y(mu, 0) == doctest::Approx(q.x.row(mu).squaredNorm()));
  }
  CHECK_THROWS_AS(gen_dataset("nope", {}, 4, 0), InvalidInput);
}

TEST_CASE("teacher datasets follow their generating law") {
  const Dataset lin = gen_dataset("linear-fc-teacher", {}, 8192, 2);
  CHECK(lin.y == lin.x);  // default W* = I
  const Mat cov = lin.x.transpose() * lin.x / lin.size();
  Mat expect(2, 2);
  expect << 1, 1, 1, 4;
  CHECK((cov - expect).norm() < 0.2);

  DatasetParams p;
  p.embed_dim = 2;
  p.context_len = 5;
  const Dataset icl = gen_dataset("icl-regression", p, 3, 4);
  CHECK(icl.input_dim() == 3 * 6);
  for (int mu = 0; mu < icl.size(); ++mu) {
    const Mat tok = icl.x.row(mu).transpose().reshaped(3, 6);
    // The labels of the context tokens pin w; the query label is hidden.
    const Mat a = tok.topLeftCorner(2, 5).transpose();
    const Vec w = a.colPivHouseholderQr().solve(tok.row(2).head(5).transpose());
    CHECK(tok(2, 5) == 0.0);
    CHECK(icl.y(mu, 0) == doctest::Approx(w.dot(tok.col(5).head(2))));
  }
  p.token_scales = {1.0, -1.0};
  CHECK_THROWS_AS(gen_dataset("icl-regression", p, 3, 4), InvalidInput);
}

TEST_CASE("power law spectra") {
  const Vec s = power_law(1.0, 3);
  CHECK(s[0] == doctest::Approx(6.0 / 11));
  CHECK(s[1] == doctest::Approx(3.0 / 11));
  CHECK(s[2] == doctest::Approx(2.0 / 11));
  const Vec flat = power_law(0.0, 3);
  for (int k = 0; k < 3; ++k) CHECK(flat[k] == doctest::Approx(1.0 / 3));
  CHECK_THROWS(power_law(-1.0, 3));

  const SpectrumData q = gen_spectrum_dataset(0.5, 3, SpectrumMode::kQuadratic, 64, 3);
  const Mat syz = q.stats.sigma_yZ();
  Eigen::SelfAdjointEigenSolver<Mat> eig(syz);
  const Vec ev = eig.eigenvalues();
  CHECK(ev[0] == doctest::Approx(-0.5 * q.s[2]));
  std::vector<double> pos(ev.data() + 1, ev.data() + ev.size());
  std::sort(pos.rbegin(), pos.rend());
  for (int k = 0; k < 3; ++k) CHECK(pos[k] == doctest::Approx(q.s[k]));
}

TEST_CASE("moment statistics by hand") {
  const auto lin = ActivationKind::parse("linear-fc");
  Dataset one;
  one.x = Mat::Constant(1, 1, 1.0);
  one.y = Mat::Constant(1, 1, 2.0);
  const DataStats s1 = compute_stats(one, lin);
  CHECK(s1.yz(0, 0) == 2.0);
  CHECK(s1.zz(0, 0) == 1.0);
  CHECK(s1.yy == 4.0);

  const DataStats so = compute_stats(gen_dataset("relu-orthogonal", {}, 2, 0), lin);
  Mat zz(2, 2);
  zz << 1, -0.75, -0.75, 2.125;
  CHECK((so.zz - zz).norm() < 1e-15);
}

TEST_CASE("quadratic teacher statistics align with e1 and e2") {
  const auto quad = ActivationKind::parse("quadratic-fc");
  const DataStats st = compute_stats(gen_dataset("quadratic-teacher", {}, 8192, 5), quad);
  CHECK((st.zz - st.zz.transpose()).norm() < 1e-12);
  Eigen::SelfAdjointEigenSolver<Mat> eig(st.sigma_yZ());
  const Vec top = eig.eigenvectors().col(1);
  const bool aligned = std::abs(top[0]) > 0.95 || std::abs(top[1]) > 0.95;
  CHECK(aligned);
  CHECK(std::abs(eig.eigenvectors().col(0).dot(eig.eigenvectors().col(1))) < 1e-12);
  // Population Sigma_yZ = E[|x|^2 x x^T] = 4 I for x ~ N(0, I_2).
  CHECK((st.sigma_yZ() - 4 * Mat::Identity(2, 2)).norm() < 0.5);
}

TEST_CASE("attention statistics match an explicit contraction") {
  Rng rng(6);
  const auto att = small_attention();
  const Dataset d = noise_data(att, 5, rng);
  const DataStats st = compute_stats(d, att);
  const auto& g = att.geometry();
  const int td = g.token_dim();
  // Feature T[a, b, c] = (X X^T)[a, b] X[c, N] for each sample, averaged. The
  // output carries X[D, N] unweighted, so the moments use y - X[D, N].
  Vec yz = Vec::Zero(td * td * td);
  for (int mu = 0; mu < d.size(); ++mu) {
    const Mat X = d.x.row(mu).transpose().reshaped(td, g.tokens());
    const Mat xx = X * X.transpose();
    const Vec q = X.col(g.context_len);
    const double y = d.y(mu, 0) - X(g.embed_dim, g.context_len);
    for (int c = 0; c < td; ++c)
      for (int b = 0; b < td; ++b)
        for (int a = 0; a < td; ++a) yz[a + td * (b + td * c)] += y * xx(a, b) * q[c];
  }
  yz /= d.size();
  CHECK(st.features == FeatureMap::kAttention);
  CHECK(rel_err(st.yz.row(0).transpose(), yz) < 1e-12);
}

TEST_CASE("sampled spectrum data concentrates on the prescribed stats") {
  const auto lin = ActivationKind::parse("linear-fc");
  std::vector<double> lp, le;
  for (int p : {512, 1024, 2048, 4096, 8192}) {
    const SpectrumData sd = gen_spectrum_dataset(1.0, 3, SpectrumMode::kLinear, p, 7);
    const DataStats emp = compute_stats(sd.data, lin);
    const double err = (emp.yz - sd.stats.yz).norm();
    CHECK(err < 5.0 / std::sqrt(p));
    lp.push_back(std::log(p));
    le.push_back(std::log(err));
  }
  const double slope = (le.back() - le.front()) / (lp.back() - lp.front());
  CHECK(slope == doctest::Approx(-0.5).epsilon(0.5));
}

TEST_CASE("prescribed and empirical statistics give the same final loss") {
  const auto lin = ActivationKind::parse("linear-fc");
  const SpectrumData sd = gen_spectrum_dataset(1.0, 3, SpectrumMode::kLinear, 8192, 8);
  InitSpec spec;
  spec.epsilon = 1e-3;
  spec.seed = 8;
  const UnitLayerNet init = init_weights(UnitLayerNet::zeros(lin, 3, 3, 8), spec);
  IntegrateOptions o;
  o.eta = 0.05;
  o.steps = 2000;
  o.snapshots = 0;
  const double a = integrate(init, Objective::from_stats(sd.stats), o).losses.back();
  const double b = integrate(init, Objective::from_data(sd.data), o).losses.back();
  const double l0 = Objective::from_stats(sd.stats).loss(init);
  // Both runs stop on the final plateau; compare on the initial-loss scale.
  CHECK(std::abs(a - b) < 0.02 * l0);
}

TEST_CASE("initialization schemes") {
  const auto lin = ActivationKind::parse("linear-fc");
  const UnitLayerNet shape = UnitLayerNet::zeros(lin, 50, 50, 100);
  InitSpec iso;
  iso.epsilon = 1e-6;
  iso.seed = 9;
  const Vec w = init_weights(shape, iso).flatten();
  REQUIRE(w.size() >= 10000);
  const double var = w.squaredNorm() / w.size() - std::pow(w.mean(), 2);
  CHECK(var == doctest::Approx(1e-12).epsilon(0.2));

  InitSpec lr;
  lr.scheme = InitSpec::Scheme::kLowRank;
  lr.rank = 1;
  lr.sigma = 0.1;
  lr.delta = 0.0;
  const UnitLayerNet small = UnitLayerNet::zeros(lin, 2, 2, 10);
  CHECK(effective_width(init_weights(small, lr), WidthMode::kRank) == 1);
  lr.rank = 2;
  CHECK(effective_width(init_weights(small, lr), WidthMode::kRank) == 2);
  lr.rank = 5;
  CHECK_THROWS(init_weights(small, lr));

  InitSpec ma;
  ma.scheme = InitSpec::Scheme::kManifoldAdjacent;
  ma.epsilon = 0.1;
  ma.delta = 0.0;
  ma.constraints = {ManifoldConstraint::equal(0, 3)};
  const UnitLayerNet on = init_weights(small, ma);
  CHECK(residual(on, ma.constraints[0]) == 0.0);
  CHECK(on.flatten().norm() > 0.0);
}

TEST_CASE("generators and inits are reproducible") {
  DatasetParams p;
  for (const auto& kind : {"linear-fc-teacher", "linear-conv", "quadratic-teacher"}) {
    CHECK(gen_dataset(kind, p, 100, 11).x == gen_dataset(kind, p, 100, 11).x);
    CHECK(gen_dataset(kind, p, 100, 11).x != gen_dataset(kind, p, 100, 12).x);
  }
  const auto quad = ActivationKind::parse("quadratic-fc");
  InitSpec s;
  s.epsilon = 0.01;
  s.seed = 3;
  const UnitLayerNet shape = UnitLayerNet::zeros(quad, 2, 1, 4);
  CHECK(init_weights(shape, s).flatten() == init_weights(shape, s).flatten());
  // Named substreams are independent of each other.
  Rng a = substream(5, "init"), b = substream(5, "data");
  CHECK(a() != b());
}

TEST_CASE("csv round trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "s2s_data_test";
  fs::create_directories(dir);
  const Dataset d = gen_dataset("linear-conv", {}, 17, 3);
  const std::string path = (dir / "d.csv").string();
  write_csv_dataset(d, path);
  {
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "x0,x1,x2,x3,y0");
  }
  const Dataset back = read_csv_dataset(path);
  CHECK(back.x == d.x);
  CHECK(back.y == d.y);
  DatasetParams p;
  p.path = path;
  CHECK(gen_dataset("csv", p, 0, 0).x == d.x);

  Rng rng(4);
  const Mat m = gauss(3, 5, rng);
  const std::string mp = (dir / "m.csv").string();
  write_matrix_csv(m, mp);
  CHECK(read_matrix_csv(mp) == m);

  std::ofstream(dir / "bad.csv") << "x0,y0\n1,2\n3\n";
  CHECK_THROWS(read_csv_dataset((dir / "bad.csv").string()));
  CHECK_THROWS(read_csv_dataset((dir / "missing.csv").string()));
  fs::remove_all(dir);
}
