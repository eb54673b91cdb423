#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "helpers.hpp"
#include "s2s/netcore.hpp"

using namespace s2s;
using namespace s2s::test;

namespace {

// f(X) = X + sum_i V_i X X^T K_i^T Q_i X read at (D, N), built from the full
// matrices rather than the library's contracted form.
double attention_oracle(const UnitLayerNet& net, const Vec& x) {
  const auto& g = net.activation().geometry();
  const int td = g.token_dim();
  const int r = g.head_rank;
  const Mat X = x.reshaped(td, g.tokens());
  Mat f = X;
  for (int i = 0; i < net.width(); ++i) {
    const Mat V = net.v().col(i).reshaped(td, td);
    const Mat K = net.u().col(i).head(r * td).reshaped(r, td);
    const Mat Q = net.u().col(i).segment(r * td, r * td).reshaped(r, td);
    f += V * X * X.transpose() * K.transpose() * Q * X;
  }
  return f(g.embed_dim, g.context_len);
}

}  // namespace

TEST_CASE("forward on hand-sized nets") {
  const UnitLayerNet lin(ActivationKind::parse("linear-fc"), 1,
                         (Mat(1, 2) << 1.4, 0.6).finished(),
                         (Mat(1, 2) << 3.0, 3.0).finished());
  CHECK(forward(lin, Vec::Ones(1))[0] == doctest::Approx(6.0).epsilon(1e-15));

  const UnitLayerNet relu(ActivationKind::parse("relu-fc"), 2, Mat::Ones(1, 1),
                          (Mat(2, 1) << 1.0, 0.0).finished());
  CHECK(forward(relu, (Vec(2) << -2.0, 5.0).finished())[0] == 0.0);

  const UnitLayerNet quad(ActivationKind::parse("quadratic-fc"), 2,
                          Mat::Constant(1, 1, 2.0), Mat::Ones(2, 1));
  CHECK(forward(quad, (Vec(2) << 1.0, -1.0).finished())[0] == 0.0);
}

TEST_CASE("attention forward matches the full matrix expression") {
  Rng rng(11);
  const ActivationKind act = small_attention();
  const UnitLayerNet net = random_net(act, 3, rng);
  for (int k = 0; k < 5; ++k) {
    const Vec x = gauss_vec(input_dim_for(act), rng);
    CHECK(forward(net, x)[0] == doctest::Approx(attention_oracle(net, x)).epsilon(1e-12));
  }
}

TEST_CASE("loss examples") {
  Dataset d;
  d.x = Mat::Ones(1, 1);
  d.y = Mat::Constant(1, 1, 2.0);
  const auto act = ActivationKind::parse("linear-fc");
  CHECK(loss(UnitLayerNet::zeros(act, 1, 1, 3), d) == doctest::Approx(2.0));

  const UnitLayerNet exact(act, 1, Mat::Constant(1, 1, 2.0), Mat::Ones(1, 1));
  CHECK(loss(exact, d) == 0.0);

  // Width-1 net at W = diag(2, 0) on Sigma_zz = I, Sigma_yz = diag(2, 1).
  const Mat yz = (Mat(2, 2) << 2.0, 0.0, 0.0, 1.0).finished();
  const DataStats s = linear_stats(yz, Mat::Identity(2, 2));
  const UnitLayerNet saddle(act, 2, (Mat(2, 1) << std::sqrt(2.0), 0.0).finished(),
                            (Mat(2, 1) << std::sqrt(2.0), 0.0).finished());
  CHECK(loss(saddle, s) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("linear gradient on statistics") {
  Rng rng(3);
  const Mat yz = gauss(3, 4, rng);
  const Mat a = gauss(4, 4, rng);
  const Mat zz = a * a.transpose() + Mat::Identity(4, 4);
  const DataStats s = linear_stats(yz, zz);
  const UnitLayerNet net(ActivationKind::parse("linear-fc"), 4, gauss(3, 5, rng),
                         gauss(4, 5, rng));
  const Gradient g = grad(net, s);
  const Mat w = net.product();
  const Mat resid = yz - w * zz;
  for (int i = 0; i < net.width(); ++i) {
    CHECK(rel_err(g.dv.col(i), -resid * net.u().col(i)) < 1e-12);
    CHECK(rel_err(g.du.col(i), -resid.transpose() * net.v().col(i)) < 1e-12);
  }
}

TEST_CASE("quadratic gradient against the direct per-sample formula") {
  Dataset d;
  d.x = (Mat(3, 2) << 1.0, 2.0, -0.5, 1.5, 0.3, -1.0).finished();
  d.y = (Mat(3, 1) << 1.0, -2.0, 0.5).finished();
  const UnitLayerNet net(ActivationKind::parse("quadratic-fc"), 2, Mat::Ones(1, 1),
                         (Mat(2, 1) << 1.0, 0.0).finished());
  const Gradient g = grad(net, d);
  double dv = 0.0;
  Vec du = Vec::Zero(2);
  for (int mu = 0; mu < 3; ++mu) {
    const Vec x = d.x.row(mu).transpose();
    const double z = x[0];  // u^T x with u = e1
    const double r = d.y(mu, 0) - z * z;
    dv -= r * z * z / 3.0;
    du -= r * 2.0 * z * x / 3.0;
  }
  CHECK(g.dv(0, 0) == doctest::Approx(dv).epsilon(1e-14));
  CHECK(rel_err(g.du.col(0), du) < 1e-14);

  // The moment path gives the same numbers.
  const DataStats s = compute_stats(d, net.activation());
  const Gradient gs = grad(net, s);
  CHECK(rel_err(gs.flatten(), g.flatten()) < 1e-12);
}

TEST_CASE("analytic gradient agrees with finite differences for every kind") {
  Rng rng(17);
  for (const auto& act : all_kinds()) {
    CAPTURE(act.name());
    int checked = 0;
    while (checked < 5) {
      UnitLayerNet net = random_net(act, 3, rng);
      const Dataset d = noise_data(act, 6, rng);
      if (!act.smooth() && min_abs_preactivation(net, d) < 1e-3) continue;
      const Gradient g = grad(net, d);
      const Gradient fd = grad_fd(net, d, 1e-6);
      CHECK(rel_err(g.flatten(), fd.flatten()) < 1e-6);
      ++checked;
    }
  }
}

TEST_CASE("gradient through deep chains and skip maps") {
  Rng rng(5);
  const auto act = ActivationKind::parse("linear-fc");
  const Dataset d = noise_data(act, 8, rng);
  {
    const UnitLayerNet net(act, 4, gauss(3, 3, rng, 0.5), gauss(4, 3, rng, 0.5),
                           OutMap::chain({gauss(5, 3, rng, 0.5), gauss(2, 5, rng, 0.5)}));
    CHECK(rel_err(grad(net, d).flatten(), grad_fd(net, d, 1e-6).flatten()) < 1e-6);
  }
  for (auto pattern : {SkipPattern::kNone, SkipPattern::kSkip1, SkipPattern::kSkip2}) {
    const UnitLayerNet net(act, 4, gauss(3, 3, rng, 0.5), gauss(4, 3, rng, 0.5),
                           OutMap::skip(pattern, gauss(3, 3, rng, 0.5), gauss(2, 3, rng, 0.5)));
    CHECK(rel_err(grad(net, d).flatten(), grad_fd(net, d, 1e-6).flatten()) < 1e-6);
  }
}

TEST_CASE("zero network on zero data has zero gradient") {
  for (const auto& act : all_kinds()) {
    const int in = input_dim_for(act);
    const UnitLayerNet net = UnitLayerNet::zeros(act, in, output_dim_for(act), 3);
    Dataset d;
    d.x = Mat::Zero(4, in);
    d.y = Mat::Zero(4, output_dim_for(act));
    CHECK(grad_fd(net, d, 1e-6).norm() == 0.0);
  }
}

TEST_CASE("homogeneity and zero units") {
  Rng rng(23);
  std::uniform_real_distribution<double> uni(0.0, 3.0);
  for (const auto& act : all_kinds()) {
    CAPTURE(act.name());
    const int in = input_dim_for(act);
    const UnitLayerNet base = random_net(act, 1, rng);
    const Vec x = gauss_vec(in, rng);
    if (act.has_zero_unit()) {
      UnitLayerNet z = base;
      z.u().setZero();
      const UnitLayerNet empty = UnitLayerNet::zeros(act, in, output_dim_for(act), 0);
      CHECK(forward(z, x) == forward(empty, x));
    }
    if (!act.homogeneous()) continue;
    for (int k = 0; k < 5; ++k) {
      const double alpha = act.positive_only() ? uni(rng) : uni(rng) - 1.5;
      UnitLayerNet scaled = base;
      scaled.u() *= alpha;
      CHECK(rel_err(forward(scaled, x), alpha * forward(base, x)) < 1e-12);
    }
  }
}

TEST_CASE("loss is invariant under unit permutation") {
  Rng rng(29);
  for (const auto& act : all_kinds()) {
    const UnitLayerNet net = random_net(act, 4, rng);
    const Dataset d = noise_data(act, 5, rng);
    std::vector<int> perm(4);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Mat v = net.v(), u = net.u();
    for (int i = 0; i < 4; ++i) {
      v.col(i) = net.v().col(perm[i]);
      u.col(i) = net.u().col(perm[i]);
    }
    const UnitLayerNet shuffled(act, net.input_dim(), v, u);
    CHECK(loss(shuffled, d) == doctest::Approx(loss(net, d)).epsilon(1e-13));
  }
}

TEST_CASE("reduce_width keeps the map") {
  Rng rng(31);
  const auto lin = ActivationKind::parse("linear-fc");
  const auto relu = ActivationKind::parse("relu-fc");

  SUBCASE("equal units merge into one with doubled v") {
    const Vec v = gauss_vec(2, rng), u = gauss_vec(4, rng);
    Mat V(2, 2), U(4, 2);
    V << v, v;
    U << u, u;
    const UnitLayerNet net(relu, 4, V, U);
    const UnitLayerNet r = reduce_width(net, ManifoldConstraint::equal(1, 0));
    REQUIRE(r.width() == 1);
    CHECK(rel_err(r.v().col(0), 2.0 * v) < 1e-15);
    for (int k = 0; k < 100; ++k) {
      const Vec x = gauss_vec(4, rng);
      CHECK((forward(r, x) - forward(net, x)).norm() < 1e-12);
    }
  }
  SUBCASE("zero unit on relu") {
    UnitLayerNet net = random_net(relu, 3, rng);
    net.v().col(1).setZero();
    net.u().col(1).setZero();
    const UnitLayerNet r = reduce_width(net, ManifoldConstraint::zero(1));
    CHECK(r.width() == 2);
    const Vec x = gauss_vec(4, rng);
    CHECK(forward(r, x) == forward(net, x));
  }
  SUBCASE("linear dependence on linear-fc") {
    UnitLayerNet net = random_net(lin, 3, rng);
    net.v().col(2) = 0.5 * net.v().col(0) + 0.5 * net.v().col(1);
    net.u().col(2) = 0.5 * net.u().col(0) + 0.5 * net.u().col(1);
    const UnitLayerNet r = reduce_width(net, ManifoldConstraint::lindep(2, {0.5, 0.5, 0.0}));
    CHECK(r.width() == 2);
    for (int k = 0; k < 50; ++k) {
      const Vec x = gauss_vec(4, rng);
      CHECK((forward(r, x) - forward(net, x)).norm() < 1e-12);
    }
  }
  SUBCASE("proportional units on relu") {
    UnitLayerNet net = random_net(relu, 2, rng);
    net.v().col(1) = 2.0 * net.v().col(0);
    net.u().col(1) = 2.0 * net.u().col(0);
    const UnitLayerNet r = reduce_width(net, ManifoldConstraint::proportional(1, 0, 2.0));
    CHECK(r.width() == 1);
    for (int k = 0; k < 50; ++k) {
      const Vec x = gauss_vec(4, rng);
      CHECK((forward(r, x) - forward(net, x)).norm() < 1e-10);
    }
  }
  SUBCASE("off the manifold") {
    const UnitLayerNet net = random_net(lin, 2, rng);
    CHECK_THROWS_AS(reduce_width(net, ManifoldConstraint::equal(0, 1)), NotOnManifold);
  }
}

TEST_CASE("constraint legality") {
  Rng rng(37);
  CHECK_THROWS_AS(check_constraint(random_net(ActivationKind::parse("tanh-fc"), 2, rng),
                                   ManifoldConstraint::proportional(0, 1, 1.0)),
                  Unsupported);
  CHECK_THROWS_AS(check_constraint(random_net(ActivationKind::parse("sigmoid-fc"), 2, rng),
                                   ManifoldConstraint::zero(0)),
                  Unsupported);
  CHECK_THROWS_AS(check_constraint(random_net(ActivationKind::parse("relu-fc"), 2, rng),
                                   ManifoldConstraint::proportional(0, 1, -1.0)),
                  InvalidInput);
  CHECK_THROWS_AS(check_constraint(random_net(ActivationKind::parse("relu-fc"), 2, rng),
                                   ManifoldConstraint::equal(0, 5)),
                  InvalidInput);
}

TEST_CASE("activation names round-trip") {
  for (const auto& act : all_kinds()) {
    if (act.tag() == ActivationTag::kLinearAttention) continue;
    CHECK(ActivationKind::parse(act.name()) == act);
  }
  CHECK_THROWS_AS(ActivationKind::parse("softmax-attention"), InvalidInput);
}
