#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "s2s/dynamics.hpp"

using namespace s2s;
using namespace s2s::test;

namespace {

void step_curve(std::vector<double>& t, std::vector<double>& l) {
  for (int k = 0; k <= 2000; ++k) {
    const double tk = 0.01 * k;
    t.push_back(tk);
    l.push_back(tk < 10.0 ? 1.0 : 0.1);
  }
}

Objective diag_objective() {
  Mat yz(2, 2);
  yz << 2, 0, 0, 1;
  return Objective::from_stats(linear_stats(yz, Mat::Identity(2, 2)));
}

}  // namespace

TEST_CASE("piecewise-constant loss gives two plateaus and one transition") {
  std::vector<double> t, l;
  step_curve(t, l);
  const PlateauReport r = detect_plateaus(t, l, {});
  REQUIRE(r.segments.size() == 2);
  REQUIRE(r.transitions.size() == 1);
  CHECK(r.transitions[0].t_mid == doctest::Approx(10.0).epsilon(0.01));
  CHECK(r.transitions[0].loss_drop == doctest::Approx(0.9));
  CHECK(r.segments[0].role == PlateauSegment::Role::kInitial);
  CHECK(r.segments[1].role == PlateauSegment::Role::kFinal);
  CHECK(r.segments[0].mean_loss >= r.segments[1].mean_loss);
}

TEST_CASE("exponential loss has no plateau") {
  std::vector<double> t, l;
  for (int k = 0; k <= 1000; ++k) {
    t.push_back(0.01 * k);
    l.push_back(std::exp(-0.01 * k));
  }
  PlateauOptions o;
  o.slope_tol = 1e-3;
  CHECK(detect_plateaus(t, l, o).segments.empty());
}

TEST_CASE("plateau detection is invariant under time rescaling") {
  std::vector<double> t, l;
  for (int k = 0; k <= 3000; ++k) {
    const double tk = 0.01 * k;
    t.push_back(tk);
    l.push_back(0.5 + 0.5 / (1 + std::exp(3 * (tk - 8))) - 0.4 / (1 + std::exp(-3 * (tk - 20))));
  }
  PlateauOptions o;
  o.slope_tol = 1e-2;
  o.min_len = 2.0;
  const PlateauReport a = detect_plateaus(t, l, o);
  const double c = 2.5;
  std::vector<double> ts(t);
  for (double& x : ts) x *= c;
  PlateauOptions oc = o;
  oc.slope_tol /= c;
  oc.min_len *= c;
  const PlateauReport b = detect_plateaus(ts, l, oc);
  REQUIRE(a.segments.size() == 3);
  REQUIRE(b.segments.size() == a.segments.size());
  for (std::size_t i = 0; i < a.segments.size(); ++i) {
    CHECK(b.segments[i].t_start == doctest::Approx(c * a.segments[i].t_start));
    CHECK(b.segments[i].t_end == doctest::Approx(c * a.segments[i].t_end));
    CHECK(b.segments[i].mean_loss == doctest::Approx(a.segments[i].mean_loss));
  }
  CHECK(a.intermediate_count() == 1);
}

TEST_CASE("plateaus at equal loss merge across a noisy gap") {
  std::vector<double> t, l;
  for (int k = 0; k <= 2000; ++k) {
    const double tk = 0.01 * k;
    t.push_back(tk);
    // A wiggle in the middle that exceeds slope_tol but carries no net drop.
    const double bump = (tk > 9.5 && tk < 10.5) ? 0.002 * std::sin(2 * M_PI * (tk - 9.5)) : 0.0;
    l.push_back((tk < 10.0 ? 1.0 : 0.995) + bump);
  }
  PlateauOptions o;
  o.slope_tol = 1e-3;
  o.min_len = 1.0;
  CHECK(detect_plateaus(t, l, o).segments.size() == 1);
  o.merge_rel = 0.0;
  CHECK(detect_plateaus(t, l, o).segments.size() == 2);
}

TEST_CASE("effective width examples") {
  Rng rng(3);
  const ActivationKind lin = ActivationKind::parse("linear-fc");
  const ActivationKind relu = ActivationKind::parse("relu-fc");
  const ActivationKind quad = ActivationKind::parse("quadratic-fc");

  const Vec v = gauss_vec(2, rng), u = gauss_vec(2, rng);
  for (const auto& act : {lin, relu, quad}) {
    Mat V(2, 5), U(2, 5);
    for (int i = 0; i < 5; ++i) {
      V.col(i) = v;
      U.col(i) = u;
    }
    const UnitLayerNet net(act, 2, V, U);
    CHECK(effective_width(net, default_width_mode(act)) == 1);
    CHECK(effective_width(net, WidthMode::kRank) == 1);
    CHECK(effective_width(net, WidthMode::kRays) == 1);
  }

  // Random H = 10, D = 2 linear net: the SVD oracle of the stacked matrix says 2.
  const UnitLayerNet net(lin, 1, gauss(1, 10, rng), gauss(1, 10, rng));
  Eigen::JacobiSVD<Mat> svd(net.stacked());
  CHECK((svd.singularValues().array() > 0.05 * svd.singularValues()(0)).count() == 2);
  CHECK(effective_width(net, WidthMode::kRank) == 2);

  CHECK_THROWS(parse_width_mode("bogus"));
  CHECK(parse_width_mode(width_mode_name(WidthMode::kActiveUnits)) == WidthMode::kActiveUnits);
}

TEST_CASE("active-units and rays count separated units") {
  const ActivationKind relu = ActivationKind::parse("relu-fc");
  Mat V(1, 3), U(2, 3);
  V << 1, 2, 1e-4;
  U << 1, 2, 1e-4, 0, 0, 1e-4;
  const UnitLayerNet a(relu, 2, V, U);
  CHECK(effective_width(a, WidthMode::kRays) == 1);
  CHECK(effective_width(a, WidthMode::kActiveUnits) == 2);
  U(1, 1) = 2;
  const UnitLayerNet b(relu, 2, V, U);
  CHECK(effective_width(b, WidthMode::kRays) == 2);
}

TEST_CASE("scalar factorized regression descends monotonically") {
  const ActivationKind lin = ActivationKind::parse("linear-fc");
  const Objective obj =
      Objective::from_stats(linear_stats(Mat::Ones(1, 1), Mat::Ones(1, 1)));
  Mat v(1, 1), u(1, 1);
  v << 1e-3;
  u << 1e-3;
  IntegrateOptions o;
  o.eta = 0.01;
  o.steps = 3000;
  const Trajectory tr = integrate(UnitLayerNet(lin, 1, v, u), obj, o);
  REQUIRE(tr.size() == tr.losses.size());
  for (std::size_t k = 1; k < tr.size(); ++k) CHECK(tr.losses[k] <= tr.losses[k - 1]);
  CHECK(tr.losses.back() < 1e-10);
  CHECK(tr.times.back() == doctest::Approx(30.0));
}

TEST_CASE("a fixed point does not move") {
  const ActivationKind lin = ActivationKind::parse("linear-fc");
  const Objective obj = diag_objective();
  // Rank-1 saddle: one unit on mode 1 with v u = 2, a zero unit.
  Mat V(2, 2), U(2, 2);
  V << std::sqrt(2.0), 0, 0, 0;
  U << std::sqrt(2.0), 0, 0, 0;
  const UnitLayerNet net(lin, 2, V, U);
  IntegrateOptions o;
  o.steps = 500;
  const Trajectory tr = integrate(net, obj, o);
  CHECK(tr.final_net.flatten() == net.flatten());
  CHECK(tr.losses.back() == doctest::Approx(0.5));
}

TEST_CASE("snapshot steps are a subset of recorded steps") {
  Rng rng(4);
  const ActivationKind lin = ActivationKind::parse("linear-fc");
  IntegrateOptions o;
  o.steps = 400;
  o.record_every = 3;
  o.snapshots = 7;
  const UnitLayerNet net(lin, 2, gauss(2, 3, rng, 0.5), gauss(2, 3, rng, 0.5));
  const Trajectory tr = integrate(net, diag_objective(), o);
  for (const auto& s : tr.snapshots) {
    CHECK(std::find(tr.steps.begin(), tr.steps.end(), s.step) != tr.steps.end());
  }
  CHECK(tr.snapshots.back().step == 400);
  CHECK(tr.metrics.count("sv1") == 1);
}

TEST_CASE("euler is first order in the step size") {
  Rng rng(5);
  const ActivationKind lin = ActivationKind::parse("linear-fc");
  const Mat v = gauss(2, 2, rng, 0.1), u = gauss(2, 2, rng, 0.1);
  const UnitLayerNet init(lin, 2, v, u);
  const Objective obj = diag_objective();
  const double T = 4.0;
  auto run = [&](double eta, Scheme s) {
    IntegrateOptions o;
    o.eta = eta;
    o.steps = std::lround(T / eta);
    o.scheme = s;
    o.snapshots = 0;
    return integrate(init, obj, o).final_net.flatten();
  };
  const Vec ref = run(1e-3, Scheme::kRk4);
  const double e1 = (run(0.02, Scheme::kEuler) - ref).norm();
  const double e2 = (run(0.01, Scheme::kEuler) - ref).norm();
  CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.15));
  CHECK((run(0.02, Scheme::kRk4) - ref).norm() < 1e-6);
}

TEST_CASE("non-finite loss raises a divergence error with the last state") {
  const ActivationKind lin = ActivationKind::parse("linear-fc");
  Mat v(1, 1), u(1, 1);
  v << 3;
  u << 3;
  IntegrateOptions o;
  o.eta = 1.0;
  o.steps = 200;
  try {
    integrate(UnitLayerNet(lin, 1, v, u),
              Objective::from_stats(linear_stats(Mat::Ones(1, 1), Mat::Ones(1, 1))), o);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.last_state.flatten().allFinite());
    CHECK(e.step > 0);
  }
}

TEST_CASE("rk4 is rejected for kinked activations") {
  Rng rng(6);
  const ActivationKind relu = ActivationKind::parse("relu-fc");
  const UnitLayerNet net = random_net(relu, 2, rng);
  IntegrateOptions o;
  o.scheme = Scheme::kRk4;
  o.steps = 1;
  CHECK_THROWS(integrate(net, Objective::from_data(noise_data(relu, 10, rng)), o));
}
