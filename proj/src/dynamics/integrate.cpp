#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "s2s/dynamics.hpp"

namespace s2s {

Objective Objective::from_data(Dataset data) {
  data.validate();
  if (data.size() == 0) throw InvalidInput("dataset is empty");
  Objective o;
  o.data_ = std::make_shared<const Dataset>(std::move(data));
  return o;
}

Objective Objective::from_stats(DataStats stats) {
  Objective o;
  o.stats_ = std::make_shared<const DataStats>(std::move(stats));
  return o;
}

double Objective::loss(const UnitLayerNet& net) const {
  if (stats_) return s2s::loss(net, *stats_);
  if (data_) return s2s::loss(net, *data_);
  throw InvalidInput("objective has neither data nor statistics");
}

Gradient Objective::grad(const UnitLayerNet& net) const {
  if (stats_) return s2s::grad(net, *stats_);
  if (data_) return s2s::grad(net, *data_);
  throw InvalidInput("objective has neither data nor statistics");
}

Scheme parse_scheme(const std::string& name) {
  if (name == "euler") return Scheme::kEuler;
  if (name == "rk4") return Scheme::kRk4;
  throw InvalidInput("unknown integration scheme '" + name + "'");
}

const Snapshot& Trajectory::nearest_snapshot(double t) const {
  if (snapshots.empty()) throw InvalidInput("trajectory has no snapshots");
  std::size_t best = 0;
  for (std::size_t k = 1; k < snapshots.size(); ++k) {
    if (std::abs(snapshots[k].time - t) < std::abs(snapshots[best].time - t)) {
      best = k;
    }
  }
  return snapshots[best];
}

namespace {

bool all_finite(const UnitLayerNet& net) {
  if (!net.v().allFinite() || !net.u().allFinite()) return false;
  for (const Mat& w : net.out_map().mats) {
    if (!w.allFinite()) return false;
  }
  return true;
}

void apply(UnitLayerNet& net, const Gradient& g, double scale) {
  net.v() += scale * g.dv;
  net.u() += scale * g.du;
  auto& mats = net.out_map().mats;
  for (std::size_t k = 0; k < mats.size(); ++k) mats[k] += scale * g.dout[k];
}

}  // namespace

void step_once(UnitLayerNet& net, const Objective& objective, double eta,
               Scheme scheme) {
  if (scheme == Scheme::kEuler) {
    apply(net, objective.grad(net), -eta);
    return;
  }
  const Vec theta = net.flatten();
  UnitLayerNet probe = net;
  const Vec k1 = -objective.grad(net).flatten();
  probe.assign(theta + 0.5 * eta * k1);
  const Vec k2 = -objective.grad(probe).flatten();
  probe.assign(theta + 0.5 * eta * k2);
  const Vec k3 = -objective.grad(probe).flatten();
  probe.assign(theta + eta * k3);
  const Vec k4 = -objective.grad(probe).flatten();
  net.assign(theta + (eta / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

Vec first_layer_singular_values(const UnitLayerNet& net) {
  if (net.width() == 0) return Vec();
  Eigen::JacobiSVD<Mat> svd(net.u());
  return svd.singularValues();
}

Trajectory integrate(const UnitLayerNet& init, const Objective& objective,
                     const IntegrateOptions& options) {
  if (!(options.eta > 0.0)) throw InvalidInput("step size eta must be > 0");
  if (options.steps < 0) throw InvalidInput("step count must be >= 0");
  if (options.record_every < 1) throw InvalidInput("record_every must be >= 1");
  if (options.scheme == Scheme::kRk4 && !init.activation().smooth()) {
    throw InvalidInput("rk4 requires a smooth activation; " +
                       init.activation().name() + " is not");
  }
  std::set<long> snap_steps;
  if (options.snapshots > 0) {
    const int n = std::max(options.snapshots, 2);
    // Snapshots sit on recorded steps: multiples of record_every, or the end.
    const long every = options.record_every;
    for (int k = 0; k < n; ++k) {
      const double target = static_cast<double>(options.steps) * k / (n - 1);
      const long s = every * std::llround(target / every);
      snap_steps.insert(std::min(s, options.steps));
    }
  }

  Trajectory traj;
  traj.eta = options.eta;
  UnitLayerNet net = init;
  UnitLayerNet last_good = init;

  auto record = [&](long step) {
    const double l = objective.loss(net);
    if (!std::isfinite(l)) {
      throw DivergenceError("non-finite loss at step " + std::to_string(step),
                            last_good, step);
    }
    traj.steps.push_back(step);
    traj.times.push_back(step * options.eta);
    traj.losses.push_back(l);
    if (options.top_singular > 0) {
      const Vec sv = first_layer_singular_values(net);
      for (int k = 0; k < options.top_singular; ++k) {
        traj.metrics["sv" + std::to_string(k + 1)].push_back(
            k < sv.size() ? sv[k] : 0.0);
      }
    }
  };
  auto maybe_snapshot = [&](long step) {
    if (snap_steps.count(step)) {
      traj.snapshots.push_back({step, step * options.eta, net});
    }
  };

  record(0);
  maybe_snapshot(0);
  long step = 0;
  bool stopped = false;
  while (step < options.steps && !stopped) {
    step_once(net, objective, options.eta, options.scheme);
    ++step;
    if (!all_finite(net)) {
      throw DivergenceError("non-finite parameters at step " +
                                std::to_string(step),
                            last_good, step);
    }
    if (options.observer && !options.observer(step, net)) stopped = true;
    if (step % options.record_every == 0 || step == options.steps || stopped) {
      record(step);
    }
    maybe_snapshot(step);
    last_good = net;
  }
  if (traj.snapshots.empty() || traj.snapshots.back().step != step) {
    traj.snapshots.push_back({step, step * options.eta, net});
  }
  traj.final_net = std::move(net);
  return traj;
}

}  // namespace s2s
