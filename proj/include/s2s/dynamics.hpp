#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "s2s/dataset.hpp"
#include "s2s/netcore.hpp"

namespace s2s {

/// What gradient flow descends: a sampled dataset or its moment statistics.
class Objective {
 public:
  static Objective from_data(Dataset data);
  static Objective from_stats(DataStats stats);

  bool uses_stats() const { return stats_ != nullptr; }
  const Dataset* data() const { return data_.get(); }
  const DataStats* stats() const { return stats_.get(); }

  double loss(const UnitLayerNet& net) const;
  Gradient grad(const UnitLayerNet& net) const;

 private:
  std::shared_ptr<const Dataset> data_;
  std::shared_ptr<const DataStats> stats_;
};

enum class Scheme { kEuler, kRk4 };
Scheme parse_scheme(const std::string& name);

struct Snapshot {
  long step = 0;
  double time = 0.0;
  UnitLayerNet net;
};

struct Trajectory {
  std::vector<long> steps;
  std::vector<double> times;
  std::vector<double> losses;
  std::vector<Snapshot> snapshots;
  std::map<std::string, std::vector<double>> metrics;
  UnitLayerNet final_net;
  double eta = 0.0;

  std::size_t size() const { return steps.size(); }
  /// Snapshot whose time is closest to t.
  const Snapshot& nearest_snapshot(double t) const;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, UnitLayerNet last, long step)
      : Error(what), last_state(std::move(last)), step(step) {}
  UnitLayerNet last_state;
  long step;
};

struct IntegrateOptions {
  double eta = 0.01;
  long steps = 1000;
  long record_every = 1;
  Scheme scheme = Scheme::kEuler;
  int snapshots = 100;     // evenly spaced, plus the first and last state
  int top_singular = 3;    // metric:sv1..svK of the first-layer weights
  // Called after every step with the new state; returning false stops early.
  std::function<bool(long step, const UnitLayerNet& net)> observer;
};

/// theta <- theta - eta grad (euler) or one classical RK4 step of the flow.
Trajectory integrate(const UnitLayerNet& init, const Objective& objective,
                     const IntegrateOptions& options);

/// One step of the chosen scheme.
void step_once(UnitLayerNet& net, const Objective& objective, double eta,
               Scheme scheme);

struct PlateauOptions {
  double slope_tol = 1e-3;   // on |d log L / dt|
  double min_len = -1.0;     // training time; negative = 5% of the run
  double floor_ratio = 1e-8; // L <= floor_ratio * L(0) counts as converged
  // Neighbouring plateaus whose mean losses agree to this relative tolerance
  // are one plateau; the gap between them carries no loss drop.
  double merge_rel = 0.01;
};

struct PlateauSegment {
  enum class Role { kInitial, kIntermediate, kFinal };
  double t_start = 0.0;
  double t_end = 0.0;
  double mean_loss = 0.0;
  int effective_width = -1;
  Role role = Role::kIntermediate;

  double duration() const { return t_end - t_start; }
};

struct Transition {
  double t_mid = 0.0;
  double loss_drop = 0.0;
};

struct PlateauReport {
  std::vector<PlateauSegment> segments;
  std::vector<Transition> transitions;

  int count(PlateauSegment::Role role) const;
  int intermediate_count() const { return count(PlateauSegment::Role::kIntermediate); }
  /// Total time spent on non-final plateaus.
  double plateau_time() const;
  /// Total time spent on intermediate plateaus.
  double intermediate_time() const;
};

const char* role_name(PlateauSegment::Role role);

PlateauReport detect_plateaus(const std::vector<double>& times,
                              const std::vector<double>& losses,
                              const PlateauOptions& options = {});
PlateauReport detect_plateaus(const Trajectory& traj,
                              const PlateauOptions& options = {});

enum class WidthMode { kRank, kRays, kActiveUnits };
WidthMode parse_width_mode(const std::string& name);
std::string width_mode_name(WidthMode mode);
/// The mode matching an activation family (rank / rays / active-units).
WidthMode default_width_mode(const ActivationKind& act);

struct WidthOptions {
  double tol = 0.05;        // relative threshold; cosine tolerance for rays
  double abs_floor = 0.1;   // weights below this norm count as absent
};

int effective_width(const UnitLayerNet& net, WidthMode mode,
                    const WidthOptions& options = {});

/// Fills segment widths from the snapshot nearest each segment's midpoint
/// (the final state for the final segment).
void annotate_widths(PlateauReport& report, const Trajectory& traj,
                     WidthMode mode, const WidthOptions& options = {});

/// Singular values of the first-layer weight matrix (columns u_i), descending.
Vec first_layer_singular_values(const UnitLayerNet& net);

// CSV exports.
void write_trajectory_csv(const Trajectory& traj, const std::string& path);
/// Flat parameter dump: step,unit,role,index,value (role v, u or w).
void write_snapshots_csv(const std::vector<Snapshot>& snaps,
                         const std::string& path);

}  // namespace s2s
