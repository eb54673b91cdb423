#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "s2s/dynamics.hpp"

namespace s2s {

int PlateauReport::count(PlateauSegment::Role role) const {
  return static_cast<int>(std::count_if(
      segments.begin(), segments.end(),
      [role](const PlateauSegment& s) { return s.role == role; }));
}

double PlateauReport::plateau_time() const {
  double t = 0.0;
  for (const auto& s : segments) {
    if (s.role != PlateauSegment::Role::kFinal) t += s.duration();
  }
  return t;
}

double PlateauReport::intermediate_time() const {
  double t = 0.0;
  for (const auto& s : segments) {
    if (s.role == PlateauSegment::Role::kIntermediate) t += s.duration();
  }
  return t;
}

const char* role_name(PlateauSegment::Role role) {
  switch (role) {
    case PlateauSegment::Role::kInitial:
      return "initial";
    case PlateauSegment::Role::kIntermediate:
      return "intermediate";
    case PlateauSegment::Role::kFinal:
      return "final";
  }
  return "unknown";
}

PlateauReport detect_plateaus(const std::vector<double>& times,
                              const std::vector<double>& losses,
                              const PlateauOptions& options) {
  PlateauReport report;
  const std::size_t n = times.size();
  if (losses.size() != n) throw ShapeError("times and losses differ in length");
  if (n < 2) return report;
  const double span = times.back() - times.front();
  const double min_len = options.min_len >= 0.0 ? options.min_len : 0.05 * span;
  const double floor = options.floor_ratio * losses.front();

  std::vector<double> logl(n);
  for (std::size_t k = 0; k < n; ++k) {
    logl[k] = std::log(std::max(losses[k], std::numeric_limits<double>::min()));
  }
  std::vector<char> flat(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t lo = k == 0 ? 0 : k - 1;
    const std::size_t hi = k + 1 == n ? k : k + 1;
    const double slope = (logl[hi] - logl[lo]) / (times[hi] - times[lo]);
    flat[k] = std::abs(slope) < options.slope_tol || losses[k] <= floor;
  }

  struct Run {
    std::size_t lo, hi;
    double mean;
  };
  auto mean_of = [&](std::size_t lo, std::size_t hi) {
    double sum = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) sum += losses[j];
    return sum / static_cast<double>(hi - lo + 1);
  };
  std::vector<Run> runs;
  std::size_t k = 0;
  while (k < n) {
    if (!flat[k]) {
      ++k;
      continue;
    }
    std::size_t end = k;
    while (end + 1 < n && flat[end + 1]) ++end;
    if (times[end] - times[k] >= min_len) runs.push_back({k, end, mean_of(k, end)});
    k = end + 1;
  }
  std::vector<Run> merged;
  for (const Run& r : runs) {
    if (!merged.empty()) {
      Run& last = merged.back();
      const double scale = std::max(std::abs(last.mean), std::abs(r.mean));
      if (std::abs(last.mean - r.mean) <= options.merge_rel * scale) {
        last.hi = r.hi;
        last.mean = mean_of(last.lo, last.hi);
        continue;
      }
    }
    merged.push_back(r);
  }
  for (const Run& r : merged) {
    PlateauSegment seg;
    seg.t_start = times[r.lo];
    seg.t_end = times[r.hi];
    seg.mean_loss = r.mean;
    if (r.lo == 0) {
      seg.role = PlateauSegment::Role::kInitial;
    } else if (r.hi + 1 == n) {
      seg.role = PlateauSegment::Role::kFinal;
    } else {
      seg.role = PlateauSegment::Role::kIntermediate;
    }
    report.segments.push_back(seg);
  }
  for (std::size_t s = 1; s < report.segments.size(); ++s) {
    const auto& a = report.segments[s - 1];
    const auto& b = report.segments[s];
    report.transitions.push_back(
        {0.5 * (a.t_end + b.t_start), a.mean_loss - b.mean_loss});
  }
  return report;
}

PlateauReport detect_plateaus(const Trajectory& traj,
                              const PlateauOptions& options) {
  return detect_plateaus(traj.times, traj.losses, options);
}

WidthMode parse_width_mode(const std::string& name) {
  if (name == "rank") return WidthMode::kRank;
  if (name == "rays") return WidthMode::kRays;
  if (name == "active-units") return WidthMode::kActiveUnits;
  throw InvalidInput("unknown effective-width mode '" + name + "'");
}

std::string width_mode_name(WidthMode mode) {
  switch (mode) {
    case WidthMode::kRank:
      return "rank";
    case WidthMode::kRays:
      return "rays";
    case WidthMode::kActiveUnits:
      return "active-units";
  }
  return "unknown";
}

WidthMode default_width_mode(const ActivationKind& act) {
  if (act.linear_in_u()) return WidthMode::kRank;
  if (act.homogeneous()) return WidthMode::kRays;
  return WidthMode::kActiveUnits;
}

int effective_width(const UnitLayerNet& net, WidthMode mode,
                    const WidthOptions& options) {
  if (net.width() == 0) return 0;
  const Mat theta = net.stacked();
  if (mode == WidthMode::kRank) {
    // Inside a deep stack v_i is a column of a wide hidden matrix; the rank of
    // the first layer alone is the width of the unit layer.
    const bool deep = net.out_map().kind != OutMap::Kind::kIdentity;
    Eigen::JacobiSVD<Mat> svd(deep ? Mat(net.u()) : theta);
    const Vec s = svd.singularValues();
    const double cut = std::max(options.tol * s[0], options.abs_floor);
    return static_cast<int>((s.array() > cut).count());
  }
  const Vec norms = theta.colwise().norm().transpose();
  const double cut = std::max(options.tol * norms.maxCoeff(), options.abs_floor);
  if (mode == WidthMode::kActiveUnits) {
    // Coincident units are one unit (they merge under the equal constraint).
    const double same = 1e-6 * norms.maxCoeff();
    std::vector<int> kept;
    for (int i = 0; i < net.width(); ++i) {
      if (!(norms[i] > cut)) continue;
      bool dup = false;
      for (int j : kept) {
        if ((theta.col(i) - theta.col(j)).norm() <= same) {
          dup = true;
          break;
        }
      }
      if (!dup) kept.push_back(i);
    }
    return static_cast<int>(kept.size());
  }
  // Greedy leader clustering of unit directions.
  std::vector<Vec> leaders;
  for (int i = 0; i < net.width(); ++i) {
    if (!(norms[i] > cut)) continue;
    const Vec dir = theta.col(i) / norms[i];
    bool placed = false;
    for (const Vec& l : leaders) {
      if (dir.dot(l) > 1.0 - options.tol) {
        placed = true;
        break;
      }
    }
    if (!placed) leaders.push_back(dir);
  }
  return static_cast<int>(leaders.size());
}

void annotate_widths(PlateauReport& report, const Trajectory& traj,
                     WidthMode mode, const WidthOptions& options) {
  for (auto& seg : report.segments) {
    const UnitLayerNet& net =
        seg.role == PlateauSegment::Role::kFinal
            ? traj.final_net
            : traj.nearest_snapshot(0.5 * (seg.t_start + seg.t_end)).net;
    seg.effective_width = effective_width(net, mode, options);
  }
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "step,time,loss";
  for (const auto& [name, _] : traj.metrics) out << ",metric:" << name;
  out << "\n" << std::setprecision(17);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out << traj.steps[k] << "," << traj.times[k] << "," << traj.losses[k];
    for (const auto& [_, series] : traj.metrics) out << "," << series[k];
    out << "\n";
  }
  if (!out) throw IoError("failed writing " + path);
}

void write_snapshots_csv(const std::vector<Snapshot>& snaps,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "step,unit,role,index,value\n" << std::setprecision(17);
  for (const Snapshot& s : snaps) {
    const UnitLayerNet& net = s.net;
    for (int i = 0; i < net.width(); ++i) {
      for (int k = 0; k < net.nv(); ++k) {
        out << s.step << "," << i << ",v," << k << "," << net.v()(k, i) << "\n";
      }
      for (int k = 0; k < net.nu(); ++k) {
        out << s.step << "," << i << ",u," << k << "," << net.u()(k, i) << "\n";
      }
    }
    // Out-map matrices use unit = matrix position and a column-major index.
    const auto& mats = net.out_map().mats;
    for (std::size_t m = 0; m < mats.size(); ++m) {
      for (Eigen::Index k = 0; k < mats[m].size(); ++k) {
        out << s.step << "," << m << ",w," << k << ","
            << mats[m].reshaped()[k] << "\n";
      }
    }
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace s2s
