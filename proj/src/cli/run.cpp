#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "s2s/data.hpp"
#include "s2s/dynamics.hpp"
#include "s2s/landscape.hpp"
#include "s2s/runner.hpp"
#include "s2s/theory.hpp"

namespace fs = std::filesystem;

namespace s2s {

namespace {

Mat to_matrix(const Json& j, const std::string& key) {
  if (j.is_null()) return {};
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    throw ConfigError(key, "expected a non-empty array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (!j[r].is_array() || static_cast<Eigen::Index>(j[r].size()) != cols) {
      throw ConfigError(key, "rows must have equal length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw ConfigError(key, "entries must be numbers");
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

Json vec_json(const Vec& v) {
  Json out = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v[k]);
  return out;
}

// JSON has no infinity; unbounded times are written as null.
Json num(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

void write_json(const Json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing " + path.string());
}

ActivationKind build_activation(const Json& m) {
  ActivationKind act = ActivationKind::parse(m["activation"].get<std::string>());
  if (act.tag() == ActivationTag::kLinearAttention) {
    AttentionGeometry g;
    g.embed_dim = m["embed_dim"].get<int>();
    g.context_len = m["context_len"].get<int>();
    g.head_rank = m["head_rank"].get<int>();
    act = ActivationKind::attention(g);
  }
  return act;
}

ManifoldConstraint build_constraint(const Json& c) {
  const std::string kind = c["kind"].get<std::string>();
  const int i = c.value("i", 0);
  const int j = c.value("j", 0);
  if (kind == "equal") return ManifoldConstraint::equal(i, j);
  if (kind == "zero") return ManifoldConstraint::zero(i);
  if (kind == "proportional") {
    std::optional<double> g;
    if (c.contains("gamma") && !c["gamma"].is_null()) g = c["gamma"].get<double>();
    return ManifoldConstraint::proportional(i, j, g);
  }
  return ManifoldConstraint::lindep(i, c.value("coeffs", std::vector<double>{}));
}

struct Built {
  ActivationKind act;
  Dataset data;
  std::optional<DataStats> prescribed;
  UnitLayerNet init;
  Objective objective;
  std::optional<DataStats> stats;  // empirical (or prescribed) moments when defined
};

Built build(const Json& c) {
  Built b;
  const std::uint64_t seed = c["seed"].get<std::uint64_t>();
  const Json& m = c["model"];
  const Json& d = c["data"];
  b.act = build_activation(m);

  const std::string kind = d["kind"].get<std::string>();
  const int p = d["samples"].get<int>();
  if (kind == "spectrum") {
    const SpectrumMode mode = d["spectrum_mode"] == "linear" ? SpectrumMode::kLinear
                                                             : SpectrumMode::kQuadratic;
    SpectrumData sd = gen_spectrum_dataset(d["kappa"].get<double>(),
                                           d["spectrum_dim"].get<int>(), mode, p, seed);
    b.data = std::move(sd.data);
    b.prescribed = std::move(sd.stats);
  } else {
    DatasetParams params;
    params.teacher_w = to_matrix(d["teacher_w"], "data.teacher_w");
    params.teacher_u = to_matrix(d["teacher_u"], "data.teacher_u");
    params.teacher_v = to_matrix(d["teacher_v"], "data.teacher_v");
    params.teacher_activation = d["teacher_activation"].get<std::string>();
    params.embed_dim = m["embed_dim"].get<int>();
    params.context_len = m["context_len"].get<int>();
    params.token_scales = d["token_scales"].get<std::vector<double>>();
    params.path = d["path"].get<std::string>();
    b.data = gen_dataset(kind, params, p, seed);
  }

  const Json& om = m["out_map"];
  const int h = m["width"].get<int>();
  const int out_dim = b.data.output_dim();
  OutMap out;
  int zeta = out_dim;
  const std::string om_kind = om["kind"].get<std::string>();
  if (om_kind == "chain") {
    std::vector<int> widths = om["widths"].get<std::vector<int>>();
    zeta = widths.front();
    std::vector<Mat> mats;
    for (std::size_t l = 1; l < widths.size(); ++l) mats.push_back(Mat::Zero(widths[l], widths[l - 1]));
    mats.push_back(Mat::Zero(out_dim, widths.back()));
    out = OutMap::chain(std::move(mats));
  } else if (om_kind == "skip") {
    const std::string pat = om["skip_pattern"].get<std::string>();
    const SkipPattern sp = pat == "skip1"   ? SkipPattern::kSkip1
                           : pat == "skip2" ? SkipPattern::kSkip2
                                            : SkipPattern::kNone;
    zeta = h;
    out = OutMap::skip(sp, Mat::Zero(h, h), Mat::Zero(out_dim, h));
  }
  UnitLayerNet shape;
  try {
    shape = UnitLayerNet::zeros(b.act, b.data.input_dim(), zeta, h, out);
  } catch (const Error& e) {
    throw ConfigError("model", e.what());
  }

  const Json& in = c["init"];
  InitSpec spec;
  const std::string scheme = in["scheme"].get<std::string>();
  spec.scheme = scheme == "low-rank"            ? InitSpec::Scheme::kLowRank
                : scheme == "manifold-adjacent" ? InitSpec::Scheme::kManifoldAdjacent
                                                : InitSpec::Scheme::kIsotropic;
  spec.epsilon = in["epsilon"].get<double>();
  spec.rank = in["rank"].get<int>();
  spec.sigma = in["sigma"].get<double>();
  spec.delta = in["delta"].get<double>();
  spec.seed = seed;
  for (const auto& con : in["constraints"]) spec.constraints.push_back(build_constraint(con));
  try {
    b.init = init_weights(shape, spec);
  } catch (const Error& e) {
    throw ConfigError("init", e.what());
  }

  const std::string objective = d["objective"].get<std::string>();
  const auto fm = b.act.feature_map();
  const bool moments = fm.has_value();
  if (objective == "prescribed") {
    if (!moments || b.prescribed->features != *fm) {
      throw ConfigError("data.objective",
                        "prescribed statistics do not match the feature map of " + b.act.name());
    }
    b.stats = *b.prescribed;
    b.objective = Objective::from_stats(*b.stats);
  } else {
    if (moments) b.stats = compute_stats(b.data, b.act);
    if (objective == "stats" && !moments) {
      throw ConfigError("data.objective", b.act.name() + " has no moment statistics");
    }
    if (moments && objective != "data") {
      b.objective = Objective::from_stats(*b.stats);
    } else {
      b.objective = Objective::from_data(b.data);
    }
  }
  return b;
}

bool lattice_kind(const UnitLayerNet& net) {
  return net.activation().tag() == ActivationTag::kLinearFc &&
         net.out_map().kind == OutMap::Kind::kIdentity;
}

Json theory_predictions(const Json& c, const Built& b, const std::string& dir) {
  Json p;
  p["escape_times"] = nullptr;
  p["t_infinity_per_unit"] = nullptr;
  p["predicted_order"] = nullptr;
  p["spectrum"] = nullptr;
  if (!b.stats) return p;
  const Json& a = c["analysis"];
  if (lattice_kind(b.init)) {
    const SpectralDecomp d = spectral(*b.stats, SpectralCase::kLinearSvd);
    p["spectrum"] = {{"case", "linear-svd"}, {"s", vec_json(d.s)},
                     {"multiplicity", d.multiplicity}};
    const Mat theta = b.init.stacked();
    const double thr = a["escape_threshold"].get<double>();
    Json per_unit = Json::array();
    for (Eigen::Index i = 0; i < theta.cols(); ++i) {
      per_unit.push_back(num(escape_time(d, theta.col(i), thr)));
    }
    p["escape_times"] = {{"threshold", thr},
                         {"network", num(escape_time(d, theta, thr))},
                         {"per_unit", per_unit}};
    if (b.stats->yz.rows() <= 12) {
      const auto saddles = enumerate_linear_saddles(*b.stats);
      Json atlas = Json::array();
      for (const auto& s : saddles) {
        atlas.push_back({{"index_set", s.index_set}, {"mask", s.mask}, {"rank", s.rank},
                         {"loss", s.loss}, {"degenerate", s.degenerate}});
      }
      p["saddle_atlas"] = atlas;
      if (!dir.empty()) write_saddle_atlas_csv(saddles, (fs::path(dir) / "saddle_atlas.csv").string());
    }
  } else if (b.act.tag() == ActivationTag::kQuadraticFc &&
             b.init.out_map().kind == OutMap::Kind::kIdentity && b.init.nv() == 1) {
    const SpectralDecomp d = spectral(*b.stats, SpectralCase::kQuadEig, true);
    p["spectrum"] = {{"case", "quad-eig"}, {"s", vec_json(d.s)},
                     {"multiplicity", d.multiplicity}};
    const UnitOrder order = unit_order_prediction(b.init, d);
    Json tinf = Json::array();
    for (double t : order.t_infinity) tinf.push_back(num(t));
    p["t_infinity_per_unit"] = tinf;
    p["predicted_order"] = order.order;
    p["ties"] = order.ties;
    p["time_unit"] = "training time (reduced time / 2)";
  }
  return p;
}

// Reference loss of the saddle behind each intermediate plateau.
Json saddle_references(const Built& b, const Trajectory& traj, const PlateauReport& rep) {
  Json out = Json::array();
  std::vector<LinearSaddleSpec> chain;
  if (lattice_kind(b.init) && b.stats) {
    try {
      const LinearFpModes modes = linear_fp_modes(*b.stats);
      for (int k = 1; k <= modes.e.cols(); ++k) {
        std::vector<int> set(k);
        for (int j = 0; j < k; ++j) set[j] = j;
        chain.push_back(linear_saddle(*b.stats, set));
      }
    } catch (const Error&) {
      chain.clear();
    }
  }
  for (const auto& seg : rep.segments) {
    if (seg.role != PlateauSegment::Role::kIntermediate) continue;
    Json r;
    r["plateau_loss"] = seg.mean_loss;
    r["effective_width"] = seg.effective_width;
    if (!chain.empty()) {
      const int w = std::clamp(seg.effective_width, 1, static_cast<int>(chain.size()));
      r["method"] = "linear-lattice";
      r["saddle_loss"] = chain[w - 1].loss;
    } else {
      const Snapshot& snap = traj.nearest_snapshot(0.5 * (seg.t_start + seg.t_end));
      PolishOptions opt;
      opt.gd_steps = 0;
      opt.newton_iters = 40;
      opt.tol = 1e-9;
      const PolishResult pr = polish_fixed_point(snap.net, b.objective, opt);
      r["method"] = "newton-polish";
      r["saddle_loss"] = pr.loss;
      r["grad_norm"] = pr.grad_norm;
      r["converged"] = pr.converged;
    }
    const double ref = r["saddle_loss"].get<double>();
    r["relative_error"] = std::abs(seg.mean_loss - ref) / std::max(std::abs(ref), 1e-300);
    out.push_back(r);
  }
  return out;
}

}  // namespace

Json run_point(const Json& c, const std::string& dir) {
  const Built b = build(c);
  const Json& t = c["train"];
  const Json& a = c["analysis"];
  const double eta = t["eta"].get<double>();
  IntegrateOptions io;
  io.eta = eta;
  io.steps = t["steps"].get<long>() > 0 ? t["steps"].get<long>()
                                        : std::lround(std::ceil(t["time"].get<double>() / eta));
  io.record_every = t["record_every"].get<long>();
  io.scheme = parse_scheme(t["scheme"].get<std::string>());
  io.snapshots = t["snapshots"].get<int>();

  if (!dir.empty()) fs::create_directories(fs::path(dir) / "snapshots");
  Json predictions = c["analysis"]["theory"].get<bool>() ? theory_predictions(c, b, dir) : Json();

  // First unit whose norm crosses analysis.order_threshold, for comparison
  // with the predicted blow-up order.
  const bool track_order = !predictions.is_null() && !predictions["predicted_order"].is_null();
  const double order_thr = a["order_threshold"].get<double>();
  int first_unit = -1;
  double first_time = NAN;
  if (track_order) {
    io.observer = [&](long step, const UnitLayerNet& net) {
      if (first_unit < 0) {
        const Vec norms = net.stacked().colwise().norm().transpose();
        Eigen::Index i = 0;
        if (norms.maxCoeff(&i) >= order_thr) {
          first_unit = static_cast<int>(i);
          first_time = step * eta;
        }
      }
      return true;
    };
  }
  const Trajectory traj = integrate(b.init, b.objective, io);

  PlateauOptions po;
  po.slope_tol = a["slope_tol"].get<double>();
  po.min_len = a["min_len"].get<double>();
  po.floor_ratio = a["floor_ratio"].get<double>();
  po.merge_rel = a["merge_rel"].get<double>();
  PlateauReport rep = detect_plateaus(traj, po);
  const std::string wm_name = a["width_mode"].get<std::string>();
  const WidthMode wm = wm_name == "auto" ? default_width_mode(b.act) : parse_width_mode(wm_name);
  WidthOptions wo;
  wo.tol = a["width_tol"].get<double>();
  wo.abs_floor = a["width_floor"].get<double>();
  annotate_widths(rep, traj, wm, wo);

  Json plateaus = Json::array();
  Json widths = Json::array();
  Json roles = Json::array();
  Json plateau_losses = Json::array();
  for (const auto& s : rep.segments) {
    plateaus.push_back({{"role", role_name(s.role)},
                        {"t_start", s.t_start},
                        {"t_end", s.t_end},
                        {"duration", s.duration()},
                        {"mean_loss", s.mean_loss},
                        {"effective_width", s.effective_width}});
    widths.push_back(s.effective_width);
    roles.push_back(role_name(s.role));
    plateau_losses.push_back(s.mean_loss);
  }
  Json transitions = Json::array();
  for (const auto& tr : rep.transitions) {
    transitions.push_back({{"t_mid", tr.t_mid}, {"loss_drop", tr.loss_drop}});
  }

  Json summary;
  summary["name"] = c["name"];
  summary["activation"] = b.act.name();
  summary["width"] = b.init.width();
  summary["seed"] = c["seed"];
  summary["steps"] = io.steps;
  summary["time"] = io.steps * eta;
  summary["objective"] = b.objective.uses_stats() ? "statistics" : "samples";
  summary["initial_loss"] = traj.losses.front();
  summary["final_loss"] = traj.losses.back();
  summary["loss_ratio"] = traj.losses.back() / std::max(traj.losses.front(), 1e-300);
  summary["width_mode"] = width_mode_name(wm);
  summary["final_width"] = effective_width(traj.final_net, wm, wo);
  summary["plateau_count"] = rep.segments.size();
  summary["initial_plateau_count"] = rep.count(PlateauSegment::Role::kInitial);
  summary["intermediate_plateau_count"] = rep.intermediate_count();
  summary["plateau_widths"] = widths;
  summary["plateau_roles"] = roles;
  summary["plateau_losses"] = plateau_losses;
  summary["plateau_time"] = rep.plateau_time();
  summary["intermediate_time"] = rep.intermediate_time();
  summary["transitions"] = transitions;
  if (a["saddle_reference"].get<bool>()) {
    summary["saddle_references"] = saddle_references(b, traj, rep);
  }
  if (track_order) {
    const int predicted = predictions["predicted_order"][0].get<int>();
    summary["predicted_first_unit"] = predicted;
    summary["observed_first_unit"] = first_unit >= 0 ? Json(first_unit) : Json();
    summary["observed_first_time"] = first_unit >= 0 ? Json(first_time) : Json();
    summary["predicted_first_time"] = predictions["t_infinity_per_unit"][predicted];
    summary["order_match"] = first_unit == predicted;
  }
  if (!predictions.is_null() && !predictions["escape_times"].is_null()) {
    summary["escape_time"] = predictions["escape_times"]["network"];
  }

  if (!dir.empty()) {
    const fs::path root(dir);
    write_trajectory_csv(traj, (root / "trajectory.csv").string());
    write_json({{"segments", plateaus}, {"transitions", transitions}}, root / "plateaus.json");
    for (const auto& snap : traj.snapshots) {
      std::ostringstream name;
      name << "step_" << std::setw(9) << std::setfill('0') << snap.step << ".csv";
      write_snapshots_csv({snap}, (root / "snapshots" / name.str()).string());
    }
    if (!predictions.is_null()) write_json(predictions, root / "predictions.json");
    write_json(summary, root / "summary.json");
    write_json(c, root / "config.json");
  }
  return summary;
}

namespace {

std::string slug(const Json& v) {
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  for (char& ch : s) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '.') ch = '_';
  }
  return s;
}

double median(std::vector<double> xs) {
  if (xs.empty()) return NAN;
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace

RunOutcome run_experiment(const Json& config) {
  const Json c = normalize_config(config);
  RunOutcome out;
  out.output_dir = c["output_dir"].get<std::string>();
  const std::string key = c["sweep"]["key"].get<std::string>();
  if (key.empty()) {
    out.summary = run_point(c, out.output_dir);
    return out;
  }
  fs::create_directories(out.output_dir);
  const Json& values = c["sweep"]["values"];
  const int seeds = c["sweep"]["seeds"].get<int>();
  const std::uint64_t base_seed = c["seed"].get<std::uint64_t>();
  const std::string leaf = key.substr(key.rfind('.') + 1);

  struct Point {
    Json cfg;
    std::string dir;
    std::size_t value_index;
  };
  std::vector<Point> points;
  for (std::size_t vi = 0; vi < values.size(); ++vi) {
    for (int s = 0; s < seeds; ++s) {
      Json pc = c;
      Json* cur = &pc;
      std::size_t start = 0;
      while (true) {
        const std::size_t dot = key.find('.', start);
        cur = &(*cur)[key.substr(start, dot - start)];
        if (dot == std::string::npos) break;
        start = dot + 1;
      }
      *cur = values[vi];
      pc["seed"] = base_seed ^ static_cast<std::uint64_t>(s);
      pc["sweep"] = default_config()["sweep"];
      const std::string dir =
          (fs::path(out.output_dir) / (leaf + "=" + slug(values[vi])) / ("seed_" + std::to_string(s)))
              .string();
      pc["output_dir"] = dir;
      points.push_back({pc, dir, vi});
    }
  }

  std::vector<Json> results(points.size());
  const unsigned workers = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
  std::size_t next = 0;
  while (next < points.size()) {
    std::vector<std::future<Json>> batch;
    const std::size_t first = next;
    for (unsigned w = 0; w < workers && next < points.size(); ++w, ++next) {
      const Point& pt = points[next];
      batch.push_back(std::async(std::launch::async, [&pt] { return run_point(pt.cfg, pt.dir); }));
    }
    for (std::size_t k = 0; k < batch.size(); ++k) results[first + k] = batch[k].get();
  }

  Json aggregate = Json::array();
  for (std::size_t vi = 0; vi < values.size(); ++vi) {
    std::vector<double> inter_time, plat_time, inter_count, final_ratio, t1, t2;
    for (std::size_t k = 0; k < points.size(); ++k) {
      if (points[k].value_index != vi) continue;
      const Json& r = results[k];
      inter_time.push_back(r["intermediate_time"].get<double>());
      plat_time.push_back(r["plateau_time"].get<double>());
      inter_count.push_back(r["intermediate_plateau_count"].get<double>());
      final_ratio.push_back(r["loss_ratio"].get<double>());
      const Json& tr = r["transitions"];
      if (tr.size() > 0) t1.push_back(tr[0]["t_mid"].get<double>());
      if (tr.size() > 1) t2.push_back(tr[1]["t_mid"].get<double>());
    }
    aggregate.push_back({{"value", values[vi]},
                         {"median_intermediate_time", num(median(inter_time))},
                         {"median_plateau_time", num(median(plat_time))},
                         {"median_intermediate_count", num(median(inter_count))},
                         {"median_loss_ratio", num(median(final_ratio))},
                         {"median_first_transition", num(median(t1))},
                         {"median_second_transition", num(median(t2))}});
  }
  Json runs = Json::array();
  for (std::size_t k = 0; k < points.size(); ++k) {
    runs.push_back({{"value", values[points[k].value_index]},
                    {"seed", points[k].cfg["seed"]},
                    {"output_dir", points[k].dir},
                    {"summary", results[k]}});
  }
  out.summary = {{"name", c["name"]}, {"sweep_key", key}, {"aggregate", aggregate}, {"runs", runs}};
  write_json(out.summary, fs::path(out.output_dir) / "summary.json");
  write_json(c, fs::path(out.output_dir) / "config.json");
  return out;
}

}  // namespace s2s
