#include <algorithm>
#include <string>
#include <vector>

#include "s2s/data.hpp"
#include "s2s/dynamics.hpp"
#include "s2s/runner.hpp"

namespace s2s {

Json default_config() {
  return Json::parse(R"({
    "name": "custom",
    "seed": 0,
    "output_dir": "out",
    "model": {
      "activation": "linear-fc",
      "width": 50,
      "embed_dim": 2,
      "context_len": 32,
      "head_rank": 1,
      "out_map": {"kind": "identity", "widths": [], "skip_pattern": "none"}
    },
    "data": {
      "kind": "linear-fc-teacher",
      "samples": 8192,
      "teacher_w": null,
      "teacher_u": null,
      "teacher_v": null,
      "teacher_activation": "tanh-fc",
      "path": "",
      "token_scales": [],
      "kappa": 1.0,
      "spectrum_dim": 3,
      "spectrum_mode": "linear",
      "objective": "auto"
    },
    "init": {
      "scheme": "isotropic",
      "epsilon": 1e-6,
      "rank": 1,
      "sigma": 1.0,
      "delta": 0.0,
      "constraints": []
    },
    "train": {
      "eta": 0.01,
      "time": 40.0,
      "steps": 0,
      "scheme": "euler",
      "record_every": 1,
      "snapshots": 100
    },
    "analysis": {
      "slope_tol": 1e-3,
      "min_len": -1.0,
      "floor_ratio": 1e-8,
      "merge_rel": 0.01,
      "width_mode": "auto",
      "width_tol": 0.05,
      "width_floor": 0.1,
      "theory": true,
      "escape_threshold": 1.0,
      "order_threshold": 0.5,
      "saddle_reference": true
    },
    "sweep": {"key": "", "values": [], "seeds": 1}
  })");
}

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

bool is_matrix_slot(const std::string& path) {
  return path == "data.teacher_w" || path == "data.teacher_u" || path == "data.teacher_v";
}

void merge(Json& base, const Json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = join(path, it.key());
    if (!base.contains(it.key())) throw ConfigError(key, "unknown key");
    Json& slot = base[it.key()];
    const Json& value = it.value();
    if (slot.is_object()) {
      merge(slot, value, key);
      continue;
    }
    if (is_matrix_slot(key)) {
      if (!value.is_null() && !value.is_array()) {
        throw ConfigError(key, "expected a matrix (array of rows) or null");
      }
    } else if (slot.is_boolean()) {
      if (!value.is_boolean()) throw ConfigError(key, "expected a boolean");
    } else if (slot.is_number_integer()) {
      if (!value.is_number_integer()) throw ConfigError(key, "expected an integer");
    } else if (slot.is_number()) {
      if (!value.is_number()) throw ConfigError(key, "expected a number");
    } else if (slot.is_string()) {
      if (!value.is_string()) throw ConfigError(key, "expected a string");
    } else if (slot.is_array()) {
      if (!value.is_array()) throw ConfigError(key, "expected an array");
    }
    slot = value;
  }
}

template <typename F>
void check(const std::string& key, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key, e.what());
  }
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

bool one_of(const std::string& s, std::initializer_list<const char*> names) {
  return std::any_of(names.begin(), names.end(), [&](const char* n) { return s == n; });
}

Json* find_path(Json& root, const std::string& dotted) {
  Json* cur = &root;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', start);
    const std::string part = dotted.substr(start, dot - start);
    if (!cur->is_object() || !cur->contains(part)) return nullptr;
    cur = &(*cur)[part];
    if (dot == std::string::npos) return cur;
    start = dot + 1;
  }
}

void validate(const Json& c) {
  const Json& m = c["model"];
  check("model.activation", [&] { ActivationKind::parse(m["activation"].get<std::string>()); });
  require(m["width"].get<int>() >= 1, "model.width", "must be >= 1");
  require(m["embed_dim"].get<int>() >= 1, "model.embed_dim", "must be >= 1");
  require(m["context_len"].get<int>() >= 1, "model.context_len", "must be >= 1");
  require(m["head_rank"].get<int>() >= 1, "model.head_rank", "must be >= 1");
  const Json& om = m["out_map"];
  const std::string om_kind = om["kind"].get<std::string>();
  require(one_of(om_kind, {"identity", "chain", "skip"}), "model.out_map.kind",
          "must be identity, chain or skip");
  require(one_of(om["skip_pattern"].get<std::string>(), {"none", "skip1", "skip2"}),
          "model.out_map.skip_pattern", "must be none, skip1 or skip2");
  for (const auto& w : om["widths"]) {
    require(w.is_number_integer() && w.get<int>() >= 1, "model.out_map.widths",
            "entries must be integers >= 1");
  }
  if (om_kind == "chain") {
    require(!om["widths"].empty(), "model.out_map.widths", "a chain needs at least one width");
  }

  const Json& d = c["data"];
  const std::string kind = d["kind"].get<std::string>();
  const auto kinds = dataset_kinds();
  require(kind == "spectrum" || std::find(kinds.begin(), kinds.end(), kind) != kinds.end(),
          "data.kind", "unknown dataset kind '" + kind + "'");
  require(d["samples"].get<int>() >= 1, "data.samples", "must be >= 1");
  require(one_of(d["spectrum_mode"].get<std::string>(), {"linear", "quadratic"}),
          "data.spectrum_mode", "must be linear or quadratic");
  require(one_of(d["objective"].get<std::string>(), {"auto", "data", "stats", "prescribed"}),
          "data.objective", "must be auto, data, stats or prescribed");
  require(d["kappa"].get<double>() >= 0.0, "data.kappa", "must be >= 0");
  for (const auto& v : d["token_scales"]) {
    require(v.is_number() && v.get<double>() > 0.0, "data.token_scales",
            "entries must be positive numbers");
  }
  require(d["spectrum_dim"].get<int>() >= 1, "data.spectrum_dim", "must be >= 1");
  check("data.teacher_activation",
        [&] { ActivationKind::parse(d["teacher_activation"].get<std::string>()); });
  if (kind == "csv") require(!d["path"].get<std::string>().empty(), "data.path", "csv data needs a path");
  if (d["objective"] == "prescribed") {
    require(kind == "spectrum", "data.objective", "prescribed statistics need data.kind = spectrum");
  }

  const Json& in = c["init"];
  require(one_of(in["scheme"].get<std::string>(), {"isotropic", "low-rank", "manifold-adjacent"}),
          "init.scheme", "must be isotropic, low-rank or manifold-adjacent");
  require(in["epsilon"].get<double>() > 0.0, "init.epsilon", "must be > 0");
  require(in["sigma"].get<double>() > 0.0, "init.sigma", "must be > 0");
  require(in["delta"].get<double>() >= 0.0, "init.delta", "must be >= 0");
  require(in["rank"].get<int>() >= 1, "init.rank", "must be >= 1");
  for (const auto& con : in["constraints"]) {
    require(con.is_object() && con.contains("kind") && con["kind"].is_string(),
            "init.constraints", "entries need a string 'kind'");
    for (auto it = con.begin(); it != con.end(); ++it) {
      require(one_of(it.key(), {"kind", "i", "j", "gamma", "coeffs"}),
              "init.constraints." + it.key(), "unknown key");
    }
    require(one_of(con["kind"].get<std::string>(), {"equal", "zero", "proportional", "lindep"}),
            "init.constraints.kind", "must be equal, zero, proportional or lindep");
  }

  const Json& t = c["train"];
  require(t["eta"].get<double>() > 0.0, "train.eta", "must be > 0");
  require(t["time"].get<double>() > 0.0 || t["steps"].get<long>() > 0, "train.time",
          "set a positive time or step count");
  require(t["steps"].get<long>() >= 0, "train.steps", "must be >= 0");
  check("train.scheme", [&] { parse_scheme(t["scheme"].get<std::string>()); });
  require(t["record_every"].get<long>() >= 1, "train.record_every", "must be >= 1");
  require(t["snapshots"].get<int>() >= 1, "train.snapshots", "must be >= 1");

  const Json& a = c["analysis"];
  const std::string wm = a["width_mode"].get<std::string>();
  if (wm != "auto") check("analysis.width_mode", [&] { parse_width_mode(wm); });
  require(a["slope_tol"].get<double>() > 0.0, "analysis.slope_tol", "must be > 0");
  require(a["merge_rel"].get<double>() >= 0.0, "analysis.merge_rel", "must be >= 0");
  require(a["escape_threshold"].get<double>() > 0.0, "analysis.escape_threshold", "must be > 0");
  require(a["order_threshold"].get<double>() > 0.0, "analysis.order_threshold", "must be > 0");

  const Json& s = c["sweep"];
  require(s["seeds"].get<int>() >= 1, "sweep.seeds", "must be >= 1");
  const std::string key = s["key"].get<std::string>();
  if (!key.empty()) {
    require(key.rfind("sweep", 0) != 0, "sweep.key", "cannot sweep the sweep itself");
    Json probe = default_config();
    const Json* slot = find_path(probe, key);
    require(slot != nullptr && !slot->is_object(), "sweep.key", "unknown key '" + key + "'");
    require(!s["values"].empty(), "sweep.values", "a sweep needs values");
    for (const auto& v : s["values"]) {
      Json point = c;
      *find_path(point, key) = v;
      point["sweep"] = default_config()["sweep"];
      Json again = default_config();
      merge(again, point, "");
      validate(again);
    }
  }
}

}  // namespace

Json normalize_config(const Json& user) {
  Json out = default_config();
  merge(out, user, "");
  validate(out);
  return out;
}

void apply_override(Json& config, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(assignment, "override must look like key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  Json value = Json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  Json probe = default_config();
  if (find_path(probe, key) == nullptr) throw ConfigError(key, "unknown key");
  Json* cur = &config;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (dot == std::string::npos) {
      (*cur)[part] = value;
      return;
    }
    cur = &(*cur)[part];
    start = dot + 1;
  }
}

namespace {

struct PresetEntry {
  const char* name;
  const char* json;
};

// Desk-scale configs. Times are training time (steps * eta).
const PresetEntry kPresets[] = {
    {"fig1b", R"({
      "model": {"activation": "linear-fc", "width": 50},
      "data": {"kind": "linear-fc-teacher", "samples": 8192},
      "init": {"epsilon": 1e-6},
      "train": {"eta": 0.01, "time": 30.0}
    })"},
    {"fig1c", R"({
      "model": {"activation": "conv1d-linear", "width": 50},
      "data": {"kind": "linear-conv", "samples": 8192},
      "init": {"epsilon": 1e-6},
      "train": {"eta": 0.01, "time": 30.0},
      "analysis": {"slope_tol": 0.03, "min_len": 1.0}
    })"},
    {"fig1d", R"({
      "model": {"activation": "relu-fc", "width": 50},
      "data": {"kind": "relu-orthogonal", "samples": 2},
      "init": {"epsilon": 1e-6},
      "train": {"eta": 0.01, "time": 60.0}
    })"},
    {"fig1e", R"({
      "model": {"activation": "conv1d-relu", "width": 50},
      "data": {"kind": "relu-conv", "samples": 4},
      "init": {"epsilon": 1e-6},
      "train": {"eta": 0.01, "time": 30.0},
      "analysis": {"slope_tol": 0.03, "min_len": 1.0}
    })"},
    {"fig1f", R"({
      "seed": 1,
      "model": {"activation": "linear-attention", "width": 10, "embed_dim": 2,
                "context_len": 32, "head_rank": 1},
      "data": {"kind": "icl-regression", "samples": 8192},
      "init": {"epsilon": 0.005},
      "train": {"eta": 0.02, "time": 10.0, "snapshots": 200},
      "analysis": {"slope_tol": 0.05, "min_len": 0.3, "width_tol": 0.25}
    })"},
    {"fig1g", R"({
      "model": {"activation": "quadratic-fc", "width": 10},
      "data": {"kind": "quadratic-teacher", "samples": 8192},
      "init": {"epsilon": 0.005},
      "train": {"eta": 0.04, "time": 40.0, "snapshots": 200},
      "analysis": {"slope_tol": 0.02, "min_len": 0.5, "width_tol": 0.25}
    })"},
    {"fig2a-linear", R"({
      "model": {"activation": "linear-fc", "width": 4},
      "data": {"kind": "linear-fc-teacher", "samples": 8192},
      "init": {"epsilon": 1e-30},
      "train": {"eta": 0.01, "time": 140.0, "record_every": 2},
      "sweep": {"key": "model.width", "values": [4, 16, 64], "seeds": 3}
    })"},
    {"fig2a-attention", R"({
      "model": {"activation": "linear-attention", "width": 5, "embed_dim": 3,
                "context_len": 32, "head_rank": 1},
      "data": {"kind": "icl-regression", "samples": 8192,
               "token_scales": [1.0, 0.8408964152537145, 0.7598356856515925]},
      "init": {"epsilon": 0.005},
      "train": {"eta": 0.02, "time": 20.0, "snapshots": 200},
      "analysis": {"slope_tol": 0.05, "min_len": 0.3, "width_tol": 0.25},
      "sweep": {"key": "model.width", "values": [5, 10, 25], "seeds": 5}
    })"},
    {"fig2b-linear", R"({
      "model": {"activation": "linear-fc", "width": 10},
      "data": {"kind": "spectrum", "spectrum_mode": "linear", "spectrum_dim": 3,
               "kappa": 1.0, "samples": 8192},
      "init": {"epsilon": 1e-12},
      "train": {"eta": 0.05, "time": 250.0, "record_every": 2},
      "analysis": {"min_len": 5.0},
      "sweep": {"key": "data.kappa", "values": [1.0, 0.5, 0.0], "seeds": 1}
    })"},
    {"fig2b-quadratic", R"({
      "model": {"activation": "quadratic-fc", "width": 10},
      "data": {"kind": "spectrum", "spectrum_mode": "quadratic", "spectrum_dim": 3,
               "kappa": 1.0, "samples": 8192},
      "init": {"epsilon": 0.005},
      "train": {"eta": 0.04, "time": 1000.0, "record_every": 4},
      "analysis": {"min_len": 5.0, "width_tol": 0.25},
      "sweep": {"key": "data.kappa", "values": [1.0, 0.5, 0.0], "seeds": 1}
    })"},
    {"fig2c-lowrank", R"({
      "model": {"activation": "linear-fc", "width": 50},
      "data": {"kind": "linear-fc-teacher", "samples": 8192},
      "init": {"scheme": "low-rank", "rank": 1, "sigma": 0.1, "delta": 1e-6,
               "epsilon": 1e-6},
      "train": {"eta": 0.01, "time": 40.0},
      "sweep": {"key": "init.rank", "values": [1, 2], "seeds": 1}
    })"},
    {"fig2c-isotropic", R"({
      "model": {"activation": "linear-fc", "width": 50},
      "data": {"kind": "linear-fc-teacher", "samples": 8192},
      "init": {"epsilon": 1e-6},
      "train": {"eta": 0.01, "time": 30.0}
    })"},
    {"fig2d-sweep", R"({
      "model": {"activation": "linear-fc", "width": 50},
      "data": {"kind": "linear-fc-teacher", "samples": 8192},
      "init": {"epsilon": 1e-8},
      "train": {"eta": 0.01, "time": 50.0},
      "sweep": {"key": "init.epsilon", "values": [1e-8, 1e-5, 1e-2], "seeds": 5}
    })"},
    {"fig5a-deep-linear", R"({
      "model": {"activation": "linear-fc", "width": 50,
                "out_map": {"kind": "chain", "widths": [50]}},
      "data": {"kind": "linear-fc-teacher", "samples": 8192},
      "init": {"epsilon": 0.005},
      "train": {"eta": 0.02, "time": 80.0},
      "analysis": {"min_len": 1.0}
    })"},
    {"fig6-linear-skip", R"({
      "model": {"activation": "linear-fc", "width": 50,
                "out_map": {"kind": "skip", "skip_pattern": "none"}},
      "data": {"kind": "linear-fc-teacher", "samples": 8192},
      "init": {"epsilon": 0.01},
      "train": {"eta": 0.02, "time": 300.0, "record_every": 2},
      "analysis": {"min_len": 2.0},
      "sweep": {"key": "model.out_map.skip_pattern",
                "values": ["none", "skip1", "skip2"], "seeds": 1}
    })"},
};

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& p : kPresets) out.emplace_back(p.name);
  return out;
}

Json preset(const std::string& name) {
  for (const auto& p : kPresets) {
    if (name == p.name) {
      Json user = Json::parse(p.json);
      user["name"] = name;
      user["output_dir"] = "out/" + name;
      return normalize_config(user);
    }
  }
  throw ConfigError("preset", "unknown preset '" + name + "'");
}

}  // namespace s2s
