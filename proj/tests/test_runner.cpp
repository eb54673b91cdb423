#include <doctest.h>

#include <filesystem>

#include "s2s/runner.hpp"

using namespace s2s;
namespace fs = std::filesystem;

namespace {

std::string error_key(const Json& cfg) {
  try {
    normalize_config(cfg);
  } catch (const ConfigError& e) {
    return e.key;
  }
  return "";
}

// fig1b shrunk to a sub-second run.
Json tiny_config() {
  Json c = preset("fig1b");
  c["model"]["width"] = 4;
  c["data"]["samples"] = 256;
  c["init"]["epsilon"] = 1e-3;
  c["train"]["time"] = 3.0;
  c["train"]["snapshots"] = 5;
  return c;
}

}  // namespace

TEST_CASE("config validation names the offending key") {
  CHECK(error_key(Json{{"model", {{"bogus", 1}}}}) == "model.bogus");
  CHECK(error_key(Json{{"nope", 1}}) == "nope");
  CHECK(error_key(Json{{"model", {{"activation", "bogus-fc"}}}}) == "model.activation");
  CHECK(error_key(Json{{"train", {{"eta", "fast"}}}}) == "train.eta");
  CHECK(error_key(Json{{"train", {{"eta", -1.0}}}}) == "train.eta");
  CHECK(error_key(Json{{"data", {{"token_scales", {1.0, 0.0}}}}}) == "data.token_scales");
  CHECK(error_key(Json{{"analysis", {{"merge_rel", -0.1}}}}) == "analysis.merge_rel");
  CHECK(error_key(Json::object()).empty());
}

TEST_CASE("overrides") {
  Json c = default_config();
  apply_override(c, "model.width=7");
  apply_override(c, "model.activation=relu-fc");
  apply_override(c, "init.epsilon=1e-3");
  CHECK(c["model"]["width"] == 7);
  CHECK(c["model"]["activation"] == "relu-fc");
  CHECK(c["init"]["epsilon"].get<double>() == 1e-3);
  CHECK_THROWS_AS(apply_override(c, "model.nothing=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "no-equals-sign"), ConfigError);
}

TEST_CASE("presets") {
  const auto names = preset_names();
  CHECK(names.size() == 15);
  for (const auto& n : names) {
    CAPTURE(n);
    CHECK_NOTHROW(normalize_config(preset(n)));
  }
  const Json b = preset("fig1b");
  CHECK(b["model"]["activation"] == "linear-fc");
  CHECK(b["model"]["width"] == 50);
  CHECK(b["init"]["epsilon"].get<double>() == 1e-6);
  CHECK(b["train"]["eta"].get<double>() == 0.01);
  CHECK(b["data"]["samples"] == 8192);
  CHECK(b["data"]["kind"] == "linear-fc-teacher");

  const Json g = preset("fig1g");
  CHECK(g["model"]["activation"] == "quadratic-fc");
  CHECK(g["model"]["width"] == 10);
  CHECK(g["init"]["epsilon"].get<double>() == 0.005);
  CHECK(g["train"]["eta"].get<double>() == 0.04);
  CHECK(g["data"]["kind"] == "quadratic-teacher");

  const Json a = preset("fig2a-attention");
  CHECK(a["sweep"]["key"] == "model.width");
  CHECK(a["sweep"]["values"] == Json::array({5, 10, 25}));

  CHECK_THROWS_AS(preset("fig9z"), ConfigError);
}

TEST_CASE("identical configs give identical summaries") {
  const Json c = tiny_config();
  const Json a = run_point(normalize_config(c), "");
  const Json b = run_point(normalize_config(c), "");
  CHECK(a.dump() == b.dump());
  Json other = c;
  other["seed"] = 1;
  CHECK(run_point(normalize_config(other), "").dump() != a.dump());
}

TEST_CASE("artifact bundle") {
  const fs::path dir = fs::temp_directory_path() / "s2s_runner_test";
  fs::remove_all(dir);
  Json c = tiny_config();
  c["output_dir"] = dir.string();
  const RunOutcome out = run_experiment(c);
  for (const char* f : {"trajectory.csv", "plateaus.json", "predictions.json", "summary.json",
                        "config.json"}) {
    CAPTURE(f);
    CHECK(fs::exists(dir / f));
  }
  int snaps = 0;
  for (const auto& e : fs::directory_iterator(dir / "snapshots")) snaps += e.is_regular_file();
  CHECK(snaps >= 5);
  CHECK(out.summary.contains("plateau_widths"));
  CHECK(out.summary["final_loss"].get<double>() < out.summary["initial_loss"].get<double>());
  fs::remove_all(dir);
}

TEST_CASE("sweeps aggregate per value") {
  const fs::path dir = fs::temp_directory_path() / "s2s_sweep_test";
  fs::remove_all(dir);
  Json c = tiny_config();
  c["output_dir"] = dir.string();
  c["analysis"]["theory"] = false;
  c["sweep"]["key"] = "model.width";
  c["sweep"]["values"] = {2, 3};
  c["sweep"]["seeds"] = 2;
  const RunOutcome out = run_experiment(c);
  REQUIRE(out.summary.contains("aggregate"));
  CHECK(out.summary["aggregate"].size() == 2);
  CHECK(fs::exists(dir / "width=2" / "seed_1" / "summary.json"));
  CHECK(fs::exists(dir / "width=3" / "seed_0" / "summary.json"));
  fs::remove_all(dir);
}

TEST_CASE("quadratic runs compare the predicted and observed first unit") {
  const Json s = run_point(preset("fig1g"), "");
  REQUIRE(s.contains("order_match"));
  CHECK(s["predicted_first_unit"] == s["observed_first_unit"]);
  CHECK(s["order_match"] == true);
  CHECK(s["observed_first_time"].get<double>() > 0.0);
  // Linear runs carry no unit ranking.
  CHECK_FALSE(run_point(normalize_config(tiny_config()), "").contains("order_match"));
}
