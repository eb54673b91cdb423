// Command-line front end; talks to the library only through the C API.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "s2s/c_api.h"

namespace {

using Json = nlohmann::ordered_json;

int fail(s2s_status status) {
  Json err = {{"error", {{"status", s2s_status_name(status)},
                         {"message", s2s_last_error()}}}};
  const std::string key = s2s_last_error_key();
  if (!key.empty()) err["error"]["key"] = key;
  std::cerr << err.dump(2) << "\n";
  return status == S2S_ERR_CONFIG || status == S2S_ERR_INVALID ? 2 : 3;
}

std::string take(char* s) {
  std::string out = s ? s : "";
  s2s_free_string(s);
  return out;
}

int run_json(const std::string& config, bool quiet) {
  char* summary = nullptr;
  const s2s_status st = s2s_run_config(config.c_str(), &summary);
  if (st != S2S_OK) return fail(st);
  const std::string text = take(summary);
  if (!quiet) std::cout << text << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"saddle-to-saddle gradient-flow laboratory"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "do not print the summary");

  auto* run = app.add_subcommand("run", "run an experiment config (JSON file)");
  std::string config_path;
  std::vector<std::string> run_sets;
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--set", run_sets, "override key=value (dotted keys)");

  auto* pre = app.add_subcommand("preset", "run a named preset");
  std::string preset_name;
  std::string out_dir;
  std::vector<std::string> sets;
  bool dump_only = false;
  pre->add_option("name", preset_name, "preset name")->required();
  pre->add_option("--out", out_dir, "output directory");
  pre->add_option("--set", sets, "override key=value (dotted keys)");
  pre->add_flag("--print-config", dump_only, "print the resolved config and exit");

  app.add_subcommand("list-presets", "list preset names");

  CLI11_PARSE(app, argc, argv);

  auto apply = [](std::string config, const std::vector<std::string>& assignments,
                  std::string& result) -> s2s_status {
    for (const auto& a : assignments) {
      char* next = nullptr;
      const s2s_status st = s2s_apply_override(config.c_str(), a.c_str(), &next);
      if (st != S2S_OK) return st;
      config = take(next);
    }
    result = config;
    return S2S_OK;
  };

  if (app.got_subcommand("list-presets")) {
    for (int i = 0; i < s2s_preset_count(); ++i) std::cout << s2s_preset_name(i) << "\n";
    return 0;
  }

  if (app.got_subcommand("run")) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << Json{{"error", {{"status", "io"}, {"message", "cannot open " + config_path}}}}.dump(2)
                << "\n";
      return 3;
    }
    std::stringstream buf;
    buf << in.rdbuf();
    std::string config;
    const s2s_status st = apply(buf.str(), run_sets, config);
    if (st != S2S_OK) return fail(st);
    return run_json(config, quiet);
  }

  char* cfg = nullptr;
  s2s_status st = s2s_preset_config(preset_name.c_str(), &cfg);
  if (st != S2S_OK) return fail(st);
  std::string config = take(cfg);
  std::vector<std::string> all = sets;
  if (!out_dir.empty()) all.push_back("output_dir=\"" + out_dir + "\"");
  st = apply(config, all, config);
  if (st != S2S_OK) return fail(st);
  if (dump_only) {
    char* norm = nullptr;
    st = s2s_normalize_config(config.c_str(), &norm);
    if (st != S2S_OK) return fail(st);
    std::cout << take(norm) << "\n";
    return 0;
  }
  return run_json(config, quiet);
}
