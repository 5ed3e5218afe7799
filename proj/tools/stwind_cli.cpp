#include "stwind/stwind.h"

#include <CLI11.hpp>

#include <cstdio>
#include <string>

namespace {

void report_failure() { std::fprintf(stderr, "error %s: %s\n", stw_last_error_code(), stw_last_error()); }

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gridded wind speed and power potential from station networks"};
  app.require_subcommand(1, 1);

  std::string config_path, seed, format, stage_dir;
  int threads = 0;
  app.add_option("--config", config_path, "Config file of section.key = value lines");
  app.add_option("--seed", seed, "Master seed (overrides run.seed)");
  app.add_option("--threads", threads, "Worker threads (overrides run.threads)")->check(CLI::Range(1, 1024));
  app.add_option("--format", format, "Gridded output format")->check(CLI::IsMember({"ascii-grid", "csv"}));
  app.add_option("--stage-dir", stage_dir, "Directory shared between stages (default paths.output)");

  const char* stages[] = {"synth", "clean", "features", "fit", "predict", "power", "site", "benchmark"};
  for (const char* s : stages) app.add_subcommand(s, std::string("run the ") + s + " stage");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error E_CONFIG: %s\n", e.what());
    return STW_ERR_CONFIG;
  }
  const std::string stage = app.get_subcommands().front()->get_name();

  stw_config* cfg = nullptr;
  stw_status st = config_path.empty() ? stw_config_new(&cfg) : stw_config_load(config_path.c_str(), &cfg);
  if (st != STW_OK) {
    report_failure();
    return st;
  }

  const auto finish = [&](stw_status s) {
    if (s != STW_OK) report_failure();
    stw_config_free(cfg);
    return static_cast<int>(s);
  };
  if (!seed.empty() && (st = stw_config_set(cfg, "run.seed", seed.c_str())) != STW_OK) return finish(st);
  if (threads > 0 && (st = stw_config_set(cfg, "run.threads", std::to_string(threads).c_str())) != STW_OK)
    return finish(st);
  if (!format.empty() && (st = stw_config_set(cfg, "output.format", format.c_str())) != STW_OK) return finish(st);
  if (stage_dir.empty()) {
    char buf[4096];
    if ((st = stw_config_get_output(cfg, buf, sizeof buf)) != STW_OK) return finish(st);
    stage_dir = buf;
  }
  int n = 1;
  stw_config_get_threads(cfg, &n);
  if ((st = stw_set_threads(n)) != STW_OK) return finish(st);

  char summary[2048];
  st = stw_run_stage(cfg, stage.c_str(), stage_dir.c_str(), summary, sizeof summary);
  if (st == STW_OK) std::printf("%s\n", summary);
  return finish(st);
}
