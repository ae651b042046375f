// detector_forge: builds detectors and certificates from a JSON problem
// config. Exit codes: 0 success, 2 bad config, 3 solver failure,
// 4 infeasible certificate.
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cli/commands.hpp"
#include "dforge/errors.hpp"

namespace fs = std::filesystem;
using dforge::cli::json;

namespace {

enum Exit { kOk = 0, kConfig = 2, kSolver = 3, kInfeasible = 4 };

void setup_logging() {
  auto log = spdlog::stderr_color_mt("detector_forge");
  spdlog::set_default_logger(log);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* lv = std::getenv("DETECTOR_FORGE_LOG")) {
    auto level = spdlog::level::from_str(lv);
    // from_str maps unknown names to off
    if (level == spdlog::level::off && std::string(lv) != "off")
      spdlog::warn("DETECTOR_FORGE_LOG='{}' not recognised; using warn", lv);
    else
      spdlog::set_level(level);
  }
}

void write_file(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << s;
  if (!f) throw std::runtime_error("error writing " + p.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimum-risk detectors and certified tests for composite hypotheses"};
  std::string config_path, out_path;
  std::uint64_t seed = 0;
  double tol = 0.0;
  int threads = 0;
  bool validate = false;
  app.add_option("--config", config_path, "problem config (JSON)")->required();
  app.add_option("--out", out_path, "report path (JSON); .txt and .csv siblings are written next to it");
  auto* seed_opt = app.add_option("--seed", seed, "overrides the config seed");
  auto* tol_opt = app.add_option("--tol", tol, "overrides solver.tol");
  app.add_option("--threads", threads, "worker threads (0: hardware concurrency)")->check(CLI::NonNegativeNumber);
  app.add_flag("--validate", validate, "check the config and exit");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }
  setup_logging();

  json cfg;
  {
    std::ifstream f(config_path, std::ios::binary);
    if (!f) {
      spdlog::error("cannot read config {}", config_path);
      return kConfig;
    }
    try {
      cfg = json::parse(f);
    } catch (const json::parse_error& e) {
      spdlog::error("config {}: invalid JSON: {}", config_path, e.what());
      return kConfig;
    }
  }

  dforge::cli::RunOptions opt;
  if (*seed_opt) opt.seed = seed;
  if (*tol_opt) opt.tol = tol;
  opt.threads = threads;
  opt.validate_only = validate;

  const auto t0 = std::chrono::steady_clock::now();
  dforge::cli::RunReport rep;
  try {
    spdlog::info("running task {}", cfg.is_object() ? cfg.value("task", "?") : "?");
    rep = dforge::cli::run(cfg, opt);
  } catch (const dforge::cli::ConfigError& e) {
    spdlog::error("config error at {}", e.what());
    return kConfig;
  } catch (const dforge::Infeasible& e) {
    spdlog::error("infeasible: {}", e.what());
    return kInfeasible;
  } catch (const dforge::InvalidArgument& e) {
    spdlog::error("invalid input: {}", e.what());
    return kConfig;
  } catch (const dforge::InvalidParameter& e) {
    spdlog::error("invalid parameter: {}", e.what());
    return kConfig;
  } catch (const dforge::CapabilityError& e) {
    spdlog::error("unsupported input: {}", e.what());
    return kConfig;
  } catch (const dforge::Error& e) {
    spdlog::error("solver failure: {}", e.what());
    return kSolver;
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return kSolver;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (validate) {
    std::cout << "config valid\n";
    return kOk;
  }
  for (const std::string& w : rep.warnings) spdlog::warn("{}", w);
  spdlog::info("finished in {:.3f} s", secs);

  const std::string text = rep.text(secs);
  if (out_path.empty()) {
    std::cout << rep.json_text();
    std::cerr << text;
    return kOk;
  }
  try {
    fs::path out(out_path);
    write_file(out, rep.json_text());
    fs::path txt = out, csv = out;
    write_file(txt.replace_extension(".txt"), text);
    if (!rep.mc.empty()) write_file(csv.replace_extension(".csv"), rep.csv());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kConfig;
  }
  std::cout << text;
  return kOk;
}
