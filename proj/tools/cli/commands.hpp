#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "dforge/simulate.hpp"

namespace dforge::cli {

struct RunOptions {
  std::optional<std::uint64_t> seed;  // overrides the config seed
  std::optional<double> tol;          // overrides solver.tol
  int threads = 0;
  bool validate_only = false;
};

struct McRow {
  std::string name;
  McReport report;
};

struct RunReport {
  json report;  // machine-readable; no timings, so identical inputs give identical bytes
  std::vector<McRow> mc;
  std::vector<std::string> warnings;

  std::string json_text() const;
  // Aligned-column summary; `seconds` is the wall-clock time to print.
  std::string text(double seconds) const;
  std::string csv() const;
};

// Validates cfg, applies overrides, runs the task. Throws ConfigError for
// bad input and library errors for solver failures.
RunReport run(const json& cfg, const RunOptions& opt);

}  // namespace dforge::cli
