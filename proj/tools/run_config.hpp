// Run configuration for the command-line tool.
//
// A config file is a JSON object with the sections below; every key is
// optional and command-line flags override file values. Sections that do not
// apply to a command, and unknown keys anywhere, are rejected.
//
//   command     simulate | kernel | pde | skew | verify | compare-fk
//   seed        master seed (unsigned 64-bit)
//   paths       number of Monte Carlo paths
//   preset      coefficient preset, see presets.hpp
//   start       {branch, x, l}, start state at t = 0
//   scheme      {n_freeze, n_fine, horizon, crossing, record_every}
//   grid        {horizon, x_max, l_max, mx, ml, mt, outer}
//               (compare-fk takes its horizon from here)
//   terminal    {name, c}
//   kernel      {variant, convention, s, t, source_branch, source_x, source_l,
//                y_max, ny, ell_max, nl, inner_tol, entry_tol}
//   skew        {alpha, sigma_plus, sigma_minus, drift_plus, drift_minus, y0}
//   verify      {suites, functions, times, eps, negative_control,
//                self_n_freeze, self_doublings, self_paths}
//   tolerances  {z, range_fraction}
//
// A manifest written by a previous run is also accepted; its "config" entry
// is used.
#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "spider/junction.hpp"

namespace spider::cli {

extern const std::vector<std::string> kCommands;

/// Validation failure with a location (file:line:col or a key path).
class ConfigError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

struct RunConfig {
  std::string command;
  nlohmann::json config;  // fully defaulted; echoed into artifacts
  std::filesystem::path output;
  int workers = 0;        // 0: SPIDER_WORKERS or hardware concurrency
};

/// Parses a config file; diagnostics carry line and column.
nlohmann::json load_config_file(const std::filesystem::path& path);

/// Applies `overrides` (JSON pointer -> value) to `file`, fills defaults for
/// `command` and validates keys and types.
nlohmann::json complete_config(const std::string& command, nlohmann::json file,
                               const std::vector<std::pair<std::string, nlohmann::json>>& overrides);

}  // namespace spider::cli
