#pragma once

#include <ostream>

#include <json.hpp>

#include "run_config.hpp"
#include "spider/io.hpp"

namespace spider::cli {

struct CommandResult {
  int exit_code = 0;
  nlohmann::json verdict;  // copied into the manifest
};

CommandResult run_command(const RunConfig& rc, ArtifactSet& out, std::ostream& log);

}  // namespace spider::cli
