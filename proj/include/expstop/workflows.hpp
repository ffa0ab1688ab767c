#pragma once

#include <string>
#include <vector>

#include "expstop/config.hpp"

namespace expstop {

/// Process exit codes shared by the C API and the CLI.
enum class Status : int { ok = 0, validation = 1, numerical = 2, config = 3 };

struct CommandResult {
    Status status = Status::ok;
    std::string summary;  ///< JSON object; carries "error" when the command threw
};

/// solve, sweep, validate, train, compare, simulate.
const std::vector<std::string>& command_names();

/// Runs one experiment, writing its outputs under config.output_dir. Never throws.
CommandResult run_command(const std::string& name, const ExperimentConfig& config);

/// Solver output for the config, read from output_dir/cache when present.
ValueField cached_field(const ExperimentConfig& config, bool* cache_hit = nullptr);

}  // namespace expstop
