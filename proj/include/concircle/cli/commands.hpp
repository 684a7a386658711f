#pragma once

#include <filesystem>

#include "concircle/cli/config.hpp"
#include "concircle/cli/report.hpp"

namespace concircle::cli {

enum ExitCode : int {
  kExitPass = 0,
  kExitCheckFailed = 1,
  kExitConfigError = 2,
  kExitComputeError = 3,
};

// Each command writes its artifacts into out and returns the check report.
// ConfigError signals a schema problem found late (exit 2); any other
// exception is a computation error (exit 3).
Report check_metric(const ScenarioConfig& config, const std::filesystem::path& out);
Report verify_operators(const ScenarioConfig& config, const std::filesystem::path& out);
Report verify_variational(const ScenarioConfig& config, const std::filesystem::path& out);
Report integrate_trajectories(const ScenarioConfig& config, const std::filesystem::path& out);
Report convergence(const ScenarioConfig& config, const std::filesystem::path& out);

/// The command-line entry point; returns the process exit code.
int run(int argc, const char* const* argv);

}  // namespace concircle::cli
