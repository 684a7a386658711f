#pragma once

// Scenario configuration for the command-line tool. TOML in, fully resolved
// TOML out; every key is validated before anything is computed.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "concircle/integrate.hpp"

namespace concircle::cli {

/// Schema or value error; path names the offending key, e.g. "integration.initial[0].u".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message);
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

struct MetricConfig {
  /// Builtin name, or empty when components are given.
  std::string builtin = "flat";
  std::array<std::string, 3> components;  // g00, g01, g11
  Signature signature = Signature::riemannian;
  int orientation = 1;

  Metric build() const;
};

struct InitialState {
  std::array<double, 2> x{};
  std::array<double, 2> u{};
  std::array<double, 2> w{};

  CurveJet jet() const;
};

struct IntegrationConfig {
  IntegratorConfig integrator;
  std::vector<InitialState> initial;
  bool expect_closed = false;
  double closure_tolerance = 1e-6;
  double drift_tolerance = 1e-6;
  double hamilton_tolerance = 1e-8;
};

struct VerificationConfig {
  std::size_t samples = 50;
  std::uint64_t seed = kDefaultSeed;
  double atol = 1e-9;
  double rtol = 1e-7;
  /// Adds a check on the non-variational source form E_i = u_ddot_i, which must fail.
  bool corrupt_source = false;

  Tolerance tolerance() const { return {atol, rtol}; }
};

struct ConvergenceConfig {
  std::vector<double> steps{4e-3, 2e-3, 1e-3};
  double expected_order = 4.0;
  double order_tolerance = 0.3;
};

struct OutputConfig {
  std::string dir = "out";
  std::string format = "csv";
};

struct ScenarioConfig {
  MetricConfig metric;
  double m = 1.0;
  IntegrationConfig integration;
  VerificationConfig verification;
  ConvergenceConfig convergence;
  OutputConfig output;
};

/// Parses TOML text; source names the document in error messages.
ScenarioConfig parse_config(std::string_view text, std::string_view source = "config");
ScenarioConfig load_config(const std::string& path);
/// The fully resolved configuration as TOML; parse_config(to_toml(c)) == c.
std::string to_toml(const ScenarioConfig& config);

}  // namespace concircle::cli
