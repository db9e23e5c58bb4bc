#pragma once

// Command-line front end: run configuration, subcommand drivers and the
// built-in verification suite.
//
//   credo <credibility|filter-curve|attack|verify|gamma-sweep>
//         [--config run.json] [--seed N] [--out DIR] [--jobs N]
//
// Exit codes: 0 success, 1 check or convergence failure, 2 usage or I/O error.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "credo/report.hpp"
#include "credo/solver.hpp"

namespace credo {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

struct AttackSettings {
  std::vector<double> epsilons = {0.01, 0.02, 0.03};
  int steps = 100;
  // Per-step size; 2.5 ε / steps when unset.
  std::optional<double> step_size;
  int restarts = 3;
};

struct VerifySettings {
  std::vector<double> t_schedule = {1e2, 1e3, 1e4};
  int map_neighbors = 1000;
  double map_radius = 1e-2;
  int compromise_trials = 1000;
  double compromise_radius = 0.5;
  // Test hook: shifts the quadratic family's λ after solving so the
  // fixed-point check must fail.
  bool corrupt_lambda = false;
};

struct RunConfig {
  std::optional<std::filesystem::path> model;
  std::optional<std::filesystem::path> dataset;
  // filter-curve reads records from here instead of solving inline.
  std::optional<std::filesystem::path> credibility_csv;
  std::filesystem::path out = ".";
  std::uint64_t seed = 0;
  int jobs = 1;

  // Loss description in the model-file format; cross-entropy over the model
  // outputs when absent.
  std::optional<nlohmann::json> loss;
  WeightSpec weights = WeightSpec::Gamma(100.0);
  SolverConfig solver;
  // Clamp solver iterates to the dataset's declared feature range.
  bool clamp_to_feature_range = false;
  double max_nonconverged_fraction = 0.0;

  std::vector<double> alphas = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> coverage_targets;
  std::vector<double> gammas = {100.0, 200.0, 400.0};
  AttackSettings attack;
  VerifySettings verify;

  // Throws DomainError naming the offending field.
  void validate() const;
};

// Unknown keys are rejected so typos do not silently fall back to defaults.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

std::vector<VerifyRow> run_verify_suite(const VerifySettings& settings, std::uint64_t seed, int jobs);

// Entry point used by the executable; args exclude the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace credo
