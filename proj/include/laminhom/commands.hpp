#pragma once

#include "laminhom/config.hpp"

#include <exception>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>

namespace laminhom {

enum ExitCode : int {
    kExitOk = 0,
    kExitInvariant = 1,
    kExitSolver = 2,
    kExitConfig = 3,
    kExitInterrupted = 130,
};

/// Parses "powerlaw:E"; ConfigError otherwise.
double parse_synthetic_spec(std::string_view spec);

/// One sample at (run.length, run.index): quantities.csv, corrector.csv and
/// checks.csv. Returns kExitInvariant if a check fails.
int cmd_single(const ExperimentConfig& cfg, const std::filesystem::path& out, std::ostream& report);

/// Ensemble over run.lengths: fluctuations.csv, systematic.csv, rates.csv.
/// With `synthetic_exponent` the solves are replaced by exact power-law data
/// and the systematic error is taken against the exact limit 0.
int cmd_rates(const ExperimentConfig& cfg, const std::filesystem::path& out,
              std::optional<double> synthetic_exponent, std::ostream& report);

/// Total-error table along the balanced schedule: mc.csv, mc_summary.csv.
int cmd_mc(const ExperimentConfig& cfg, const std::filesystem::path& out, std::ostream& report);

/// The sample at (run.length, run.index) as field.csv.
int cmd_dump_field(const ExperimentConfig& cfg, const std::filesystem::path& out, std::ostream& report);

/// Oracle cross-checks and property suites on built-in instances in d = 2
/// and d = 3, using the solver options of `solver`. With `out`, also writes
/// validate.csv. Failing invariants are named on `err`.
int cmd_validate(const SolverOptions& solver, const std::optional<std::filesystem::path>& out,
                 std::ostream& report, std::ostream& err);

/// Runs `body`, mapping exceptions to the exit-code contract and writing one
/// line "error: kind=<Kind> message=<quoted>" to `err`.
int guarded(const std::function<int()>& body, std::ostream& err);

}  // namespace laminhom
