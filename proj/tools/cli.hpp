#pragma once

// Command-line front end: gen, solve, train and report.

#include "pgnn/experiments.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace pgnn::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,  ///< bad flags, unreadable/invalid case or config
  kTooManyFailures = 3,
  kNonConvergence = 4,
  kDivergedLoss = 5,
};

struct RunConfig {
  std::filesystem::path case_path;
  std::filesystem::path out_dir = "out";
  std::filesystem::path dataset_path;
  /// Second case used by `report --full`.
  std::filesystem::path full_case_path;
  bool full = false;
  /// Demand and dispatch multiplier for `solve`.
  double load_scale = 1.0;
  std::vector<std::string> experiments{"solver", "modeling", "generalization", "outliers",
                                       "recovery"};
  ExperimentConfig experiment;

  void validate() const;
  /// Every effective setting as sorted INI text; hashed into the run id.
  std::string canonical() const;
};

/// Reads an INI file over the defaults. Unknown keys are errors.
RunConfig load_config(const std::filesystem::path& path);
void apply_ini_text(RunConfig& config, const std::string& text);

/// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& data);

/// Runs one command; args exclude the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pgnn::cli
