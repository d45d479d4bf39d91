#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "engsf/harness/config.hpp"

namespace engsf {

inline constexpr const char* kSoftwareName = "engsf";
inline constexpr const char* kSoftwareVersion = "0.1.0";

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;               // empty when ok
  double metric = 0.0;             // KL for ex1, time-averaged RMSE otherwise
  std::string dir;                 // seed directory, relative to the run dir
  std::vector<std::string> files;  // files written inside dir
};

struct RunResult {
  ExperimentConfig config;
  std::filesystem::path out_dir;
  std::filesystem::path manifest_path;
  std::string metric_name;
  std::vector<SeedOutcome> seeds;
  double elapsed_seconds = 0.0;

  bool all_ok() const;
  std::size_t ok_count() const;
  double mean_metric() const;  // over successful seeds; NaN when none
};

// Runs every seed of the experiment cell. A seed that throws is recorded as
// failed and the remaining seeds still run. Writes per-seed CSVs, a
// manifest.json echoing the full config, and the plot files.
RunResult run_experiment(const ExperimentConfig& config);

// Rebuilds the plot files of a completed run from its manifest.json and
// per-seed CSVs; throws MissingRun when the manifest or a referenced output
// is absent. Returns the files written.
std::vector<std::filesystem::path> emit_plot_data(
    const std::filesystem::path& run_dir);

struct SweepResult {
  std::vector<RunResult> cells;
  std::filesystem::path out_dir;
  std::filesystem::path summary_path;
  std::filesystem::path manifest_path;

  bool all_ok() const;
};

// Repeats the cell for each particle count, each into <out_dir>/N=<value>,
// and writes summary.csv (N, mean metric, standard error, seed counts) plus
// sweep_manifest.json. Only parameter "N" is supported.
SweepResult run_sweep(const ExperimentConfig& base, const std::string& param,
                      const std::vector<std::size_t>& values);

}  // namespace engsf
