#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "engsf/core/vec.hpp"
#include "engsf/dynamics/models.hpp"
#include "engsf/filter/baselines.hpp"
#include "engsf/filter/engsf.hpp"

namespace engsf {

enum class FilterKind { Engsf, Enkf, Ensrf, Sir };

const char* filter_name(FilterKind kind);
const char* bandwidth_name(BandwidthRule rule);

// One experiment cell: a named benchmark problem, a filter, a particle count,
// and the seeds to repeat it over. Field defaults depend on the experiment
// (see default_config); the INI parser starts from those and overrides.
struct ExperimentConfig {
  // [experiment]
  std::string name;                  // ex1 | ex2 | ex3 | ex4
  std::vector<std::uint64_t> seeds = {1};
  std::string out_dir;

  // [filter]
  FilterKind filter = FilterKind::Engsf;
  std::size_t n_particles = 100;     // key "N"
  BandwidthRule bandwidth = BandwidthRule::Modified;
  EnkfVariant enkf_variant = EnkfVariant::PerturbedObs;

  // [model] (per experiment; unused fields keep their defaults)
  double dt = 0.01;
  // ex1 static problem + density grids for the 1-D experiments
  std::size_t grid_points = 10000;
  double grid_lo = -4.0;
  double grid_hi = 4.0;
  double datum = 0.0;
  double likelihood_var = 0.01;
  double prior_mode = 1.5;
  double prior_var = 0.01;
  // ex2 double well
  double kappa = 0.7;
  double u0 = 0.8;
  // ex3 three-variable convective model
  Lorenz63Params l63;
  Vec l63_noise_var = {2.0, 12.13, 12.31};
  Vec l63_x0 = {1.508870, -1.531271, 25.46091};
  // ex4 cyclic 40-variable model
  std::size_t l95_dim = 40;
  double forcing = 8.0;
  double l95_noise_var = 25.0;
  double init_mean = 2.0;
  // ensemble initialization spread (all trajectory experiments)
  double init_var = 2.0;

  // [obs]
  std::size_t obs_interval = 50;
  double obs_noise_var = 0.1;

  // [run]
  std::size_t steps = 1000;
  std::size_t truth_spinup = 0;
  std::size_t metric_spinup = 0;     // assimilation cycles excluded from averages
  double density_time = 4.0;         // ex2: when the posterior snapshot is taken
  std::size_t kl_reference = 10000;  // ex2: reference SIR size for kl.csv (0 = skip)
};

// Baseline config for a known experiment name; throws ValidationError for an
// unknown one.
ExperimentConfig default_config(const std::string& experiment);

// Parses INI-style text: [section] headers, key = value lines, '#' or ';'
// comments, blank lines. Keys that do not exist for the experiment are
// ParseErrors carrying the line number; parsed values that violate a range
// are ValidationErrors naming the field.
ExperimentConfig parse_config(const std::string& text);

ExperimentConfig load_config_file(const std::string& path);

// Range checks shared by parse_config and programmatic construction.
void validate_config(const ExperimentConfig& config);

}  // namespace engsf
