// Command-line front end: run one experiment cell, sweep a particle count,
// print the grid-Bayes oracle for the static example, or report the version.
// Exit codes: 0 success, 2 configuration error, 3 numerical/runtime failure.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "engsf/core/error.hpp"
#include "engsf/harness/csv.hpp"
#include "engsf/harness/runner.hpp"
#include "engsf/metrics/metrics.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::vector<std::size_t> parse_sweep_values(const std::string& spec,
                                            std::string& param_out) {
  const std::size_t eq = spec.find('=');
  if (eq == std::string::npos) {
    throw engsf::ValidationError("param", "expected NAME=v1,v2,..., got '" +
                                              spec + "'");
  }
  param_out = spec.substr(0, eq);
  std::vector<std::size_t> values;
  std::string rest = spec.substr(eq + 1);
  std::size_t pos = 0;
  while (pos <= rest.size()) {
    const std::size_t comma = rest.find(',', pos);
    const std::string tok = rest.substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (tok.empty()) {
      throw engsf::ValidationError("param", "empty sweep value in '" + spec + "'");
    }
    try {
      values.push_back(std::stoul(tok));
    } catch (const std::exception&) {
      throw engsf::ValidationError("param", "sweep value '" + tok +
                                                "' is not an integer");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return values;
}

void print_run_summary(const engsf::RunResult& result) {
  std::printf("experiment %s, filter %s, N=%zu: %zu/%zu seeds ok",
              result.config.name.c_str(),
              engsf::filter_name(result.config.filter),
              result.config.n_particles, result.ok_count(),
              result.seeds.size());
  if (result.ok_count() > 0) {
    std::printf(", mean %s = %.6g", result.metric_name.c_str(),
                result.mean_metric());
  }
  std::printf(" (%.2fs)\n", result.elapsed_seconds);
  for (const engsf::SeedOutcome& s : result.seeds) {
    if (!s.ok) {
      std::fprintf(stderr, "  seed %llu failed: %s\n",
                   static_cast<unsigned long long>(s.seed), s.error.c_str());
    }
  }
  std::printf("outputs: %s\n", result.out_dir.string().c_str());
}

int run_command(const std::string& config_path, const std::string& out_dir) {
  engsf::ExperimentConfig config = engsf::load_config_file(config_path);
  if (!out_dir.empty()) config.out_dir = out_dir;
  const engsf::RunResult result = engsf::run_experiment(config);
  print_run_summary(result);
  return result.all_ok() ? kExitOk : kExitNumerical;
}

int sweep_command(const std::string& config_path, const std::string& param_spec,
                  const std::string& out_dir) {
  engsf::ExperimentConfig config = engsf::load_config_file(config_path);
  if (!out_dir.empty()) config.out_dir = out_dir;
  std::string param;
  const std::vector<std::size_t> values = parse_sweep_values(param_spec, param);
  const engsf::SweepResult sweep = engsf::run_sweep(config, param, values);
  for (const engsf::RunResult& cell : sweep.cells) print_run_summary(cell);
  std::printf("sweep summary: %s\n", sweep.summary_path.string().c_str());
  return sweep.all_ok() ? kExitOk : kExitNumerical;
}

int oracle_command(const std::string& experiment, std::size_t grid_points,
                   double lo, double hi, double datum, double likelihood_var,
                   const std::string& out_path) {
  if (experiment != "ex1") {
    throw engsf::ValidationError("experiment",
                                 "only the ex1 oracle is grid-computable");
  }
  engsf::ExperimentConfig c = engsf::default_config("ex1");
  c.grid_points = grid_points;
  c.grid_lo = lo;
  c.grid_hi = hi;
  c.datum = datum;
  c.likelihood_var = likelihood_var;
  engsf::validate_config(c);

  const engsf::Vec grid = engsf::uniform_grid(c.grid_lo, c.grid_hi, c.grid_points);
  engsf::GridDensity prior{grid, engsf::Vec(grid.size(), 0.0)};
  const double s2 = 2.0 * c.prior_var;
  const double norm = 0.5 / std::sqrt(3.14159265358979323846 * s2);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double a = grid[i] - c.prior_mode;
    const double b = grid[i] + c.prior_mode;
    prior.values[i] = norm * (std::exp(-a * a / s2) + std::exp(-b * b / s2));
  }
  engsf::normalize_density(prior);
  engsf::Vec lik(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double d = c.datum - grid[i];
    lik[i] = std::exp(-d * d / (2.0 * c.likelihood_var));
  }
  const engsf::GridDensity post = engsf::grid_bayes_posterior(prior, lik);

  auto emit = [&](std::ostream& os) {
    os << "x,prior,likelihood,posterior\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
      os << engsf::format_g17(grid[i]) << ',' << engsf::format_g17(prior.values[i])
         << ',' << engsf::format_g17(lik[i]) << ','
         << engsf::format_g17(post.values[i]) << '\n';
    }
  };
  if (out_path.empty()) {
    emit(std::cout);
  } else {
    std::ofstream out(out_path);
    if (!out) throw engsf::Error("cannot open '" + out_path + "' for writing");
    emit(out);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-sum ensemble filtering experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, param_spec;
  auto* run = app.add_subcommand("run", "run one experiment cell from a config");
  run->add_option("--config", config_path, "INI config file")->required();
  run->add_option("--out", out_dir, "override [experiment] out_dir");

  std::string sweep_config, sweep_out;
  auto* sweep = app.add_subcommand("sweep", "repeat a cell over particle counts");
  sweep->add_option("--config", sweep_config, "INI config file")->required();
  sweep->add_option("--param", param_spec, "sweep spec, e.g. N=100,200,400")
      ->required();
  sweep->add_option("--out", sweep_out, "override [experiment] out_dir");

  std::string oracle_experiment = "ex1", oracle_out;
  std::size_t oracle_grid = 10000;
  double oracle_lo = -4.0, oracle_hi = 4.0, oracle_datum = 0.0,
         oracle_lvar = 0.01;
  auto* oracle = app.add_subcommand("oracle", "print the grid-Bayes posterior");
  oracle->add_option("experiment", oracle_experiment, "experiment (ex1)");
  oracle->add_option("--grid", oracle_grid, "grid point count");
  oracle->add_option("--lo", oracle_lo, "grid lower bound");
  oracle->add_option("--hi", oracle_hi, "grid upper bound");
  oracle->add_option("--datum", oracle_datum, "observed value");
  oracle->add_option("--likelihood-var", oracle_lvar, "likelihood variance");
  oracle->add_option("--out", oracle_out, "write CSV here instead of stdout");

  auto* version = app.add_subcommand("version", "print the software version");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_command(config_path, out_dir);
    if (sweep->parsed()) return sweep_command(sweep_config, param_spec, sweep_out);
    if (oracle->parsed()) {
      return oracle_command(oracle_experiment, oracle_grid, oracle_lo, oracle_hi,
                            oracle_datum, oracle_lvar, oracle_out);
    }
    if (version->parsed()) {
      std::printf("%s %s\n", engsf::kSoftwareName, engsf::kSoftwareVersion);
      return kExitOk;
    }
  } catch (const engsf::ParseError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const engsf::ValidationError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  }
  return kExitOk;
}
