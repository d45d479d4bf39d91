#include "engsf/harness/runner.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "engsf/core/error.hpp"
#include "engsf/core/stats.hpp"
#include "engsf/harness/csv.hpp"
#include "engsf/metrics/metrics.hpp"

namespace engsf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string seed_dir_name(std::uint64_t seed) {
  return "seed=" + std::to_string(seed);
}

ObservationOp identity_obs(std::size_t dim, double noise_var) {
  return {Matrix::identity(dim), scaled(Matrix::identity(dim), noise_var)};
}

struct TrajectoryProblem {
  DynamicsModel model;
  ObservationOp obs;
  Vec x0_truth;
  Vec init_mean;
  Matrix init_cov;
};

TrajectoryProblem build_problem(const ExperimentConfig& c) {
  TrajectoryProblem p;
  if (c.name == "ex2") {
    p.model = make_double_well(c.kappa, c.dt);
    p.obs = identity_obs(1, c.obs_noise_var);
    p.x0_truth = {c.u0};
    p.init_mean = {c.u0};
    p.init_cov = Matrix(1, 1);
    p.init_cov(0, 0) = c.init_var;
  } else if (c.name == "ex3") {
    p.model = make_lorenz63(c.l63, c.dt, c.l63_noise_var);
    p.obs = identity_obs(3, c.obs_noise_var);
    p.x0_truth = c.l63_x0;
    p.init_mean = c.l63_x0;
    p.init_cov = scaled(Matrix::identity(3), c.init_var);
  } else if (c.name == "ex4") {
    p.model = make_lorenz95(c.l95_dim, c.forcing, c.dt, c.l95_noise_var);
    p.obs = identity_obs(c.l95_dim, c.obs_noise_var);
    p.x0_truth = Vec(c.l95_dim, c.forcing);
    // One component nudged off the uniform equilibrium to start the cascade.
    const std::size_t bump = c.l95_dim > 19 ? 19 : c.l95_dim / 2;
    p.x0_truth[bump] = 1.001 * c.forcing;
    p.init_mean = Vec(c.l95_dim, c.init_mean);
    p.init_cov = scaled(Matrix::identity(c.l95_dim), c.init_var);
  } else {
    throw Error("build_problem: not a trajectory experiment: " + c.name);
  }
  return p;
}

WeightedEnsemble initial_ensemble(const Vec& mean, const Matrix& cov,
                                  std::size_t n, std::uint64_t seed) {
  RngStream init(seed, "init");
  const Matrix draws = sample_mvn(mean, cov, n, init);
  WeightedEnsemble ens(mean.size(), n);
  for (std::size_t j = 0; j < n; ++j) {
    auto x = ens.particle(j);
    for (std::size_t r = 0; r < mean.size(); ++r) x[r] = draws(r, j);
  }
  return ens;
}

// Two-mode symmetric prior used by the static example.
WeightedEnsemble ex1_prior_ensemble(const ExperimentConfig& c,
                                    std::uint64_t seed) {
  RngStream init(seed, "init");
  WeightedEnsemble ens(1, c.n_particles);
  const double sigma = std::sqrt(c.prior_var);
  for (std::size_t j = 0; j < c.n_particles; ++j) {
    const double mode = init.uniform() < 0.5 ? -c.prior_mode : c.prior_mode;
    ens.particle(j)[0] = mode + sigma * init.normal();
  }
  return ens;
}

GridDensity ex1_prior_density(const ExperimentConfig& c, const Vec& grid) {
  GaussianSumPosterior prior;
  prior.kernels = WeightedEnsemble(1, 2);
  prior.kernels.particle(0)[0] = -c.prior_mode;
  prior.kernels.particle(1)[0] = c.prior_mode;
  prior.shared_cov = Matrix(1, 1);
  prior.shared_cov(0, 0) = c.prior_var;
  GridDensity d = mixture_density_on_grid(prior, grid);
  normalize_density(d);
  return d;
}

Vec ex1_likelihood(const ExperimentConfig& c, const Vec& grid) {
  Vec lik(grid.size());
  const double inv2v = 1.0 / (2.0 * c.likelihood_var);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double d = c.datum - grid[i];
    lik[i] = std::exp(-d * d * inv2v);
  }
  return lik;
}

SeedOutcome run_ex1_seed(const ExperimentConfig& c, std::uint64_t seed,
                         const fs::path& dir) {
  SeedOutcome out;
  out.seed = seed;
  out.dir = seed_dir_name(seed);

  const Vec grid = uniform_grid(c.grid_lo, c.grid_hi, c.grid_points);
  GridDensity prior = ex1_prior_density(c, grid);
  const Vec lik = ex1_likelihood(c, grid);
  const GridDensity oracle = grid_bayes_posterior(prior, lik);

  const ObservationOp obs = identity_obs(1, c.likelihood_var);
  const Vec y = {c.datum};
  const WeightedEnsemble ens = ex1_prior_ensemble(c, seed);

  GridDensity estimate;
  Vec est_mean;
  Matrix est_cov;
  switch (c.filter) {
    case FilterKind::Engsf: {
      RngStream rng(seed, "engsf");
      const EngsfResult r = engsf_assimilate(ens, obs, y, c.bandwidth, rng);
      estimate = mixture_density_on_grid(r.posterior, grid);
      const Matrix covs[] = {r.posterior.shared_cov};
      const Moments mm = mixture_moments(r.posterior.kernels, covs);
      est_mean = mm.mean;
      est_cov = mm.cov;
      break;
    }
    case FilterKind::Enkf: {
      RngStream rng(seed, "obs-perturb");
      const WeightedEnsemble analysis = enkf_update(ens, obs, y, c.enkf_variant, rng);
      // A Kalman-type filter characterizes its posterior by the first two
      // moments, so that Gaussian is the density it is scored on.
      const Moments mm = ensemble_moments(analysis);
      estimate = gaussian_density_on_grid(grid, mm.mean[0], mm.cov(0, 0));
      est_mean = mm.mean;
      est_cov = mm.cov;
      break;
    }
    case FilterKind::Ensrf: {
      const WeightedEnsemble analysis = ensrf_update(ens, obs, y);
      const Moments mm = ensemble_moments(analysis);
      estimate = gaussian_density_on_grid(grid, mm.mean[0], mm.cov(0, 0));
      est_mean = mm.mean;
      est_cov = mm.cov;
      break;
    }
    case FilterKind::Sir: {
      const WeightedEnsemble weighted = sir_reweight(ens, obs, y);
      estimate = kde_density_on_grid(weighted, grid, c.bandwidth);
      const Moments mm = ensemble_moments(weighted);
      est_mean = mm.mean;
      est_cov = mm.cov;
      break;
    }
  }
  normalize_density(estimate);
  const double kl = kl_divergence(oracle, estimate);

  const Vec tw = trapezoid_weights(grid);
  double oracle_mean = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    oracle_mean += tw[i] * grid[i] * oracle.values[i];
  }

  {
    CsvWriter w(dir / "truth.csv", {"x", "prior", "likelihood", "posterior"});
    for (std::size_t i = 0; i < grid.size(); ++i) {
      w.row({grid[i], prior.values[i], lik[i], oracle.values[i]});
    }
  }
  {
    CsvWriter w(dir / "estimate.csv", {"mean", "var"});
    w.row({est_mean[0], est_cov(0, 0)});
  }
  {
    CsvWriter w(dir / "rmse.csv", {"rmse"});
    w.row({std::abs(est_mean[0] - oracle_mean)});
  }
  {
    CsvWriter w(dir / "posterior_grid.csv", {"x", "density"});
    for (std::size_t i = 0; i < grid.size(); ++i) {
      w.row({grid[i], estimate.values[i]});
    }
  }
  {
    CsvWriter w(dir / "kl.csv", {"kl"});
    w.row({kl});
  }
  out.files = {"truth.csv", "estimate.csv", "rmse.csv", "posterior_grid.csv",
               "kl.csv"};
  out.metric = kl;
  out.ok = true;
  return out;
}

// Reference posterior for the double-well snapshot: a large bootstrap
// particle filter run on the same truth.
GridDensity ex2_reference_density(const ExperimentConfig& c,
                                  const TrajectoryProblem& p,
                                  const TrajectoryRecord& truth,
                                  std::size_t snapshot_cycle, const Vec& grid,
                                  std::uint64_t seed) {
  // Distinct init label so the reference draws are independent of the
  // filter's initial ensemble.
  RngStream init(seed, "reference-sir/init");
  const Matrix draws = sample_mvn(p.init_mean, p.init_cov, c.kl_reference, init);
  WeightedEnsemble ens(1, c.kl_reference);
  for (std::size_t j = 0; j < c.kl_reference; ++j) {
    ens.particle(j)[0] = draws(0, j);
  }
  for (std::size_t k = 0; k <= snapshot_cycle; ++k) {
    RngStream root(seed, "reference-sir/cycle=" + std::to_string(k));
    RngStream fc = root.sub("forecast");
    ens = forecast(std::move(ens), p.model, c.obs_interval, fc);
    ens = sir_reweight(ens, p.obs, truth.observations[k]);
    if (k == snapshot_cycle) break;
    RngStream rs = root.sub("resample");
    ens = resample(ens, rs);
  }
  GridDensity d = kde_density_on_grid(ens, grid, c.bandwidth);
  normalize_density(d);
  return d;
}

SeedOutcome run_trajectory_seed(const ExperimentConfig& c, std::uint64_t seed,
                                const fs::path& dir) {
  SeedOutcome out;
  out.seed = seed;
  out.dir = seed_dir_name(seed);

  const TrajectoryProblem p = build_problem(c);
  RngStream truth_rng(seed, "truth");
  const TrajectoryRecord truth =
      simulate_truth(p.model, p.x0_truth, c.steps, c.truth_spinup, p.obs,
                     c.obs_interval, truth_rng);
  const std::size_t cycles = truth.observations.size();

  // Snapshot cycle for the 1-D posterior density (ex2 only): the assimilation
  // time closest to density_time.
  std::size_t snapshot = 0;
  bool want_snapshot = c.name == "ex2";
  if (want_snapshot) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cycles; ++k) {
      const double t = truth.times[truth.obs_steps[k]];
      if (std::abs(t - c.density_time) < best) {
        best = std::abs(t - c.density_time);
        snapshot = k;
      }
    }
  }

  WeightedEnsemble ens =
      initial_ensemble(p.init_mean, p.init_cov, c.n_particles, seed);
  std::vector<Vec> means;
  means.reserve(cycles);
  Vec ess_series, degenerate_series;
  GridDensity snapshot_density;
  Vec grid;
  if (want_snapshot) grid = uniform_grid(c.grid_lo, c.grid_hi, c.grid_points);

  // The reported error is tracked at every model step, not only at analysis
  // times: between sparse observations the forecast drifts, and that drift is
  // most of the error a filter actually leaves behind.
  MetricSeries rmse;
  rmse.times.reserve(cycles * c.obs_interval);
  rmse.values.reserve(cycles * c.obs_interval);
  const auto record = [&](std::size_t step, const Vec& mean) {
    double sq = 0.0;
    for (std::size_t r = 0; r < mean.size(); ++r) {
      const double d = mean[r] - truth.states(step, r);
      sq += d * d;
    }
    rmse.times.push_back(truth.times[step]);
    rmse.values.push_back(std::sqrt(sq / static_cast<double>(mean.size())));
  };
  // Equivalent to forecast(ens, model, interval, fc) — same per-particle
  // sub-streams, same draws — but steps the particles in lockstep so the
  // ensemble mean exists at every intermediate model step.
  const auto tracked_forecast = [&](RngStream& fc, std::size_t cycle) {
    const std::size_t n = ens.size();
    std::vector<RngStream> particle_rng;
    particle_rng.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
      particle_rng.push_back(fc.sub("particle=" + std::to_string(j)));
    }
    for (std::size_t s = 0; s < c.obs_interval; ++s) {
      for (std::size_t j = 0; j < n; ++j) {
        auto x = ens.particle(j);
        p.model.step(x, particle_rng[j]);
      }
      if (s + 1 < c.obs_interval) {
        record(cycle * c.obs_interval + s + 1, weighted_mean(ens));
      }
    }
  };

  const std::string froot = filter_name(c.filter);
  for (std::size_t k = 0; k < cycles; ++k) {
    const Vec& y = truth.observations[k];
    RngStream root(seed, froot + "/cycle=" + std::to_string(k));
    RngStream fc = root.sub("forecast");
    tracked_forecast(fc, k);
    switch (c.filter) {
      case FilterKind::Engsf: {
        RngStream as = root.sub("assimilate");
        EngsfResult r = engsf_assimilate(ens, p.obs, y, c.bandwidth, as);
        means.push_back(weighted_mean(r.posterior.kernels));
        ess_series.push_back(r.ess);
        degenerate_series.push_back(r.degenerate ? 1.0 : 0.0);
        if (want_snapshot && k == snapshot) {
          snapshot_density = mixture_density_on_grid(r.posterior, grid);
        }
        ens = std::move(r.ensemble);
        break;
      }
      case FilterKind::Enkf: {
        RngStream op = root.sub("obs-perturb");
        ens = enkf_update(ens, p.obs, y, c.enkf_variant, op);
        means.push_back(weighted_mean(ens));
        if (want_snapshot && k == snapshot) {
          snapshot_density = kde_density_on_grid(ens, grid, c.bandwidth);
        }
        break;
      }
      case FilterKind::Ensrf: {
        ens = ensrf_update(ens, p.obs, y);
        means.push_back(weighted_mean(ens));
        if (want_snapshot && k == snapshot) {
          snapshot_density = kde_density_on_grid(ens, grid, c.bandwidth);
        }
        break;
      }
      case FilterKind::Sir: {
        WeightedEnsemble weighted = sir_reweight(ens, p.obs, y);
        means.push_back(weighted_mean(weighted));
        if (want_snapshot && k == snapshot) {
          snapshot_density = kde_density_on_grid(weighted, grid, c.bandwidth);
        }
        RngStream rs = root.sub("resample");
        ens = resample(weighted, rs);
        break;
      }
    }
    record((k + 1) * c.obs_interval, means.back());
  }

  out.metric = time_averaged(rmse, c.metric_spinup * c.obs_interval);

  const std::size_t m = p.model.dim;
  {
    std::vector<std::string> header = {"time"};
    for (std::size_t r = 0; r < m; ++r) header.push_back("x" + std::to_string(r));
    CsvWriter w(dir / "truth.csv", header);
    Vec row(m + 1);
    for (std::size_t k = 0; k < truth.times.size(); ++k) {
      row[0] = truth.times[k];
      for (std::size_t r = 0; r < m; ++r) row[r + 1] = truth.states(k, r);
      w.row(row);
    }
  }
  {
    std::vector<std::string> header = {"time"};
    for (std::size_t r = 0; r < m; ++r) header.push_back("x" + std::to_string(r));
    CsvWriter w(dir / "estimate.csv", header);
    Vec row(m + 1);
    for (std::size_t k = 0; k < cycles; ++k) {
      row[0] = truth.times[truth.obs_steps[k]];
      for (std::size_t r = 0; r < m; ++r) row[r + 1] = means[k][r];
      w.row(row);
    }
  }
  {
    CsvWriter w(dir / "rmse.csv", {"time", "rmse"});
    for (std::size_t k = 0; k < rmse.times.size(); ++k) {
      w.row({rmse.times[k], rmse.values[k]});
    }
  }
  out.files = {"truth.csv", "estimate.csv", "rmse.csv"};

  if (c.filter == FilterKind::Engsf) {
    CsvWriter w(dir / "diagnostics.csv", {"time", "ess", "gaussian_resample"});
    for (std::size_t k = 0; k < cycles; ++k) {
      w.row({truth.times[truth.obs_steps[k]], ess_series[k],
             degenerate_series[k]});
    }
    out.files.push_back("diagnostics.csv");
  }

  if (want_snapshot) {
    normalize_density(snapshot_density);
    const double snapshot_time = truth.times[truth.obs_steps[snapshot]];
    if (c.kl_reference > 0) {
      const GridDensity reference =
          ex2_reference_density(c, p, truth, snapshot, grid, seed);
      CsvWriter w(dir / "posterior_grid.csv", {"x", "density", "reference"});
      for (std::size_t i = 0; i < grid.size(); ++i) {
        w.row({grid[i], snapshot_density.values[i], reference.values[i]});
      }
      CsvWriter wk(dir / "kl.csv", {"time", "kl"});
      wk.row({snapshot_time, kl_divergence(reference, snapshot_density)});
      out.files.push_back("posterior_grid.csv");
      out.files.push_back("kl.csv");
    } else {
      CsvWriter w(dir / "posterior_grid.csv", {"x", "density"});
      for (std::size_t i = 0; i < grid.size(); ++i) {
        w.row({grid[i], snapshot_density.values[i]});
      }
      out.files.push_back("posterior_grid.csv");
    }
  }

  out.ok = true;
  return out;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = {{"name", c.name}, {"seeds", c.seeds}, {"out_dir", c.out_dir}};
  j["filter"] = {{"kind", filter_name(c.filter)},
                 {"N", c.n_particles},
                 {"bandwidth", bandwidth_name(c.bandwidth)},
                 {"enkf_variant", c.enkf_variant == EnkfVariant::PerturbedObs
                                      ? "perturbed-obs"
                                      : "split-mean"}};
  json model;
  if (c.name == "ex1" || c.name == "ex2") {
    model["grid_points"] = c.grid_points;
    model["grid_lo"] = c.grid_lo;
    model["grid_hi"] = c.grid_hi;
  }
  if (c.name == "ex1") {
    model["datum"] = c.datum;
    model["likelihood_var"] = c.likelihood_var;
    model["prior_mode"] = c.prior_mode;
    model["prior_var"] = c.prior_var;
  } else {
    model["dt"] = c.dt;
    model["init_var"] = c.init_var;
    if (c.name == "ex2") {
      model["kappa"] = c.kappa;
      model["u0"] = c.u0;
    } else if (c.name == "ex3") {
      model["gamma"] = c.l63.gamma;
      model["rho"] = c.l63.rho;
      model["beta"] = c.l63.beta;
      model["noise_var"] = c.l63_noise_var;
      model["x0"] = c.l63_x0;
    } else {
      model["dim"] = c.l95_dim;
      model["forcing"] = c.forcing;
      model["noise_var"] = c.l95_noise_var;
      model["init_mean"] = c.init_mean;
    }
  }
  j["model"] = model;
  if (c.name != "ex1") {
    j["obs"] = {{"interval", c.obs_interval}, {"noise_var", c.obs_noise_var}};
    json run = {{"steps", c.steps},
                {"truth_spinup", c.truth_spinup},
                {"metric_spinup", c.metric_spinup}};
    if (c.name == "ex2") {
      run["density_time"] = c.density_time;
      run["kl_reference"] = c.kl_reference;
    }
    j["run"] = run;
  }
  return j;
}

void write_manifest(const RunResult& result) {
  json j;
  j["software"] = {{"name", kSoftwareName}, {"version", kSoftwareVersion}};
  j["experiment"] = result.config.name;
  j["filter"] = filter_name(result.config.filter);
  j["metric_name"] = result.metric_name;
  const double mean = result.mean_metric();
  if (std::isnan(mean)) {
    j["mean_metric"] = nullptr;
  } else {
    j["mean_metric"] = mean;
  }
  j["elapsed_seconds"] = result.elapsed_seconds;
  j["config"] = config_to_json(result.config);
  json seeds = json::array();
  for (const SeedOutcome& s : result.seeds) {
    seeds.push_back({{"seed", s.seed},
                     {"ok", s.ok},
                     {"error", s.error},
                     {"metric", s.ok ? json(s.metric) : json(nullptr)},
                     {"dir", s.dir},
                     {"files", s.files}});
  }
  j["seeds"] = seeds;
  std::ofstream out(result.manifest_path);
  if (!out) {
    throw Error("cannot write manifest '" + result.manifest_path.string() + "'");
  }
  out << j.dump(2) << '\n';
}

}  // namespace

bool RunResult::all_ok() const {
  for (const SeedOutcome& s : seeds) {
    if (!s.ok) return false;
  }
  return !seeds.empty();
}

std::size_t RunResult::ok_count() const {
  std::size_t n = 0;
  for (const SeedOutcome& s : seeds) n += s.ok ? 1 : 0;
  return n;
}

double RunResult::mean_metric() const {
  double total = 0.0;
  std::size_t n = 0;
  for (const SeedOutcome& s : seeds) {
    if (s.ok) {
      total += s.metric;
      ++n;
    }
  }
  return n ? total / static_cast<double>(n) : kNan;
}

RunResult run_experiment(const ExperimentConfig& config) {
  validate_config(config);
  const auto t0 = std::chrono::steady_clock::now();

  RunResult result;
  result.config = config;
  result.out_dir = fs::path(config.out_dir);
  result.manifest_path = result.out_dir / "manifest.json";
  result.metric_name = config.name == "ex1" ? "kl" : "time_avg_rmse";
  fs::create_directories(result.out_dir);

  for (std::uint64_t seed : config.seeds) {
    const fs::path dir = result.out_dir / seed_dir_name(seed);
    fs::create_directories(dir);
    SeedOutcome outcome;
    try {
      outcome = config.name == "ex1" ? run_ex1_seed(config, seed, dir)
                                     : run_trajectory_seed(config, seed, dir);
    } catch (const std::exception& e) {
      outcome = SeedOutcome{};
      outcome.seed = seed;
      outcome.ok = false;
      outcome.error = e.what();
      outcome.metric = kNan;
      outcome.dir = seed_dir_name(seed);
    }
    result.seeds.push_back(std::move(outcome));
  }

  result.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(result);
  emit_plot_data(result.out_dir);
  return result;
}

std::vector<fs::path> emit_plot_data(const fs::path& run_dir) {
  const fs::path manifest_path = run_dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    throw MissingRun("no manifest.json under '" + run_dir.string() + "'");
  }
  json manifest;
  {
    std::ifstream in(manifest_path);
    try {
      in >> manifest;
    } catch (const std::exception& e) {
      throw MissingRun("unreadable manifest '" + manifest_path.string() +
                       "': " + e.what());
    }
  }
  const std::string experiment = manifest.at("experiment").get<std::string>();

  struct SeedRef {
    std::uint64_t seed;
    fs::path dir;
  };
  std::vector<SeedRef> ok_seeds;
  for (const json& s : manifest.at("seeds")) {
    if (s.at("ok").get<bool>()) {
      ok_seeds.push_back(
          {s.at("seed").get<std::uint64_t>(),
           run_dir / s.at("dir").get<std::string>()});
    }
  }

  auto require_file = [](const fs::path& p) {
    if (!fs::exists(p)) {
      throw MissingRun("expected run output '" + p.string() + "' is missing");
    }
  };

  std::vector<fs::path> written;
  if (experiment == "ex1" || experiment == "ex2") {
    // Density overlay: shared grid column + one estimate column per seed.
    std::vector<std::string> header = {"x"};
    std::vector<Vec> columns;
    Vec x;
    if (experiment == "ex1" && !ok_seeds.empty()) {
      require_file(ok_seeds.front().dir / "truth.csv");
      const CsvTable truth = read_csv(ok_seeds.front().dir / "truth.csv");
      header.insert(header.end(), {"prior", "likelihood", "posterior"});
      columns.resize(3);
      for (const Vec& row : truth.rows) {
        x.push_back(row[truth.column("x")]);
        columns[0].push_back(row[truth.column("prior")]);
        columns[1].push_back(row[truth.column("likelihood")]);
        columns[2].push_back(row[truth.column("posterior")]);
      }
    }
    for (const SeedRef& s : ok_seeds) {
      require_file(s.dir / "posterior_grid.csv");
      const CsvTable t = read_csv(s.dir / "posterior_grid.csv");
      if (x.empty()) {
        for (const Vec& row : t.rows) x.push_back(row[t.column("x")]);
      }
      if (t.rows.size() != x.size()) {
        throw MissingRun("posterior grids disagree across seeds");
      }
      header.push_back("estimate_" + std::to_string(s.seed));
      Vec col;
      for (const Vec& row : t.rows) col.push_back(row[t.column("density")]);
      columns.push_back(std::move(col));
      if (experiment == "ex2") {
        bool has_ref = false;
        for (const std::string& h : t.header) has_ref |= h == "reference";
        if (has_ref) {
          header.push_back("reference_" + std::to_string(s.seed));
          Vec ref;
          for (const Vec& row : t.rows) ref.push_back(row[t.column("reference")]);
          columns.push_back(std::move(ref));
        }
      }
    }
    if (!x.empty()) {
      const fs::path path = run_dir / "plot_densities.csv";
      CsvWriter w(path, header);
      Vec row(header.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        row[0] = x[i];
        for (std::size_t cidx = 0; cidx < columns.size(); ++cidx) {
          row[cidx + 1] = columns[cidx][i];
        }
        w.row(row);
      }
      written.push_back(path);
    }
  }

  if (experiment != "ex1") {
    const fs::path path = run_dir / "plot_error_vs_time.csv";
    CsvWriter w(path, {"seed", "time", "rmse"});
    for (const SeedRef& s : ok_seeds) {
      require_file(s.dir / "rmse.csv");
      const CsvTable t = read_csv(s.dir / "rmse.csv");
      for (const Vec& row : t.rows) {
        w.row({static_cast<double>(s.seed), row[t.column("time")],
               row[t.column("rmse")]});
      }
    }
    written.push_back(path);
  }
  return written;
}

bool SweepResult::all_ok() const {
  for (const RunResult& r : cells) {
    if (!r.all_ok()) return false;
  }
  return !cells.empty();
}

SweepResult run_sweep(const ExperimentConfig& base, const std::string& param,
                      const std::vector<std::size_t>& values) {
  if (param != "N") {
    throw ValidationError("param", "only sweeps over N are supported, got '" +
                                       param + "'");
  }
  if (values.empty()) {
    throw ValidationError("param", "sweep needs at least one value");
  }
  SweepResult sweep;
  sweep.out_dir = fs::path(base.out_dir);
  fs::create_directories(sweep.out_dir);
  for (std::size_t v : values) {
    ExperimentConfig cell = base;
    cell.n_particles = v;
    cell.out_dir = (sweep.out_dir / ("N=" + std::to_string(v))).string();
    sweep.cells.push_back(run_experiment(cell));
  }

  sweep.summary_path = sweep.out_dir / "summary.csv";
  {
    CsvWriter w(sweep.summary_path,
                {"N", "mean_metric", "stderr", "ok_seeds", "total_seeds"});
    for (const RunResult& cell : sweep.cells) {
      double mean = cell.mean_metric();
      double se = kNan;
      const std::size_t ok = cell.ok_count();
      if (ok >= 2) {
        double ss = 0.0;
        for (const SeedOutcome& s : cell.seeds) {
          if (s.ok) ss += (s.metric - mean) * (s.metric - mean);
        }
        se = std::sqrt(ss / static_cast<double>(ok - 1) /
                       static_cast<double>(ok));
      }
      w.row({static_cast<double>(cell.config.n_particles), mean, se,
             static_cast<double>(ok), static_cast<double>(cell.seeds.size())});
    }
  }

  sweep.manifest_path = sweep.out_dir / "sweep_manifest.json";
  {
    json j;
    j["software"] = {{"name", kSoftwareName}, {"version", kSoftwareVersion}};
    j["param"] = param;
    j["values"] = values;
    j["summary"] = "summary.csv";
    json cells = json::array();
    for (const RunResult& cell : sweep.cells) {
      const double mean = cell.mean_metric();
      cells.push_back({{"N", cell.config.n_particles},
                       {"dir", fs::relative(cell.out_dir, sweep.out_dir).string()},
                       {"mean_metric", std::isnan(mean) ? json(nullptr) : json(mean)},
                       {"ok_seeds", cell.ok_count()}});
    }
    j["cells"] = cells;
    std::ofstream out(sweep.manifest_path);
    if (!out) {
      throw Error("cannot write '" + sweep.manifest_path.string() + "'");
    }
    out << j.dump(2) << '\n';
  }
  return sweep;
}

}  // namespace engsf
