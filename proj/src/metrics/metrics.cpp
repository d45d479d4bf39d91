#include "engsf/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "engsf/core/error.hpp"
#include "engsf/core/stats.hpp"
#include "engsf/simd/kernels.hpp"

namespace engsf {

namespace {

constexpr double kMassFloor = 1e-8;
constexpr double kDensityFloor = 1e-300;

void require_grid(const Vec& points) {
  if (points.size() < 2) throw Error("grid needs at least 2 points");
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (!(points[i] > points[i - 1])) {
      throw Error("grid points must be strictly increasing");
    }
  }
}

// Adds w * N(.; mu, sigma2) evaluated on the grid. Only the window where the
// kernel is representable is touched: beyond 45 standard deviations exp
// underflows to exactly zero, so skipping changes nothing.
void accumulate_kernel(const Vec& grid, double w, double mu, double sigma2,
                       Vec& values) {
  const double sigma = std::sqrt(sigma2);
  const double norm = w / (sigma * std::sqrt(2.0 * 3.14159265358979323846));
  const double inv2v = 1.0 / (2.0 * sigma2);
  const double reach = 45.0 * sigma;
  const auto first =
      std::lower_bound(grid.begin(), grid.end(), mu - reach) - grid.begin();
  const auto last =
      std::upper_bound(grid.begin(), grid.end(), mu + reach) - grid.begin();
  for (auto g = static_cast<std::size_t>(first);
       g < static_cast<std::size_t>(last); ++g) {
    const double d = grid[g] - mu;
    values[g] += norm * std::exp(-d * d * inv2v);
  }
}

GridDensity mixture_on_grid(const Vec& grid, const Vec& weights,
                            const std::vector<double>& means, double sigma2) {
  require_grid(grid);
  if (!(sigma2 > 0.0)) {
    throw Error("mixture density: kernel variance must be positive, got " +
                std::to_string(sigma2));
  }
  GridDensity out{grid, Vec(grid.size(), 0.0)};
  for (std::size_t i = 0; i < weights.size(); ++i) {
    accumulate_kernel(grid, weights[i], means[i], sigma2, out.values);
  }
  return out;
}

}  // namespace

Vec uniform_grid(double lo, double hi, std::size_t count) {
  if (count < 2) throw Error("uniform_grid needs at least 2 points");
  if (!(hi > lo)) throw Error("uniform_grid needs hi > lo");
  Vec g(count);
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) {
    g[i] = lo + static_cast<double>(i) * step;
  }
  g.back() = hi;
  return g;
}

Vec trapezoid_weights(const Vec& points) {
  require_grid(points);
  const std::size_t n = points.size();
  Vec w(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = 0.5 * (points[i + 1] - points[i]);
    w[i] += h;
    w[i + 1] += h;
  }
  return w;
}

double integrate(const GridDensity& d) {
  if (d.points.size() != d.values.size()) {
    throw LengthMismatch("integrate: grid and values differ in length");
  }
  const Vec w = trapezoid_weights(d.points);
  return simd::dot(w.data(), d.values.data(), w.size());
}

void normalize_density(GridDensity& d) {
  const double mass = integrate(d);
  if (!(mass >= kMassFloor)) {
    throw ZeroMass("normalize_density: trapezoid mass " + std::to_string(mass) +
                   " is below 1e-8");
  }
  for (double& v : d.values) v /= mass;
}

GridDensity grid_bayes_posterior(const GridDensity& prior,
                                 std::span<const double> likelihood) {
  if (prior.points.size() != likelihood.size()) {
    throw LengthMismatch("grid_bayes_posterior: likelihood length mismatch");
  }
  GridDensity post{prior.points, Vec(prior.values.size())};
  double peak = 0.0;
  for (std::size_t i = 0; i < likelihood.size(); ++i) {
    post.values[i] = prior.values[i] * likelihood[i];
    peak = std::max(peak, post.values[i]);
  }
  // The pointwise product can sit far below 1 even for a perfectly healthy
  // posterior (a likelihood centred many prior sigmas from every mode), so
  // rescale by the peak before normalizing; the mass floor then only rejects
  // products that genuinely vanished on the grid.
  if (!(peak > 0.0) || !std::isfinite(peak)) {
    throw ZeroMass("grid_bayes_posterior: product vanished on the grid");
  }
  for (double& v : post.values) v /= peak;
  normalize_density(post);
  return post;
}

GridDensity mixture_density_on_grid(const GaussianSumPosterior& post,
                                    const Vec& grid) {
  if (post.kernels.dim() != 1) {
    throw Error("mixture_density_on_grid: only 1-D mixtures have a grid density");
  }
  return mixture_on_grid(grid, post.kernels.weights(), post.kernels.states(),
                         post.shared_cov(0, 0));
}

GridDensity kde_density_on_grid(const WeightedEnsemble& ens, const Vec& grid,
                                BandwidthRule rule) {
  ens.validate("kde_density_on_grid");
  if (ens.dim() != 1) {
    throw Error("kde_density_on_grid: only 1-D ensembles have a grid density");
  }
  const Matrix p_e = weighted_covariance(ens);
  const double sigma2 = bandwidth_factor(rule, ens.size(), 1) * p_e(0, 0);
  return mixture_on_grid(grid, ens.weights(), ens.states(), sigma2);
}

GridDensity gaussian_density_on_grid(const Vec& grid, double mean, double var) {
  return mixture_on_grid(grid, Vec{1.0}, {mean}, var);
}

double kl_divergence(const GridDensity& p, const GridDensity& q) {
  if (p.points.size() != q.points.size() || p.points != q.points) {
    throw LengthMismatch("kl_divergence: densities must share one grid");
  }
  const Vec tw = trapezoid_weights(p.points);
  double kl = 0.0;
  for (std::size_t i = 0; i < tw.size(); ++i) {
    const double pi = p.values[i];
    if (pi <= 0.0) continue;
    const double qi = std::max(q.values[i], kDensityFloor);
    kl += tw[i] * pi * std::log(pi / qi);
  }
  if (kl < 0.0 && kl > -1e-9) return 0.0;
  return kl;
}

MetricSeries rmse_series(const TrajectoryRecord& truth,
                         const std::vector<Vec>& estimates) {
  if (estimates.size() != truth.obs_steps.size()) {
    throw LengthMismatch("rmse_series: " + std::to_string(estimates.size()) +
                         " estimates for " +
                         std::to_string(truth.obs_steps.size()) +
                         " observation times");
  }
  const std::size_t m = truth.states.cols();
  MetricSeries out;
  out.times.resize(estimates.size());
  out.values.resize(estimates.size());
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    if (estimates[k].size() != m) {
      throw LengthMismatch("rmse_series: estimate dimension mismatch");
    }
    const std::size_t step = truth.obs_steps[k];
    const double* xt = truth.states.row(step);
    double sq = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      const double d = estimates[k][c] - xt[c];
      sq += d * d;
    }
    out.times[k] = truth.times[step];
    out.values[k] = std::sqrt(sq / static_cast<double>(m));
  }
  return out;
}

double time_averaged(const MetricSeries& series, std::size_t skip) {
  if (series.values.size() != series.times.size()) {
    throw LengthMismatch("time_averaged: malformed series");
  }
  if (skip >= series.values.size()) {
    throw Error("time_averaged: spinup exclusion leaves no samples");
  }
  const std::size_t n = series.values.size() - skip;
  return simd::sum(series.values.data() + skip, n) / static_cast<double>(n);
}

}  // namespace engsf
