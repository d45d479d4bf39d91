#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "engsf/core/ensemble.hpp"
#include "engsf/core/vec.hpp"
#include "engsf/dynamics/models.hpp"
#include "engsf/filter/engsf.hpp"

namespace engsf {

// A density sampled on a strictly increasing 1-D grid.
struct GridDensity {
  Vec points;
  Vec values;
};

// count evenly spaced points covering [lo, hi] inclusive.
Vec uniform_grid(double lo, double hi, std::size_t count);

// Trapezoid-rule quadrature weights for an arbitrary sorted grid.
Vec trapezoid_weights(const Vec& points);

double integrate(const GridDensity& d);

// Scales values so the trapezoid integral is 1; throws ZeroMass when the
// integral is below 1e-8.
void normalize_density(GridDensity& d);

// Pointwise Bayes: posterior ∝ prior * likelihood, renormalized on the grid.
// This is the brute-force oracle the filters are measured against.
GridDensity grid_bayes_posterior(const GridDensity& prior,
                                 std::span<const double> likelihood);

// Exact density of a 1-D Gaussian-sum posterior on the grid.
GridDensity mixture_density_on_grid(const GaussianSumPosterior& post,
                                    const Vec& grid);

// Kernel density estimate of a weighted 1-D ensemble: a Gaussian mixture at
// the particles with shared variance bandwidth_factor(rule, N, 1) times the
// weighted ensemble variance.
GridDensity kde_density_on_grid(const WeightedEnsemble& ens, const Vec& grid,
                                BandwidthRule rule);

// Single Gaussian N(mean, var) evaluated on the grid — the density a
// moment-matching filter reports as its posterior.
GridDensity gaussian_density_on_grid(const Vec& grid, double mean, double var);

// KL(p || q) = sum_i tw_i p_i log(p_i / q_i) over the shared grid with
// trapezoid weights tw. Both densities must live on the identical grid and be
// trapezoid-normalized; q is floored at 1e-300 where p > 0, grid points with
// p_i = 0 contribute nothing, and a roundoff-level negative total (> -1e-9)
// is clamped to zero.
double kl_divergence(const GridDensity& p, const GridDensity& q);

struct MetricSeries {
  Vec times;
  Vec values;
};

// Root-mean-square error over state components at each observation time;
// estimates[k] is the filter mean after assimilating observation k and must
// align with truth.obs_steps.
MetricSeries rmse_series(const TrajectoryRecord& truth,
                         const std::vector<Vec>& estimates);

// Mean of values[skip..]; throws Error when skip leaves nothing.
double time_averaged(const MetricSeries& series, std::size_t skip);

}  // namespace engsf
