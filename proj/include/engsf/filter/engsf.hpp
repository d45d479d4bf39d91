#pragma once

#include <cstddef>
#include <span>

#include "engsf/core/ensemble.hpp"
#include "engsf/core/rng.hpp"
#include "engsf/core/vec.hpp"
#include "engsf/dynamics/models.hpp"

namespace engsf {

// Kernel bandwidth rules for the Gaussian-mixture representation of an
// ensemble. Silverman is the classic optimal-rate factor, Modified trades
// bias for variance reduction in the filtering context and is the default,
// SilvermanExactC keeps the dimension-dependent leading constant.
enum class BandwidthRule {
  Silverman,       // N^(-2/(m+4))
  Modified,        // N^(-2/(m+2))
  SilvermanExactC, // silverman_c(m) * N^(-2/(m+4))
};

// Leading constant (4 / (m+2))^(2/(m+4)) of the optimal Gaussian-kernel
// bandwidth in m dimensions.
double silverman_c(std::size_t dim);

// Scalar multiplier applied to the ensemble covariance for the given rule.
double bandwidth_factor(BandwidthRule rule, std::size_t n_particles,
                        std::size_t dim);

// Shared kernel covariance: bandwidth_factor(...) * ensemble_cov.
Matrix bandwidth_sigma(const Matrix& ensemble_cov, std::size_t n_particles,
                       std::size_t dim, BandwidthRule rule);

// Gaussian-sum analysis: every mixture component shares the kernel covariance
// sigma_f and the Kalman gain built from it.
struct GaussianSumPosterior {
  WeightedEnsemble kernels;  // weights = posterior mixture weights, particles = posterior means
  Matrix shared_cov;         // posterior kernel covariance, shared by all components
};

// Bayes update of the mixture (prior.weights, prior particles as kernel
// means, shared kernel covariance sigma_f) under y = H x + e, e ~ N(0, R):
// one gain K = sigma_f H^T (H sigma_f H^T + R)^{-1} moves every mean, the
// posterior weights are the prior weights times the innovation likelihood
// N(y - H x_i; 0, H sigma_f H^T + R) renormalized in the log domain, and the
// shared covariance becomes (I - K H) sigma_f.
GaussianSumPosterior analysis_update(const WeightedEnsemble& prior,
                                     const Matrix& sigma_f,
                                     const ObservationOp& obs,
                                     std::span<const double> y);

// 1 / sum_i w_i^2 for normalized weights.
double effective_sample_size(std::span<const double> weights);

// Multinomial resampling by CDF inversion with the N uniforms drawn up front
// and sorted ascending; output weights are uniform.
WeightedEnsemble resample(const WeightedEnsemble& ens, RngStream& rng);

// Degenerate-weight fallback: when one posterior component holds essentially
// all the mass, rebuild the ensemble as a Gaussian draw that reproduces the
// winning component's posterior moments as N grows. winner is the winning
// component's posterior mean; forecast_ens supplies the spread: with
// c = N^(-2/(m+2)), sigma_f = c * P_e, K the gain for sigma_f, and
// a_j = sqrt(N w_j c) (x_j^f - xbar^f), the output particles are
//   out_j = winner + a_j + K (r_j - H a_j),  r_j ~ N(0, R),
// whose empirical covariance converges to (I - K H) sigma_f and mean to
// winner. Output weights are uniform.
WeightedEnsemble gaussian_resample(std::span<const double> winner,
                                   const WeightedEnsemble& forecast_ens,
                                   const ObservationOp& obs,
                                   std::span<const double> y, RngStream& rng);

// Advances every particle `steps` model steps; weights are untouched. Each
// particle draws from the sub-stream "particle=<j>" of rng, so the result is
// independent of particle ordering.
WeightedEnsemble forecast(WeightedEnsemble ens, const DynamicsModel& model,
                          std::size_t steps, RngStream& rng);

struct EngsfResult {
  WeightedEnsemble ensemble;       // analysis ensemble after resampling
  GaussianSumPosterior posterior;  // mixture before resampling
  double ess = 0.0;                // effective sample size of the posterior weights
  bool degenerate = false;         // true when gaussian_resample was taken
};

// Assimilates one observation into an ensemble that has already been forecast
// to the observation time: bandwidth -> analysis_update -> resampling
// (gaussian_resample when the top posterior weight reaches 1 - 1e-9,
// CDF-inversion resampling otherwise). rng sub-streams: "resample",
// "gaussian-resample".
EngsfResult engsf_assimilate(const WeightedEnsemble& forecast_ens,
                             const ObservationOp& obs, std::span<const double> y,
                             BandwidthRule rule, RngStream& rng);

// Full cycle: forecast `steps` model steps (rng sub-stream "forecast"), then
// assimilate y (sub-stream "assimilate").
EngsfResult engsf_step(WeightedEnsemble ens, const DynamicsModel& model,
                       std::size_t steps, const ObservationOp& obs,
                       std::span<const double> y, BandwidthRule rule,
                       RngStream& rng);

}  // namespace engsf
