#pragma once

#include <cstddef>
#include <span>

#include "engsf/core/ensemble.hpp"
#include "engsf/core/rng.hpp"
#include "engsf/dynamics/models.hpp"

namespace engsf {

// The two algebraically equivalent forms of the stochastic ensemble Kalman
// analysis. PerturbedObs applies x_j + K (d_j - H x_j) particle by particle;
// SplitMean updates the ensemble mean with the mean perturbed observation
// and the deviations with the centered ones, which pins the output mean to
// exactly the Kalman-updated mean. Both use the unweighted 1/(N-1) sample
// covariance (the ensemble must carry uniform weights).
enum class EnkfVariant {
  PerturbedObs,
  SplitMean,
};

WeightedEnsemble enkf_update(const WeightedEnsemble& ens,
                             const ObservationOp& obs, std::span<const double> y,
                             EnkfVariant variant, RngStream& rng);

// Forecast (rng sub-stream "forecast") then enkf_update (sub-stream
// "obs-perturb").
WeightedEnsemble enkf_step(WeightedEnsemble ens, const DynamicsModel& model,
                           std::size_t steps, const ObservationOp& obs,
                           std::span<const double> y, EnkfVariant variant,
                           RngStream& rng);

// Deterministic square-root analysis processing one scalar observation at a
// time; requires diagonal R (NonDiagonalR otherwise) and uniform weights.
// The mean moves with the full gain K, the deviations shrink with
// K / (1 + sqrt(R_jj / s)), and the ensemble covariance is recomputed after
// each scalar observation.
WeightedEnsemble ensrf_update(const WeightedEnsemble& ens,
                              const ObservationOp& obs,
                              std::span<const double> y);

WeightedEnsemble ensrf_step(WeightedEnsemble ens, const DynamicsModel& model,
                            std::size_t steps, const ObservationOp& obs,
                            std::span<const double> y, RngStream& rng);

// Bootstrap-proposal importance reweighting: multiplies each weight by the
// observation likelihood N(y - H x_i; 0, R) in the log domain and
// renormalizes. Throws AllWeightsZero when every log-likelihood underflows.
WeightedEnsemble sir_reweight(const WeightedEnsemble& ens,
                              const ObservationOp& obs,
                              std::span<const double> y);

// Bootstrap particle filter cycle: forecast (sub-stream "forecast"),
// reweight, resample every step (sub-stream "resample").
WeightedEnsemble sir_step(WeightedEnsemble ens, const DynamicsModel& model,
                          std::size_t steps, const ObservationOp& obs,
                          std::span<const double> y, RngStream& rng);

}  // namespace engsf
