#pragma once

#include <span>

#include "engsf/core/ensemble.hpp"
#include "engsf/core/rng.hpp"
#include "engsf/core/vec.hpp"

namespace engsf {

struct Moments {
  Vec mean;
  Matrix cov;
};

// Weighted ensemble mean: sum_j w_j x_j (weights assumed normalized).
Vec weighted_mean(const WeightedEnsemble& ens);

// Weighted scatter about the weighted mean, sum_j w_j d_j d_j^T, with no
// small-sample (Bessel) correction; this is the estimator the mixture
// bandwidth rules are defined against.
Matrix weighted_covariance(const WeightedEnsemble& ens);

// Both of the above with the mean computed once.
Moments ensemble_moments(const WeightedEnsemble& ens);

// Classic unweighted sample covariance with the 1/(N-1) correction, as used
// by the ensemble Kalman baselines. Requires N >= 2; the ensemble's weights
// are ignored.
Matrix sample_covariance(const WeightedEnsemble& ens);

// Moments of the Gaussian mixture whose weights/means are carried by
// `kernels` and whose covariances are `covs` (either one shared matrix or one
// per kernel): mean = sum_i a_i x_i,
// cov = sum_i a_i S_i + sum_i a_i (x_i - mean)(x_i - mean)^T.
Moments mixture_moments(const WeightedEnsemble& kernels,
                        std::span<const Matrix> covs);

struct Cholesky {
  Matrix lower;   // L with A + jitter*I = L L^T
  double jitter;  // absolute jitter that was required (0 when none)
};

// Lower Cholesky factor with an escalating-jitter retry schedule: first the
// matrix as given, then eps*I added for eps = 1e-10 .. 1e-6 (times the mean
// diagonal) in decade steps. A zero pivot whose remaining column is exactly
// zero is accepted (positive semidefinite input, e.g. a zero covariance) by
// zeroing that column of L. Throws NotPositiveDefinite when the final retry
// still fails.
Cholesky cholesky_jittered(const Matrix& a);

// In-place triangular solves against the lower factor L.
void forward_solve(const Matrix& lower, std::span<double> b);   // L b' = b
void backward_solve(const Matrix& lower, std::span<double> b);  // L^T b' = b

// X with (L L^T) X = B, column by column.
Matrix cholesky_solve(const Cholesky& chol, const Matrix& b);

// log N(x; mean, cov); factorization failures propagate.
double gaussian_logpdf(std::span<const double> x, std::span<const double> mean,
                       const Matrix& cov);

// log N(diff; 0, L L^T) given a precomputed factor, so one factorization can
// serve many evaluations.
double gaussian_logpdf_prefactored(std::span<const double> diff,
                                   const Matrix& lower);

// count independent draws from N(mean, cov), returned as an m-by-count matrix
// whose columns are the draws (x = mean + L z, standard normals consumed in
// column order).
Matrix sample_mvn(std::span<const double> mean, const Matrix& cov,
                  std::size_t count, RngStream& rng);

// log(sum_i exp(logs[i])) with the usual max shift; -inf when every entry is
// -inf or the span is empty.
double log_sum_exp(std::span<const double> logs);

}  // namespace engsf
