#include "engsf/filter/engsf.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "engsf/core/error.hpp"
#include "engsf/core/stats.hpp"
#include "engsf/simd/kernels.hpp"

namespace engsf {

namespace {

constexpr double kDegenerateWeight = 1.0 - 1e-9;

// Gain K = sigma_f H^T S^{-1} and innovation factor for S = H sigma_f H^T + R.
struct GainPieces {
  Matrix k;          // m-by-n
  Cholesky s_chol;   // factor of S
  Matrix h_sigma;    // H sigma_f (n-by-m), reused for the covariance update
};

GainPieces build_gain(const Matrix& sigma_f, const ObservationOp& obs) {
  GainPieces g;
  g.h_sigma = matmul(obs.H, sigma_f);
  Matrix s = add(matmul(g.h_sigma, transpose(obs.H)), obs.R);
  symmetrize(s);
  g.s_chol = cholesky_jittered(s);
  // sigma_f symmetric, so sigma_f H^T = (H sigma_f)^T and
  // K^T = S^{-1} (H sigma_f).
  g.k = transpose(cholesky_solve(g.s_chol, g.h_sigma));
  return g;
}

}  // namespace

double silverman_c(std::size_t dim) {
  const double m = static_cast<double>(dim);
  return std::pow(4.0 / (m + 2.0), 2.0 / (m + 4.0));
}

double bandwidth_factor(BandwidthRule rule, std::size_t n_particles,
                        std::size_t dim) {
  if (n_particles == 0) throw Error("bandwidth_factor: empty ensemble");
  const double n = static_cast<double>(n_particles);
  const double m = static_cast<double>(dim);
  switch (rule) {
    case BandwidthRule::Silverman:
      return std::pow(n, -2.0 / (m + 4.0));
    case BandwidthRule::Modified:
      return std::pow(n, -2.0 / (m + 2.0));
    case BandwidthRule::SilvermanExactC:
      return silverman_c(dim) * std::pow(n, -2.0 / (m + 4.0));
  }
  throw Error("bandwidth_factor: unknown rule");
}

Matrix bandwidth_sigma(const Matrix& ensemble_cov, std::size_t n_particles,
                       std::size_t dim, BandwidthRule rule) {
  if (ensemble_cov.rows() != dim || ensemble_cov.cols() != dim) {
    throw LengthMismatch("bandwidth_sigma: covariance is not dim-by-dim");
  }
  return scaled(ensemble_cov, bandwidth_factor(rule, n_particles, dim));
}

GaussianSumPosterior analysis_update(const WeightedEnsemble& prior,
                                     const Matrix& sigma_f,
                                     const ObservationOp& obs,
                                     std::span<const double> y) {
  prior.validate("analysis_update");
  obs.validate(prior.dim());
  if (y.size() != obs.obs_dim()) {
    throw LengthMismatch("analysis_update: observation has wrong dimension");
  }
  const std::size_t l = prior.size();
  const std::size_t m = prior.dim();
  const std::size_t n = obs.obs_dim();

  const GainPieces gain = build_gain(sigma_f, obs);

  GaussianSumPosterior post;
  post.kernels = WeightedEnsemble(m, l);
  post.shared_cov = subtract(sigma_f, matmul(gain.k, gain.h_sigma));
  symmetrize(post.shared_cov);

  Vec log_w(l);
  Vec innov(n);
  for (std::size_t i = 0; i < l; ++i) {
    const Vec hx = matvec(obs.H, prior.particle(i));
    simd::add_scaled(y.data(), -1.0, hx.data(), innov.data(), n);
    log_w[i] = std::log(prior.weights()[i]) +
               gaussian_logpdf_prefactored(innov, gain.s_chol.lower);
    const Vec shift = matvec(gain.k, innov);
    auto out = post.kernels.particle(i);
    simd::add_scaled(prior.particle(i).data(), 1.0, shift.data(), out.data(), m);
  }

  const double lse = log_sum_exp(log_w);
  if (!std::isfinite(lse)) {
    throw AllWeightsZero("analysis_update: every component likelihood underflowed");
  }
  for (std::size_t i = 0; i < l; ++i) {
    post.kernels.weights()[i] = std::exp(log_w[i] - lse);
  }
  post.kernels.normalize_weights();
  return post;
}

double effective_sample_size(std::span<const double> weights) {
  const double sq = simd::dot(weights.data(), weights.data(), weights.size());
  if (!(sq > 0.0)) throw AllWeightsZero("effective_sample_size: zero weights");
  return 1.0 / sq;
}

WeightedEnsemble resample(const WeightedEnsemble& ens, RngStream& rng) {
  ens.validate("resample");
  const std::size_t n = ens.size();
  Vec u(n);
  for (double& v : u) v = rng.uniform();
  std::sort(u.begin(), u.end());

  WeightedEnsemble out(ens.dim(), n);
  std::size_t i = 0;
  double cum = ens.weights()[0];
  for (std::size_t k = 0; k < n; ++k) {
    while (u[k] > cum && i + 1 < n) {
      ++i;
      cum += ens.weights()[i];
    }
    auto src = ens.particle(i);
    std::copy(src.begin(), src.end(), out.particle(k).begin());
  }
  return out;
}

WeightedEnsemble gaussian_resample(std::span<const double> winner,
                                   const WeightedEnsemble& forecast_ens,
                                   const ObservationOp& obs,
                                   std::span<const double> y, RngStream& rng) {
  forecast_ens.validate("gaussian_resample");
  obs.validate(forecast_ens.dim());
  const std::size_t n = forecast_ens.size();
  const std::size_t m = forecast_ens.dim();
  if (winner.size() != m) {
    throw LengthMismatch("gaussian_resample: winner mean has wrong dimension");
  }
  if (y.size() != obs.obs_dim()) {
    throw LengthMismatch("gaussian_resample: observation has wrong dimension");
  }

  const double c = bandwidth_factor(BandwidthRule::Modified, n, m);
  const Moments fm = ensemble_moments(forecast_ens);
  const Matrix sigma_f = scaled(fm.cov, c);
  const GainPieces gain = build_gain(sigma_f, obs);

  // Observation-noise draws; the observation itself cancels out of the
  // perturbation update, so only r_j - H a_j enters the spread.
  const Vec zero(obs.obs_dim(), 0.0);
  const Matrix r_draws = sample_mvn(zero, obs.R, n, rng);

  WeightedEnsemble out(m, n);
  Vec a(m), res(obs.obs_dim());
  for (std::size_t j = 0; j < n; ++j) {
    const double scale =
        std::sqrt(static_cast<double>(n) * forecast_ens.weights()[j] * c);
    simd::add_scaled(forecast_ens.particle(j).data(), -1.0, fm.mean.data(),
                     a.data(), m);
    for (double& v : a) v *= scale;
    const Vec ha = matvec(obs.H, a);
    for (std::size_t r = 0; r < res.size(); ++r) res[r] = r_draws(r, j) - ha[r];
    const Vec shift = matvec(gain.k, res);
    auto dst = out.particle(j);
    for (std::size_t r = 0; r < m; ++r) dst[r] = winner[r] + a[r] + shift[r];
  }
  return out;
}

WeightedEnsemble forecast(WeightedEnsemble ens, const DynamicsModel& model,
                          std::size_t steps, RngStream& rng) {
  ens.validate("forecast");
  if (ens.dim() != model.dim) {
    throw LengthMismatch("forecast: ensemble and model dimensions differ");
  }
  for (std::size_t j = 0; j < ens.size(); ++j) {
    RngStream pj = rng.sub("particle=" + std::to_string(j));
    auto x = ens.particle(j);
    for (std::size_t k = 0; k < steps; ++k) model.step(x, pj);
  }
  return ens;
}

EngsfResult engsf_assimilate(const WeightedEnsemble& forecast_ens,
                             const ObservationOp& obs, std::span<const double> y,
                             BandwidthRule rule, RngStream& rng) {
  const Matrix p_e = weighted_covariance(forecast_ens);
  const Matrix sigma_f =
      bandwidth_sigma(p_e, forecast_ens.size(), forecast_ens.dim(), rule);

  EngsfResult result;
  result.posterior = analysis_update(forecast_ens, sigma_f, obs, y);
  result.ess = effective_sample_size(result.posterior.kernels.weights());

  const Vec& w = result.posterior.kernels.weights();
  const std::size_t top = static_cast<std::size_t>(
      std::max_element(w.begin(), w.end()) - w.begin());
  if (w[top] >= kDegenerateWeight) {
    result.degenerate = true;
    RngStream gr = rng.sub("gaussian-resample");
    result.ensemble = gaussian_resample(result.posterior.kernels.particle(top),
                                        forecast_ens, obs, y, gr);
  } else {
    RngStream rs = rng.sub("resample");
    result.ensemble = resample(result.posterior.kernels, rs);
  }
  return result;
}

EngsfResult engsf_step(WeightedEnsemble ens, const DynamicsModel& model,
                       std::size_t steps, const ObservationOp& obs,
                       std::span<const double> y, BandwidthRule rule,
                       RngStream& rng) {
  RngStream fc = rng.sub("forecast");
  const WeightedEnsemble fens = forecast(std::move(ens), model, steps, fc);
  RngStream as = rng.sub("assimilate");
  return engsf_assimilate(fens, obs, y, rule, as);
}

}  // namespace engsf
