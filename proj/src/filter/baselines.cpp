#include "engsf/filter/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "engsf/core/error.hpp"
#include "engsf/core/stats.hpp"
#include "engsf/filter/engsf.hpp"
#include "engsf/simd/kernels.hpp"

namespace engsf {

namespace {

void require_uniform_weights(const WeightedEnsemble& ens, const char* what) {
  const double expected = 1.0 / static_cast<double>(ens.size());
  for (double w : ens.weights()) {
    if (std::abs(w - expected) > 1e-9 * expected) {
      throw Error(std::string(what) + ": ensemble must carry uniform weights");
    }
  }
}

Matrix kalman_gain(const Matrix& cov, const ObservationOp& obs) {
  const Matrix h_cov = matmul(obs.H, cov);
  Matrix s = add(matmul(h_cov, transpose(obs.H)), obs.R);
  symmetrize(s);
  return transpose(cholesky_solve(cholesky_jittered(s), h_cov));
}

}  // namespace

WeightedEnsemble enkf_update(const WeightedEnsemble& ens,
                             const ObservationOp& obs, std::span<const double> y,
                             EnkfVariant variant, RngStream& rng) {
  ens.validate("enkf_update");
  obs.validate(ens.dim());
  require_uniform_weights(ens, "enkf_update");
  if (y.size() != obs.obs_dim()) {
    throw LengthMismatch("enkf_update: observation has wrong dimension");
  }
  const std::size_t n = ens.size();
  const std::size_t m = ens.dim();
  const std::size_t p = obs.obs_dim();

  const Matrix gain = kalman_gain(sample_covariance(ens), obs);
  const Matrix d = sample_mvn(y, obs.R, n, rng);  // perturbed observations

  WeightedEnsemble out(m, n);
  if (variant == EnkfVariant::PerturbedObs) {
    Vec innov(p);
    for (std::size_t j = 0; j < n; ++j) {
      const Vec hx = matvec(obs.H, ens.particle(j));
      for (std::size_t r = 0; r < p; ++r) innov[r] = d(r, j) - hx[r];
      const Vec shift = matvec(gain, innov);
      simd::add_scaled(ens.particle(j).data(), 1.0, shift.data(),
                       out.particle(j).data(), m);
    }
    return out;
  }

  // SplitMean: mean and deviations updated separately with the mean and
  // centered perturbed observations.
  Vec xbar(m, 0.0), dbar(p, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    simd::axpy(inv_n, ens.particle(j).data(), xbar.data(), m);
  }
  for (std::size_t r = 0; r < p; ++r) {
    dbar[r] = inv_n * simd::sum(d.row(r), n);
  }
  const Vec h_xbar = matvec(obs.H, xbar);
  Vec mean_innov(p);
  simd::add_scaled(dbar.data(), -1.0, h_xbar.data(), mean_innov.data(), p);
  const Vec mean_shift = matvec(gain, mean_innov);
  Vec xbar_a(m);
  simd::add_scaled(xbar.data(), 1.0, mean_shift.data(), xbar_a.data(), m);

  Vec a(m), innov(p);
  for (std::size_t j = 0; j < n; ++j) {
    simd::add_scaled(ens.particle(j).data(), -1.0, xbar.data(), a.data(), m);
    const Vec ha = matvec(obs.H, a);
    for (std::size_t r = 0; r < p; ++r) innov[r] = (d(r, j) - dbar[r]) - ha[r];
    const Vec shift = matvec(gain, innov);
    auto dst = out.particle(j);
    for (std::size_t r = 0; r < m; ++r) dst[r] = xbar_a[r] + a[r] + shift[r];
  }
  return out;
}

WeightedEnsemble enkf_step(WeightedEnsemble ens, const DynamicsModel& model,
                           std::size_t steps, const ObservationOp& obs,
                           std::span<const double> y, EnkfVariant variant,
                           RngStream& rng) {
  RngStream fc = rng.sub("forecast");
  const WeightedEnsemble fens = forecast(std::move(ens), model, steps, fc);
  RngStream op = rng.sub("obs-perturb");
  return enkf_update(fens, obs, y, variant, op);
}

WeightedEnsemble ensrf_update(const WeightedEnsemble& ens,
                              const ObservationOp& obs,
                              std::span<const double> y) {
  ens.validate("ensrf_update");
  obs.validate(ens.dim());
  require_uniform_weights(ens, "ensrf_update");
  if (!obs.diagonal_r()) {
    throw NonDiagonalR("ensrf_update: serial processing needs diagonal R");
  }
  if (y.size() != obs.obs_dim()) {
    throw LengthMismatch("ensrf_update: observation has wrong dimension");
  }
  const std::size_t n = ens.size();
  const std::size_t m = ens.dim();
  if (n < 2) throw Error("ensrf_update: needs at least 2 particles");

  // Mean and deviations maintained across the serial scalar updates.
  Vec xbar(m, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    simd::axpy(inv_n, ens.particle(j).data(), xbar.data(), m);
  }
  Matrix dev(n, m);
  for (std::size_t j = 0; j < n; ++j) {
    simd::add_scaled(ens.particle(j).data(), -1.0, xbar.data(), dev.row(j), m);
  }

  Vec w(n), ph(m);
  for (std::size_t q = 0; q < obs.obs_dim(); ++q) {
    const double* h = obs.H.row(q);
    const double r = obs.R(q, q);
    // P h^T from the current deviations, 1/(N-1) weighting.
    std::fill(ph.begin(), ph.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      w[j] = simd::dot(h, dev.row(j), m);
      simd::axpy(w[j], dev.row(j), ph.data(), m);
    }
    const double bessel = 1.0 / static_cast<double>(n - 1);
    for (double& v : ph) v *= bessel;
    const double s = simd::dot(h, ph.data(), m) + r;
    if (!(s > 0.0)) throw NotPositiveDefinite("ensrf_update: innovation variance <= 0");

    // Mean gain and reduced perturbation gain.
    const double innov = y[q] - simd::dot(h, xbar.data(), m);
    const double shrink = 1.0 / (1.0 + std::sqrt(r / s));
    for (std::size_t i = 0; i < m; ++i) {
      const double k = ph[i] / s;
      xbar[i] += k * innov;
      ph[i] = shrink * k;  // ph now holds the perturbation gain
    }
    for (std::size_t j = 0; j < n; ++j) {
      simd::axpy(-w[j], ph.data(), dev.row(j), m);
    }
  }

  WeightedEnsemble out(m, n);
  for (std::size_t j = 0; j < n; ++j) {
    simd::add_scaled(xbar.data(), 1.0, dev.row(j), out.particle(j).data(), m);
  }
  return out;
}

WeightedEnsemble ensrf_step(WeightedEnsemble ens, const DynamicsModel& model,
                            std::size_t steps, const ObservationOp& obs,
                            std::span<const double> y, RngStream& rng) {
  RngStream fc = rng.sub("forecast");
  const WeightedEnsemble fens = forecast(std::move(ens), model, steps, fc);
  return ensrf_update(fens, obs, y);
}

WeightedEnsemble sir_reweight(const WeightedEnsemble& ens,
                              const ObservationOp& obs,
                              std::span<const double> y) {
  ens.validate("sir_reweight");
  obs.validate(ens.dim());
  if (y.size() != obs.obs_dim()) {
    throw LengthMismatch("sir_reweight: observation has wrong dimension");
  }
  const Cholesky r_chol = cholesky_jittered(obs.R);
  const std::size_t n = ens.size();
  Vec log_w(n), innov(obs.obs_dim());
  for (std::size_t i = 0; i < n; ++i) {
    const Vec hx = matvec(obs.H, ens.particle(i));
    simd::add_scaled(y.data(), -1.0, hx.data(), innov.data(), innov.size());
    log_w[i] = std::log(ens.weights()[i]) +
               gaussian_logpdf_prefactored(innov, r_chol.lower);
  }
  const double lse = log_sum_exp(log_w);
  if (!std::isfinite(lse)) {
    throw AllWeightsZero("sir_reweight: every particle likelihood underflowed");
  }
  WeightedEnsemble out = ens;
  for (std::size_t i = 0; i < n; ++i) {
    out.weights()[i] = std::exp(log_w[i] - lse);
  }
  out.normalize_weights();
  return out;
}

WeightedEnsemble sir_step(WeightedEnsemble ens, const DynamicsModel& model,
                          std::size_t steps, const ObservationOp& obs,
                          std::span<const double> y, RngStream& rng) {
  RngStream fc = rng.sub("forecast");
  const WeightedEnsemble fens = forecast(std::move(ens), model, steps, fc);
  const WeightedEnsemble weighted = sir_reweight(fens, obs, y);
  RngStream rs = rng.sub("resample");
  return resample(weighted, rs);
}

}  // namespace engsf
