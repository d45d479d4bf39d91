#include "engsf/core/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "engsf/core/error.hpp"
#include "engsf/simd/kernels.hpp"

namespace engsf {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)

// Accumulates w * d d^T into the upper triangle of c (rows r, columns >= r).
void accumulate_scatter(Matrix& c, std::span<const double> d, double w) {
  const std::size_t m = d.size();
  for (std::size_t r = 0; r < m; ++r) {
    simd::axpy(w * d[r], d.data() + r, c.row(r) + r, m - r);
  }
}

void mirror_upper(Matrix& c) {
  for (std::size_t r = 0; r < c.rows(); ++r) {
    for (std::size_t j = r + 1; j < c.cols(); ++j) c(j, r) = c(r, j);
  }
}

// One factorization attempt of a + eps*I. Returns false when a pivot is
// negative or a zero pivot has nonzero residuals below it.
bool try_cholesky(const Matrix& a, double eps, Matrix& lower) {
  const std::size_t m = a.rows();
  lower = Matrix(m, m);
  for (std::size_t j = 0; j < m; ++j) {
    const double diag_lj = simd::dot(lower.row(j), lower.row(j), j);
    const double d = (a(j, j) + eps) - diag_lj;
    if (d > 0.0) {
      const double ljj = std::sqrt(d);
      lower(j, j) = ljj;
      for (std::size_t i = j + 1; i < m; ++i) {
        const double off = a(i, j) - simd::dot(lower.row(i), lower.row(j), j);
        lower(i, j) = off / ljj;
      }
    } else if (d == 0.0) {
      // Positive semidefinite is fine when the whole remaining column
      // vanishes with it (zero matrix, rank-deficient scatter).
      for (std::size_t i = j + 1; i < m; ++i) {
        const double off = a(i, j) - simd::dot(lower.row(i), lower.row(j), j);
        if (off != 0.0) return false;
      }
      lower(j, j) = 0.0;
    } else {
      return false;
    }
  }
  return true;
}

}  // namespace

Vec weighted_mean(const WeightedEnsemble& ens) {
  Vec mean(ens.dim(), 0.0);
  for (std::size_t j = 0; j < ens.size(); ++j) {
    simd::axpy(ens.weights()[j], ens.particle(j).data(), mean.data(), ens.dim());
  }
  return mean;
}

Matrix weighted_covariance(const WeightedEnsemble& ens) {
  return ensemble_moments(ens).cov;
}

Moments ensemble_moments(const WeightedEnsemble& ens) {
  const std::size_t m = ens.dim();
  Moments out{weighted_mean(ens), Matrix(m, m)};
  Vec d(m);
  for (std::size_t j = 0; j < ens.size(); ++j) {
    simd::add_scaled(ens.particle(j).data(), -1.0, out.mean.data(), d.data(), m);
    accumulate_scatter(out.cov, d, ens.weights()[j]);
  }
  mirror_upper(out.cov);
  return out;
}

Matrix sample_covariance(const WeightedEnsemble& ens) {
  const std::size_t n = ens.size();
  const std::size_t m = ens.dim();
  if (n < 2) throw Error("sample_covariance: needs at least 2 particles");
  Vec mean(m, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    simd::axpy(1.0 / static_cast<double>(n), ens.particle(j).data(), mean.data(), m);
  }
  Matrix cov(m, m);
  Vec d(m);
  const double w = 1.0 / static_cast<double>(n - 1);
  for (std::size_t j = 0; j < n; ++j) {
    simd::add_scaled(ens.particle(j).data(), -1.0, mean.data(), d.data(), m);
    accumulate_scatter(cov, d, w);
  }
  mirror_upper(cov);
  return cov;
}

Moments mixture_moments(const WeightedEnsemble& kernels,
                        std::span<const Matrix> covs) {
  const std::size_t l = kernels.size();
  if (covs.size() != 1 && covs.size() != l) {
    throw LengthMismatch("mixture_moments: expected 1 or " + std::to_string(l) +
                         " kernel covariances, got " + std::to_string(covs.size()));
  }
  Moments out = ensemble_moments(kernels);
  if (covs.size() == 1) {
    // Weights sum to 1, so the within-kernel term is the shared matrix itself.
    out.cov = add(out.cov, covs[0]);
  } else {
    for (std::size_t i = 0; i < l; ++i) {
      simd::axpy(kernels.weights()[i], covs[i].data(), out.cov.data(),
                 out.cov.rows() * out.cov.cols());
    }
  }
  return out;
}

Cholesky cholesky_jittered(const Matrix& a) {
  if (a.rows() != a.cols()) throw Error("cholesky: matrix must be square");
  const std::size_t m = a.rows();
  const double scale = m ? trace(a) / static_cast<double>(m) : 0.0;
  Cholesky out;
  if (try_cholesky(a, 0.0, out.lower)) {
    out.jitter = 0.0;
    return out;
  }
  for (double rel = 1e-10; rel <= 1e-6 * 1.0000001; rel *= 10.0) {
    const double eps = rel * scale;
    if (try_cholesky(a, eps, out.lower)) {
      out.jitter = eps;
      return out;
    }
  }
  throw NotPositiveDefinite(
      "cholesky: matrix is not positive definite after jitter up to 1e-6 * "
      "mean diagonal (" + std::to_string(1e-6 * scale) + ")");
}

void forward_solve(const Matrix& lower, std::span<double> b) {
  const std::size_t m = lower.rows();
  for (std::size_t i = 0; i < m; ++i) {
    const double s = b[i] - simd::dot(lower.row(i), b.data(), i);
    const double d = lower(i, i);
    b[i] = d != 0.0 ? s / d : 0.0;  // zero pivot: degenerate direction carries no mass
  }
}

void backward_solve(const Matrix& lower, std::span<double> b) {
  const std::size_t m = lower.rows();
  for (std::size_t ii = m; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < m; ++k) s -= lower(k, ii) * b[k];
    const double d = lower(ii, ii);
    b[ii] = d != 0.0 ? s / d : 0.0;
  }
}

Matrix cholesky_solve(const Cholesky& chol, const Matrix& b) {
  if (chol.lower.rows() != b.rows()) {
    throw Error("cholesky_solve: shape mismatch");
  }
  Matrix x = b;
  Vec col(b.rows());
  for (std::size_t c = 0; c < b.cols(); ++c) {
    for (std::size_t r = 0; r < b.rows(); ++r) col[r] = x(r, c);
    forward_solve(chol.lower, col);
    backward_solve(chol.lower, col);
    for (std::size_t r = 0; r < b.rows(); ++r) x(r, c) = col[r];
  }
  return x;
}

double gaussian_logpdf(std::span<const double> x, std::span<const double> mean,
                       const Matrix& cov) {
  if (x.size() != mean.size() || cov.rows() != x.size()) {
    throw LengthMismatch("gaussian_logpdf: dimension mismatch");
  }
  Vec diff(x.size());
  simd::add_scaled(x.data(), -1.0, mean.data(), diff.data(), x.size());
  return gaussian_logpdf_prefactored(diff, cholesky_jittered(cov).lower);
}

double gaussian_logpdf_prefactored(std::span<const double> diff,
                                   const Matrix& lower) {
  const std::size_t m = diff.size();
  Vec z(diff.begin(), diff.end());
  forward_solve(lower, z);
  const double quad = simd::dot(z.data(), z.data(), m);
  double logdet = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    logdet += std::log(lower(i, i));  // -inf on a degenerate factor
  }
  return -0.5 * (static_cast<double>(m) * kLog2Pi + quad) - logdet;
}

Matrix sample_mvn(std::span<const double> mean, const Matrix& cov,
                  std::size_t count, RngStream& rng) {
  const std::size_t m = mean.size();
  const Matrix lower = cholesky_jittered(cov).lower;
  Matrix out(m, count);
  Vec z(m);
  for (std::size_t c = 0; c < count; ++c) {
    rng.fill_normal(z);
    for (std::size_t r = 0; r < m; ++r) {
      out(r, c) = mean[r] + simd::dot(lower.row(r), z.data(), r + 1);
    }
  }
  return out;
}

double log_sum_exp(std::span<const double> logs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logs) mx = std::max(mx, v);
  if (!std::isfinite(mx)) return mx;  // empty, all -inf, or a NaN/inf input
  double s = 0.0;
  for (double v : logs) s += std::exp(v - mx);
  return mx + std::log(s);
}

}  // namespace engsf
