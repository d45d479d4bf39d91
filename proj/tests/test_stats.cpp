#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "engsf/core/ensemble.hpp"
#include "engsf/core/error.hpp"
#include "engsf/core/rng.hpp"
#include "engsf/core/stats.hpp"

using namespace engsf;

namespace {

WeightedEnsemble make_ensemble(std::size_t dim,
                               const std::vector<Vec>& particles,
                               const Vec& weights) {
  WeightedEnsemble ens(dim, particles.size());
  for (std::size_t j = 0; j < particles.size(); ++j) {
    auto x = ens.particle(j);
    for (std::size_t r = 0; r < dim; ++r) x[r] = particles[j][r];
  }
  ens.weights() = weights;
  return ens;
}

}  // namespace

TEST_CASE("weighted mean and covariance on a hand-computed example") {
  // mean = 0.3*1 + 0.7*2 = 1.7
  // cov  = 0.3*(1-1.7)^2 + 0.7*(2-1.7)^2 = 0.147 + 0.063 = 0.21 (no Bessel)
  const auto ens = make_ensemble(1, {{1.0}, {2.0}}, {0.3, 0.7});
  const Vec mean = weighted_mean(ens);
  CHECK(mean[0] == doctest::Approx(1.7).epsilon(1e-15));
  const Matrix cov = weighted_covariance(ens);
  CHECK(cov(0, 0) == doctest::Approx(0.21).epsilon(1e-14));
}

TEST_CASE("weighted covariance in 2-D against direct summation") {
  const std::vector<Vec> pts = {{1.0, 2.0}, {-0.5, 0.3}, {2.5, -1.0}, {0.0, 0.0}};
  const Vec w = {0.1, 0.4, 0.25, 0.25};
  const auto ens = make_ensemble(2, pts, w);
  const Moments mm = ensemble_moments(ens);
  double mx = 0, my = 0;
  for (std::size_t j = 0; j < 4; ++j) {
    mx += w[j] * pts[j][0];
    my += w[j] * pts[j][1];
  }
  double cxx = 0, cxy = 0, cyy = 0;
  for (std::size_t j = 0; j < 4; ++j) {
    cxx += w[j] * (pts[j][0] - mx) * (pts[j][0] - mx);
    cxy += w[j] * (pts[j][0] - mx) * (pts[j][1] - my);
    cyy += w[j] * (pts[j][1] - my) * (pts[j][1] - my);
  }
  CHECK(mm.mean[0] == doctest::Approx(mx).epsilon(1e-14));
  CHECK(mm.mean[1] == doctest::Approx(my).epsilon(1e-14));
  CHECK(mm.cov(0, 0) == doctest::Approx(cxx).epsilon(1e-13));
  CHECK(mm.cov(0, 1) == doctest::Approx(cxy).epsilon(1e-13));
  CHECK(mm.cov(1, 0) == mm.cov(0, 1));
  CHECK(mm.cov(1, 1) == doctest::Approx(cyy).epsilon(1e-13));
}

TEST_CASE("sample covariance uses the 1/(N-1) correction and ignores weights") {
  const auto ens = make_ensemble(1, {{1.0}, {3.0}}, {0.9, 0.1});
  const Matrix cov = sample_covariance(ens);
  // Unweighted mean 2, deviations +-1, 1/(N-1) = 1: variance 2.
  CHECK(cov(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  const auto single = make_ensemble(1, {{1.0}}, {1.0});
  CHECK_THROWS_AS(sample_covariance(single), Error);
}

TEST_CASE("mixture moments: zero kernel covariances reduce to ensemble moments") {
  const std::vector<Vec> pts = {{1.0, 0.5}, {-1.0, 0.25}, {0.2, -2.0}};
  const Vec w = {0.5, 0.3, 0.2};
  const auto kernels = make_ensemble(2, pts, w);
  const Matrix zero(2, 2);
  const Matrix covs[] = {zero};
  const Moments mixture = mixture_moments(kernels, covs);
  const Moments direct = ensemble_moments(kernels);
  for (std::size_t r = 0; r < 2; ++r) {
    CHECK(mixture.mean[r] == direct.mean[r]);
    for (std::size_t c = 0; c < 2; ++c) {
      CHECK(mixture.cov(r, c) == doctest::Approx(direct.cov(r, c)).epsilon(1e-15));
    }
  }
}

TEST_CASE("mixture moments: shared covariance equals the per-kernel list") {
  const std::vector<Vec> pts = {{0.0}, {2.0}};
  const auto kernels = make_ensemble(1, pts, {0.25, 0.75});
  Matrix shared(1, 1);
  shared(0, 0) = 0.5;
  const Matrix one[] = {shared};
  const Matrix both[] = {shared, shared};
  const Moments a = mixture_moments(kernels, one);
  const Moments b = mixture_moments(kernels, both);
  CHECK(a.mean[0] == b.mean[0]);
  CHECK(a.cov(0, 0) == doctest::Approx(b.cov(0, 0)).epsilon(1e-15));
  // Hand value: scatter = 0.25*0.75*4 = 0.75... mean = 1.5,
  // scatter = 0.25*2.25 + 0.75*0.25 = 0.75; total = 0.75 + 0.5 = 1.25.
  CHECK(a.cov(0, 0) == doctest::Approx(1.25).epsilon(1e-14));
  const Matrix wrong_count[] = {shared, shared, shared};
  CHECK_THROWS_AS(mixture_moments(kernels, wrong_count), LengthMismatch);
}

TEST_CASE("mixture moments against a Monte Carlo oracle") {
  // 3 kernels in 2-D with distinct covariances.
  const std::vector<Vec> means = {{0.0, 0.0}, {2.0, -1.0}, {-1.5, 1.0}};
  const Vec w = {0.5, 0.3, 0.2};
  std::vector<Matrix> covs(3, Matrix(2, 2));
  covs[0](0, 0) = 1.0;  covs[0](0, 1) = 0.3;  covs[0](1, 0) = 0.3;  covs[0](1, 1) = 0.5;
  covs[1](0, 0) = 0.4;  covs[1](0, 1) = -0.1; covs[1](1, 0) = -0.1; covs[1](1, 1) = 0.9;
  covs[2](0, 0) = 0.25; covs[2](0, 1) = 0.0;  covs[2](1, 0) = 0.0;  covs[2](1, 1) = 0.25;
  const auto kernels = make_ensemble(2, means, w);
  const Moments analytic = mixture_moments(kernels, covs);

  RngStream rng(31337, "mixture-oracle");
  const int n = 200000;
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  std::vector<Matrix> lowers;
  for (const Matrix& c : covs) lowers.push_back(cholesky_jittered(c).lower);
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    const std::size_t k = u < w[0] ? 0 : (u < w[0] + w[1] ? 1 : 2);
    const double z0 = rng.normal(), z1 = rng.normal();
    const double x = means[k][0] + lowers[k](0, 0) * z0;
    const double y = means[k][1] + lowers[k](1, 0) * z0 + lowers[k](1, 1) * z1;
    sx += x; sy += y; sxx += x * x; sxy += x * y; syy += y * y;
  }
  const double inv = 1.0 / n;
  const double mx = sx * inv, my = sy * inv;
  // MC standard error of the mean here is ~0.004; allow 4 sigma.
  CHECK(std::abs(analytic.mean[0] - mx) < 0.016);
  CHECK(std::abs(analytic.mean[1] - my) < 0.016);
  CHECK(std::abs(analytic.cov(0, 0) - (sxx * inv - mx * mx)) < 0.03);
  CHECK(std::abs(analytic.cov(0, 1) - (sxy * inv - mx * my)) < 0.03);
  CHECK(std::abs(analytic.cov(1, 1) - (syy * inv - my * my)) < 0.03);
}

TEST_CASE("cholesky on hand-factorable matrices") {
  Matrix a(2, 2);
  a(0, 0) = 4.0; a(0, 1) = 2.0; a(1, 0) = 2.0; a(1, 1) = 3.0;
  const Cholesky ch = cholesky_jittered(a);
  CHECK(ch.jitter == 0.0);
  CHECK(ch.lower(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(ch.lower(1, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ch.lower(1, 1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(ch.lower(0, 1) == 0.0);
}

TEST_CASE("cholesky accepts positive semidefinite edge cases exactly") {
  const Matrix zero(3, 3);
  const Cholesky chz = cholesky_jittered(zero);
  CHECK(chz.jitter == 0.0);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 3; ++c) CHECK(chz.lower(r, c) == 0.0);
  }

  Matrix ones(2, 2);
  ones(0, 0) = 1.0; ones(0, 1) = 1.0; ones(1, 0) = 1.0; ones(1, 1) = 1.0;
  const Cholesky ch1 = cholesky_jittered(ones);
  CHECK(ch1.jitter == 0.0);
  CHECK(ch1.lower(0, 0) == 1.0);
  CHECK(ch1.lower(1, 0) == 1.0);
  CHECK(ch1.lower(1, 1) == 0.0);
}

TEST_CASE("cholesky jitter escalation and failure") {
  // Slightly indefinite: needs jitter but recovers.
  Matrix a(2, 2);
  a(0, 0) = 1.0; a(0, 1) = 1.0; a(1, 0) = 1.0; a(1, 1) = 1.0 - 1e-15;
  const Cholesky ch = cholesky_jittered(a);
  CHECK(ch.jitter > 0.0);
  CHECK(ch.jitter <= 1e-6);
  // Reconstruction stays close.
  const Matrix l = ch.lower;
  CHECK(l(0, 0) * l(1, 0) == doctest::Approx(1.0).epsilon(1e-9));

  Matrix indef(2, 2);
  indef(0, 0) = 1.0; indef(1, 1) = -1.0;
  CHECK_THROWS_AS(cholesky_jittered(indef), NotPositiveDefinite);
}

TEST_CASE("triangular solves invert L L^T") {
  Matrix a(3, 3);
  a(0, 0) = 4.0; a(0, 1) = 2.0; a(0, 2) = 0.6;
  a(1, 0) = 2.0; a(1, 1) = 3.0; a(1, 2) = 0.2;
  a(2, 0) = 0.6; a(2, 1) = 0.2; a(2, 2) = 2.0;
  const Cholesky ch = cholesky_jittered(a);
  Vec b = {1.0, -2.0, 0.5};
  Vec x = b;
  forward_solve(ch.lower, x);
  backward_solve(ch.lower, x);
  const Vec back = matvec(a, x);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }

  Matrix rhs(3, 2);
  rhs(0, 0) = 1.0; rhs(1, 1) = 1.0; rhs(2, 0) = -1.0;
  const Matrix sol = cholesky_solve(ch, rhs);
  const Matrix recon = matmul(a, sol);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 2; ++c) {
      CHECK(recon(r, c) == doctest::Approx(rhs(r, c)).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("gaussian logpdf against closed forms") {
  // 1-D: log N(x; mu, s2) = -0.5 log(2 pi s2) - (x-mu)^2 / (2 s2)
  Matrix s2(1, 1);
  s2(0, 0) = 0.25;
  const Vec x = {1.3}, mu = {0.8};
  const double want =
      -0.5 * std::log(2.0 * 3.14159265358979323846 * 0.25) -
      0.5 * 0.5 / (2.0 * 0.25);
  CHECK(gaussian_logpdf(x, mu, s2) == doctest::Approx(want).epsilon(1e-13));

  // 2-D correlated, inverse and determinant by hand.
  Matrix c(2, 2);
  c(0, 0) = 2.0; c(0, 1) = 1.0; c(1, 0) = 1.0; c(1, 1) = 2.0;
  const Vec x2 = {0.7, -0.4}, mu2 = {0.0, 0.0};
  const double det = 3.0;
  const double quad =
      (2.0 * x2[0] * x2[0] - 2.0 * x2[0] * x2[1] + 2.0 * x2[1] * x2[1]) / det;
  const double want2 = -std::log(2.0 * 3.14159265358979323846) -
                       0.5 * std::log(det) - 0.5 * quad;
  CHECK(gaussian_logpdf(x2, mu2, c) == doctest::Approx(want2).epsilon(1e-13));
}

TEST_CASE("sample_mvn is mean + L z with matching moments") {
  Matrix c(2, 2);
  c(0, 0) = 1.0; c(0, 1) = 0.6; c(1, 0) = 0.6; c(1, 1) = 2.0;
  const Vec mu = {1.0, -2.0};

  // Exact linearity of the first draw.
  RngStream a(5, "mvn");
  RngStream b(5, "mvn");
  const Matrix draws1 = sample_mvn(mu, c, 1, a);
  const double z0 = b.normal(), z1 = b.normal();
  const Matrix l = cholesky_jittered(c).lower;
  CHECK(draws1(0, 0) == mu[0] + l(0, 0) * z0);
  CHECK(draws1(1, 0) == doctest::Approx(mu[1] + l(1, 0) * z0 + l(1, 1) * z1).epsilon(1e-15));

  RngStream rng(77, "mvn-moments");
  const std::size_t n = 100000;
  const Matrix draws = sample_mvn(mu, c, n, rng);
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double x = draws(0, j), y = draws(1, j);
    sx += x; sy += y; sxx += x * x; sxy += x * y; syy += y * y;
  }
  const double inv = 1.0 / static_cast<double>(n);
  const double mx = sx * inv, my = sy * inv;
  CHECK(std::abs(mx - 1.0) < 0.02);
  CHECK(std::abs(my + 2.0) < 0.03);
  CHECK(std::abs((sxx * inv - mx * mx) - 1.0) < 0.03);
  CHECK(std::abs((sxy * inv - mx * my) - 0.6) < 0.03);
  CHECK(std::abs((syy * inv - my * my) - 2.0) < 0.05);
}

TEST_CASE("log_sum_exp") {
  const Vec logs = {std::log(1.0), std::log(2.0), std::log(3.0)};
  CHECK(log_sum_exp(logs) == doctest::Approx(std::log(6.0)).epsilon(1e-14));
  const Vec shifted = {1000.0, 1000.0 + std::log(2.0)};
  CHECK(log_sum_exp(shifted) == doctest::Approx(1000.0 + std::log(3.0)).epsilon(1e-14));
  const double neg_inf = -std::numeric_limits<double>::infinity();
  const Vec degenerate = {neg_inf, neg_inf};
  CHECK(log_sum_exp(degenerate) == neg_inf);
  CHECK(log_sum_exp(Vec{}) == neg_inf);
}

TEST_CASE("ensemble invariants are enforced") {
  auto ens = make_ensemble(1, {{0.0}, {1.0}}, {0.5, 0.5});
  CHECK_NOTHROW(ens.validate("test"));

  auto bad_sum = ens;
  bad_sum.weights() = {0.5, 0.6};
  CHECK_THROWS_AS(bad_sum.validate("test"), Error);

  auto negative = ens;
  negative.weights() = {1.5, -0.5};
  CHECK_THROWS_AS(negative.validate("test"), Error);

  auto nonfinite = ens;
  nonfinite.particle(0)[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(nonfinite.validate("test"), NonFiniteState);

  auto zeroed = ens;
  zeroed.weights() = {0.0, 0.0};
  CHECK_THROWS_AS(zeroed.normalize_weights(), AllWeightsZero);

  auto unnormalized = ens;
  unnormalized.weights() = {2.0, 6.0};
  unnormalized.normalize_weights();
  CHECK(unnormalized.weights()[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(unnormalized.weights()[1] == doctest::Approx(0.75).epsilon(1e-15));
}
