#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "engsf/core/error.hpp"
#include "engsf/core/rng.hpp"
#include "engsf/core/stats.hpp"
#include "engsf/filter/engsf.hpp"
#include "engsf/simd/kernels.hpp"

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

ObservationOp scalar_obs(double h, double r_var, std::size_t state_dim) {
  ObservationOp obs;
  obs.H = Matrix(1, state_dim);
  obs.H(0, 0) = h;
  obs.R = Matrix(1, 1);
  obs.R(0, 0) = r_var;
  return obs;
}

}  // namespace

TEST_CASE("silverman constant matches frozen reference values") {
  CHECK(silverman_c(1) == doctest::Approx(1.1219551454461996).epsilon(1e-15));
  CHECK(silverman_c(2) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(silverman_c(3) == doctest::Approx(0.93823455708708303).epsilon(1e-15));
  CHECK(silverman_c(10) == doctest::Approx(0.85475139990715221).epsilon(1e-15));
  CHECK(silverman_c(11) == doctest::Approx(0.8545724449440314).epsilon(1e-15));
  CHECK(silverman_c(40) == doctest::Approx(0.89863287933191249).epsilon(1e-15));
  // Bounded on 1..200: minimum near m = 11, maximum at m = 1, tending to 1.
  for (std::size_t m = 1; m <= 200; ++m) {
    const double c = silverman_c(m);
    CHECK(c >= 0.85);
    CHECK(c <= 1.1221);
  }
}

TEST_CASE("bandwidth factors follow the advertised exponents") {
  CHECK(bandwidth_factor(BandwidthRule::Modified, 100, 1) ==
        doctest::Approx(0.046415888336127795).epsilon(1e-15));
  CHECK(bandwidth_factor(BandwidthRule::Silverman, 100, 1) ==
        doctest::Approx(0.15848931924611134).epsilon(1e-15));
  CHECK(bandwidth_factor(BandwidthRule::SilvermanExactC, 200, 3) ==
        doctest::Approx(0.20647823694200035).epsilon(1e-15));
  // The modified rule shrinks faster than Silverman's for every m.
  for (std::size_t m = 1; m <= 5; ++m) {
    CHECK(bandwidth_factor(BandwidthRule::Modified, 50, m) <
          bandwidth_factor(BandwidthRule::Silverman, 50, m));
  }
  CHECK_THROWS_AS(bandwidth_factor(BandwidthRule::Modified, 0, 1), Error);

  Matrix cov(2, 2);
  cov(0, 0) = 3.0; cov(1, 1) = 5.0;
  const Matrix sig = bandwidth_sigma(cov, 100, 2, BandwidthRule::Modified);
  const double f = bandwidth_factor(BandwidthRule::Modified, 100, 2);
  CHECK(sig(0, 0) == doctest::Approx(3.0 * f).epsilon(1e-15));
  CHECK(sig(1, 1) == doctest::Approx(5.0 * f).epsilon(1e-15));
  CHECK_THROWS_AS(bandwidth_sigma(cov, 100, 3, BandwidthRule::Modified),
                  LengthMismatch);
}

TEST_CASE("analysis update reproduces the scalar Kalman filter") {
  // Three kernels sharing sigma_f; closed-form scalar arithmetic oracle.
  const double sigma_f = 0.5, r_var = 0.2, y = 0.3;
  const std::vector<Vec> means = {{-1.0}, {0.2}, {1.5}};
  const Vec alpha = {0.2, 0.5, 0.3};
  const auto prior = make_ensemble(1, means, alpha);
  Matrix sf(1, 1);
  sf(0, 0) = sigma_f;
  const auto obs = scalar_obs(1.0, r_var, 1);

  const GaussianSumPosterior post = analysis_update(prior, sf, obs, Vec{y});

  const double s = sigma_f + r_var;
  const double k = sigma_f / s;
  CHECK(post.shared_cov(0, 0) == doctest::Approx((1.0 - k) * sigma_f).epsilon(1e-14));

  Vec want_w(3);
  double wsum = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double innov = y - means[i][0];
    const double mean_a = means[i][0] + k * innov;
    CHECK(post.kernels.particle(i)[0] == doctest::Approx(mean_a).epsilon(1e-13));
    want_w[i] = alpha[i] * std::exp(-0.5 * innov * innov / s) / std::sqrt(s);
    wsum += want_w[i];
  }
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(post.kernels.weights()[i] ==
          doctest::Approx(want_w[i] / wsum).epsilon(1e-12));
  }
}

TEST_CASE("analysis update reproduces the 2-D Kalman filter with partial observation") {
  // H = [1 0], so only the first coordinate is observed; oracle by scalar
  // arithmetic on the 2x2 blocks.
  Matrix sf(2, 2);
  sf(0, 0) = 2.0; sf(0, 1) = 0.5; sf(1, 0) = 0.5; sf(1, 1) = 1.0;
  const double r_var = 0.4, y = 0.9;
  const auto obs = scalar_obs(1.0, r_var, 2);
  const std::vector<Vec> means = {{0.0, 0.0}, {1.0, -1.0}};
  const auto prior = make_ensemble(2, means, {0.6, 0.4});

  const GaussianSumPosterior post = analysis_update(prior, sf, obs, Vec{y});

  const double s = sf(0, 0) + r_var;
  const double k0 = sf(0, 0) / s, k1 = sf(1, 0) / s;
  for (std::size_t i = 0; i < 2; ++i) {
    const double innov = y - means[i][0];
    CHECK(post.kernels.particle(i)[0] ==
          doctest::Approx(means[i][0] + k0 * innov).epsilon(1e-13));
    CHECK(post.kernels.particle(i)[1] ==
          doctest::Approx(means[i][1] + k1 * innov).epsilon(1e-13));
  }
  CHECK(post.shared_cov(0, 0) ==
        doctest::Approx(sf(0, 0) - k0 * sf(0, 0)).epsilon(1e-13));
  CHECK(post.shared_cov(0, 1) ==
        doctest::Approx(sf(0, 1) - k0 * sf(0, 1)).epsilon(1e-13));
  CHECK(post.shared_cov(1, 1) ==
        doctest::Approx(sf(1, 1) - k1 * sf(0, 1)).epsilon(1e-13));
  CHECK(post.shared_cov(0, 1) == post.shared_cov(1, 0));

  // The covariance reduction sigma_f - sigma_a = K H sigma_f is PSD.
  const Matrix diff = subtract(sf, post.shared_cov);
  CHECK(diff(0, 0) >= -1e-14);
  CHECK(diff(1, 1) >= -1e-14);
  CHECK(diff(0, 0) * diff(1, 1) - diff(0, 1) * diff(1, 0) >= -1e-14);
}

TEST_CASE("analysis update throws when every component underflows") {
  const auto prior = make_ensemble(1, {{1e200}, {-1e200}}, {0.5, 0.5});
  Matrix sf(1, 1);
  sf(0, 0) = 1e-6;
  const auto obs = scalar_obs(1.0, 1e-6, 1);
  CHECK_THROWS_AS(analysis_update(prior, sf, obs, Vec{0.0}), AllWeightsZero);
}

TEST_CASE("effective sample size") {
  const Vec uniform = {0.25, 0.25, 0.25, 0.25};
  CHECK(effective_sample_size(uniform) == doctest::Approx(4.0).epsilon(1e-14));
  const Vec point = {1.0, 0.0, 0.0};
  CHECK(effective_sample_size(point) == doctest::Approx(1.0).epsilon(1e-14));
  const Vec mixed = {0.5, 0.5};
  CHECK(effective_sample_size(mixed) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("resampling: a point mass wins every slot and weights reset") {
  const auto ens = make_ensemble(1, {{7.0}, {-3.0}, {4.0}}, {0.0, 1.0, 0.0});
  RngStream rng(11, "resample-test");
  const WeightedEnsemble out = resample(ens, rng);
  REQUIRE(out.size() == 3);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(out.particle(j)[0] == -3.0);
    CHECK(out.weights()[j] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
}

TEST_CASE("resampling counts track the weights") {
  const auto ens = make_ensemble(1, {{0.0}, {1.0}}, {0.75, 0.25});
  RngStream rng(2024, "resample-counts");
  const std::size_t n = ens.size();
  std::size_t ones = 0, total = 0;
  for (int rep = 0; rep < 4000; ++rep) {
    RngStream sub = rng.sub("rep=" + std::to_string(rep));
    const WeightedEnsemble out = resample(ens, sub);
    for (std::size_t j = 0; j < n; ++j) {
      ones += out.particle(j)[0] > 0.5 ? 1u : 0u;
      ++total;
    }
  }
  const double frac = static_cast<double>(ones) / static_cast<double>(total);
  // 8000 draws at p = 0.25: sd ~ 0.0048; allow 5 sigma.
  CHECK(std::abs(frac - 0.25) < 0.025);
}

TEST_CASE("gaussian resample replays the scalar closed form") {
  const std::vector<Vec> pts = {{0.4}, {1.2}, {-0.6}, {2.0}};
  const Vec w = {0.1, 0.55, 0.2, 0.15};
  const auto fens = make_ensemble(1, pts, w);
  const double r_var = 0.3;
  const auto obs = scalar_obs(1.0, r_var, 1);
  const Vec winner = {0.8};
  const std::size_t n = 4;

  RngStream rng(99, "gauss-res");
  RngStream clone(99, "gauss-res");
  const WeightedEnsemble out = gaussian_resample(winner, fens, obs, Vec{0.8}, rng);

  // Scalar oracle with the same draw order: n observation-noise normals
  // first, then pure arithmetic.
  Vec r(n);
  for (double& v : r) v = std::sqrt(r_var) * clone.normal();
  double xbar = 0.0;
  for (std::size_t j = 0; j < n; ++j) xbar += w[j] * pts[j][0];
  double p_e = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    p_e += w[j] * (pts[j][0] - xbar) * (pts[j][0] - xbar);
  }
  const double c = std::pow(static_cast<double>(n), -2.0 / 3.0);
  const double sigma_f = c * p_e;
  const double k = sigma_f / (sigma_f + r_var);
  for (std::size_t j = 0; j < n; ++j) {
    const double a = std::sqrt(static_cast<double>(n) * w[j] * c) *
                     (pts[j][0] - xbar);
    const double want = winner[0] + a + k * (r[j] - a);
    CHECK(out.particle(j)[0] == doctest::Approx(want).epsilon(1e-12));
    CHECK(out.weights()[j] == doctest::Approx(0.25).epsilon(1e-15));
  }
}

TEST_CASE("gaussian resample matches the model moments") {
  // Large-N check: mean -> winner, covariance -> (1 - k) sigma_f.
  const std::size_t n = 20000;
  RngStream init(5150, "gauss-res-init");
  WeightedEnsemble fens(1, n);
  for (std::size_t j = 0; j < n; ++j) {
    fens.particle(j)[0] = 1.0 + 0.7 * init.normal();
  }
  std::fill(fens.weights().begin(), fens.weights().end(),
            1.0 / static_cast<double>(n));
  const double r_var = 0.25;
  const auto obs = scalar_obs(1.0, r_var, 1);
  const Vec winner = {0.35};

  RngStream rng(5151, "gauss-res-draws");
  const WeightedEnsemble out = gaussian_resample(winner, fens, obs, Vec{0.35}, rng);

  const double c = bandwidth_factor(BandwidthRule::Modified, n, 1);
  const double p_e = weighted_covariance(fens)(0, 0);
  const double sigma_f = c * p_e;
  const double k = sigma_f / (sigma_f + r_var);
  const double sigma_a = (1.0 - k) * sigma_f;

  const Moments mm = ensemble_moments(out);
  CHECK(std::abs(mm.mean[0] - winner[0]) < 0.05 * std::sqrt(sigma_a) + 0.01);
  CHECK(mm.cov(0, 0) == doctest::Approx(sigma_a).epsilon(0.05));
}

TEST_CASE("gaussian resample with huge observation noise reduces to winner plus spread") {
  const std::size_t n = 64;
  RngStream init(808, "gauss-res-bigr");
  WeightedEnsemble fens(2, n);
  for (std::size_t j = 0; j < n; ++j) {
    fens.particle(j)[0] = init.normal();
    fens.particle(j)[1] = 2.0 + 0.5 * init.normal();
  }
  std::fill(fens.weights().begin(), fens.weights().end(),
            1.0 / static_cast<double>(n));
  ObservationOp obs;
  obs.H = Matrix(1, 2);
  obs.H(0, 0) = 1.0;
  obs.R = Matrix(1, 1);
  obs.R(0, 0) = 1e12;
  const Vec winner = {3.0, -1.0};

  RngStream rng(809, "gauss-res-bigr-draws");
  const WeightedEnsemble out = gaussian_resample(winner, fens, obs, Vec{0.0}, rng);

  const double c = bandwidth_factor(BandwidthRule::Modified, n, 2);
  const Moments fm = ensemble_moments(fens);
  for (std::size_t j = 0; j < n; ++j) {
    const double scale =
        std::sqrt(static_cast<double>(n) * fens.weights()[j] * c);
    for (std::size_t r = 0; r < 2; ++r) {
      const double a = scale * (fens.particle(j)[r] - fm.mean[r]);
      const double want = winner[r] + a;
      CHECK(std::abs(out.particle(j)[r] - want) <
            1e-3 * (std::abs(want) + 1.0));
    }
  }
}

TEST_CASE("assimilation takes the degenerate path only when one weight dominates") {
  RngStream seed(32, "assim-init");
  const std::size_t n = 50;
  WeightedEnsemble ens(1, n);
  for (std::size_t j = 0; j < n; ++j) ens.particle(j)[0] = seed.normal();
  std::fill(ens.weights().begin(), ens.weights().end(),
            1.0 / static_cast<double>(n));

  const auto obs_mild = scalar_obs(1.0, 1.0, 1);
  RngStream r1(33, "assim-mild");
  const EngsfResult mild =
      engsf_assimilate(ens, obs_mild, Vec{0.2}, BandwidthRule::Modified, r1);
  CHECK(!mild.degenerate);
  CHECK(mild.ess > 1.0);
  CHECK(mild.ensemble.size() == n);
  for (double w : mild.ensemble.weights()) {
    CHECK(w == doctest::Approx(1.0 / static_cast<double>(n)).epsilon(1e-12));
  }

  // An outlier particle exactly under a razor-sharp likelihood takes all the
  // posterior mass.
  ens.particle(0)[0] = 40.0;
  const auto obs_sharp = scalar_obs(1.0, 1e-8, 1);
  RngStream r2(34, "assim-sharp");
  const EngsfResult sharp =
      engsf_assimilate(ens, obs_sharp, Vec{40.0}, BandwidthRule::Modified, r2);
  CHECK(sharp.degenerate);
  CHECK(sharp.ess == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sharp.ensemble.size() == n);
  // The rebuilt ensemble hugs the winning posterior mean.
  const Vec mean = weighted_mean(sharp.ensemble);
  CHECK(std::abs(mean[0] - 40.0) < 1.0);
}

TEST_CASE("a single-particle ensemble survives assimilation") {
  const auto ens = make_ensemble(1, {{0.7}}, {1.0});
  const auto obs = scalar_obs(1.0, 0.5, 1);
  RngStream rng(41, "single");
  const EngsfResult res =
      engsf_assimilate(ens, obs, Vec{0.2}, BandwidthRule::Modified, rng);
  CHECK(res.degenerate);
  REQUIRE(res.ensemble.size() == 1);
  // Zero ensemble spread means zero gain: the particle stays put.
  CHECK(res.ensemble.particle(0)[0] == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("posterior weights always sum to one") {
  RngStream rng(7777, "wsum");
  for (int rep = 0; rep < 50; ++rep) {
    RngStream sub = rng.sub("rep=" + std::to_string(rep));
    const std::size_t n = 3 + static_cast<std::size_t>(sub.uniform() * 40);
    WeightedEnsemble ens(1, n);
    double wsum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      ens.particle(j)[0] = 2.0 * sub.normal();
      ens.weights()[j] = sub.uniform();
      wsum += ens.weights()[j];
    }
    for (double& w : ens.weights()) w /= wsum;
    ens.normalize_weights();
    const auto obs = scalar_obs(1.0, 0.5 + sub.uniform(), 1);
    const Matrix p_e = weighted_covariance(ens);
    const Matrix sf = bandwidth_sigma(p_e, n, 1, BandwidthRule::Modified);
    const GaussianSumPosterior post =
        analysis_update(ens, sf, obs, Vec{sub.normal()});
    const double sum = simd::sum(post.kernels.weights().data(), n);
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}
