#include "engsf/core/ensemble.hpp"

#include <cmath>
#include <string>

#include "engsf/core/error.hpp"
#include "engsf/simd/kernels.hpp"

namespace engsf {

void WeightedEnsemble::normalize_weights() {
  const double s = simd::sum(weights_.data(), weights_.size());
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw AllWeightsZero("weight normalization: total weight is " +
                         std::to_string(s));
  }
  for (double& w : weights_) w /= s;
}

void WeightedEnsemble::validate(const char* context) const {
  const std::string where(context);
  if (states_.size() != dim_ * weights_.size()) {
    throw Error(where + ": ensemble state block has inconsistent size");
  }
  if (weights_.empty()) throw Error(where + ": ensemble is empty");
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(where + ": ensemble weight " + std::to_string(w) +
                  " is negative or not finite");
    }
  }
  const double s = simd::sum(weights_.data(), weights_.size());
  if (std::abs(s - 1.0) > 1e-12) {
    throw Error(where + ": ensemble weights sum to " + std::to_string(s) +
                ", expected 1 within 1e-12");
  }
  if (!all_finite(states_)) {
    throw NonFiniteState(where + ": ensemble contains a non-finite state");
  }
}

void ObservationOp::validate(std::size_t state_dim) const {
  if (H.rows() == 0 || H.cols() != state_dim) {
    throw Error("observation operator H must be n-by-" +
                std::to_string(state_dim) + ", got " + std::to_string(H.rows()) +
                "-by-" + std::to_string(H.cols()));
  }
  if (R.rows() != H.rows() || R.cols() != H.rows()) {
    throw Error("observation covariance R must be " + std::to_string(H.rows()) +
                "-by-" + std::to_string(H.rows()));
  }
  for (std::size_t i = 0; i < R.rows(); ++i) {
    for (std::size_t j = i + 1; j < R.cols(); ++j) {
      if (R(i, j) != R(j, i)) throw Error("observation covariance R is not symmetric");
    }
  }
}

bool ObservationOp::diagonal_r() const {
  for (std::size_t i = 0; i < R.rows(); ++i) {
    for (std::size_t j = 0; j < R.cols(); ++j) {
      if (i != j && R(i, j) != 0.0) return false;
    }
  }
  return true;
}

Vec observe(const ObservationOp& obs, std::span<const double> x) {
  return matvec(obs.H, x);
}

}  // namespace engsf
