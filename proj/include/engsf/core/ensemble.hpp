#pragma once

#include <cstddef>
#include <span>

#include "engsf/core/vec.hpp"

namespace engsf {

// A weighted particle set: an m-by-N state block (each particle contiguous)
// plus N weights. Invariants enforced by validate(): every weight is
// nonnegative and finite, the weights sum to 1 within 1e-12, and every state
// component is finite.
class WeightedEnsemble {
 public:
  WeightedEnsemble() = default;
  // N particles at the origin with uniform weights.
  WeightedEnsemble(std::size_t dim, std::size_t count)
      : dim_(dim), states_(dim * count, 0.0),
        weights_(count, count ? 1.0 / static_cast<double>(count) : 0.0) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return weights_.size(); }

  std::span<double> particle(std::size_t j) {
    return {states_.data() + j * dim_, dim_};
  }
  std::span<const double> particle(std::size_t j) const {
    return {states_.data() + j * dim_, dim_};
  }

  Vec& weights() { return weights_; }
  const Vec& weights() const { return weights_; }

  Vec& states() { return states_; }
  const Vec& states() const { return states_; }

  // Rescales the weights to sum to exactly 1; throws AllWeightsZero when the
  // current sum is zero or not finite.
  void normalize_weights();

  // Throws Error when an invariant is broken (context tags the message).
  void validate(const char* context) const;

 private:
  std::size_t dim_ = 0;
  Vec states_;
  Vec weights_;
};

// Linear-Gaussian observation model y = H x + e, e ~ N(0, R).
struct ObservationOp {
  Matrix H;
  Matrix R;

  std::size_t obs_dim() const { return H.rows(); }
  std::size_t state_dim() const { return H.cols(); }

  // Throws Error unless H is n-by-state_dim and R is symmetric n-by-n.
  void validate(std::size_t state_dim) const;
  // True when every off-diagonal entry of R is exactly zero.
  bool diagonal_r() const;
};

// Convenience: H x with no noise.
Vec observe(const ObservationOp& obs, std::span<const double> x);

}  // namespace engsf
