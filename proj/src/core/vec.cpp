#include "engsf/core/vec.hpp"

#include <cmath>
#include <stdexcept>

#include "engsf/simd/kernels.hpp"

namespace engsf {

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
  }
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: shape mismatch");
  Matrix c(a.rows(), b.cols());
  // Row-times-matrix via axpy keeps the inner loops contiguous.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* ci = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      simd::axpy(a(i, k), b.row(k), ci, b.cols());
    }
  }
  return c;
}

Vec matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw std::invalid_argument("matvec: shape mismatch");
  Vec y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    y[i] = simd::dot(a.row(i), x.data(), a.cols());
  }
  return y;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("add: shape mismatch");
  }
  Matrix c = a;
  simd::axpy(1.0, b.data(), c.data(), b.rows() * b.cols());
  return c;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("subtract: shape mismatch");
  }
  Matrix c = a;
  simd::axpy(-1.0, b.data(), c.data(), b.rows() * b.cols());
  return c;
}

Matrix scaled(const Matrix& a, double s) {
  Matrix c(a.rows(), a.cols());
  simd::add_scaled(c.data(), s, a.data(), c.data(), a.rows() * a.cols());
  return c;
}

double trace(const Matrix& a) {
  double t = 0.0;
  for (std::size_t i = 0; i < std::min(a.rows(), a.cols()); ++i) t += a(i, i);
  return t;
}

void symmetrize(Matrix& a) {
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = r + 1; c < a.cols(); ++c) {
      const double v = 0.5 * (a(r, c) + a(c, r));
      a(r, c) = v;
      a(c, r) = v;
    }
  }
}

bool all_finite(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace engsf
