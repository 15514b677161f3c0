// gaussian.hpp -- multivariate normal log-density through a Cholesky factor.
#pragma once

#include "thermotrack/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>

namespace thermotrack {

class GaussianLogDensity {
 public:
  explicit GaussianLogDensity(const Matrix& cov) : llt_(cov) {
    if (cov.rows() != cov.cols() || cov.rows() == 0) {
      throw NumericError("covariance must be a non-empty square matrix");
    }
    if (llt_.info() != Eigen::Success) {
      throw NumericError("covariance is not positive definite (increase the ridge)");
    }
    const Vector diag = llt_.matrixLLT().diagonal();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < diag.size(); ++i) log_det += 2.0 * std::log(diag[i]);
    const double n = static_cast<double>(cov.rows());
    log_norm_ = -0.5 * (n * std::log(2.0 * kPi) + log_det);
  }

  Eigen::Index dim() const { return llt_.matrixLLT().rows(); }

  /// log N(x; mean, C) at its mode.
  double log_normalizer() const { return log_norm_; }

  double operator()(const Vector& x, const Vector& mean) const {
    const Vector z = llt_.matrixL().solve(x - mean);
    return log_norm_ - 0.5 * z.squaredNorm();
  }

 private:
  Eigen::LLT<Matrix> llt_;
  double log_norm_{0.0};
};

/// log(sum(exp(v))) without overflow; -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double hi = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

inline double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (a == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

}  // namespace thermotrack
