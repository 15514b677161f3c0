// signature_fit.hpp -- supervised signature learning.
//
//  * learn_signatures_lasso: covariance-weighted Lasso for the full M x K
//    signature matrix, solved by cyclic coordinate descent.
//  * fit_srelu: least-squares fit of (sigma0, gamma) to distance/increase pairs.
#pragma once

#include "thermotrack/core.hpp"
#include "thermotrack/signature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>

namespace thermotrack {

struct TrainingSample {
  std::vector<std::uint8_t> occupancy;  ///< r_i, length K
  Vector frame;                         ///< y_i, length M
};

struct LassoOptions {
  double tolerance{1e-8};
  int max_sweeps{10'000};
};

struct LearnedSignatureMatrix {
  Matrix H;  ///< M x K, degC
  double lambda{0.0};
  double residual{0.0};                 ///< final objective value
  std::vector<double> objective_trace;  ///< objective after each sweep
  int sweeps{0};
  bool converged{false};
};

inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

/// Minimises sum_i (y_i - mu - H r_i)' C^-1 (y_i - mu - H r_i) + lambda * |H|_1.
///
/// With P = C^-1 = L'L the problem is an ordinary Lasso on vec(H) with the
/// whitened design (r_i' (x) L). Coordinate descent works on its Gram form
/// S_rr (x) P, so each sweep costs O(M^2 K^2) regardless of N.
inline LearnedSignatureMatrix learn_signatures_lasso(std::span<const TrainingSample> training,
                                                     const Vector& mu, const Matrix& cov,
                                                     double lambda, LassoOptions opts = {}) {
  if (training.empty()) throw UsageError("Lasso training set is empty");
  if (lambda < 0.0) throw UsageError("lambda must be >= 0");
  const Eigen::Index m = mu.size();
  if (cov.rows() != m || cov.cols() != m) throw UsageError("covariance size differs from mu");
  const Eigen::Index k_count = static_cast<Eigen::Index>(training.front().occupancy.size());
  if (k_count == 0) throw UsageError("occupancy vectors are empty");

  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw NumericError("background covariance is singular; add ridge regularization");
  }
  const Matrix prec = llt.solve(Matrix::Identity(m, m));

  Matrix s_rr = Matrix::Zero(k_count, k_count);
  Matrix s_yr = Matrix::Zero(m, k_count);
  double s_yy = 0.0;
  Vector r(k_count);
  for (const auto& sample : training) {
    if (static_cast<Eigen::Index>(sample.occupancy.size()) != k_count) {
      throw UsageError("occupancy vectors differ in length");
    }
    if (sample.frame.size() != m) throw UsageError("training frame length differs from M");
    for (Eigen::Index k = 0; k < k_count; ++k) {
      const auto v = sample.occupancy[static_cast<std::size_t>(k)];
      if (v > 1) throw UsageError("occupancy vectors must be binary");
      r[k] = v;
    }
    const Vector y = sample.frame - mu;
    s_rr.noalias() += r * r.transpose();
    s_yr.noalias() += y * r.transpose();
    s_yy += y.dot(prec * y);
  }

  const Matrix b = prec * s_yr;  // linear term
  Matrix h = Matrix::Zero(m, k_count);
  Matrix a = Matrix::Zero(m, k_count);  // P H S_rr, kept in sync with h

  auto objective = [&]() {
    // trace(H' P H S_rr) = sum(H .* A), trace(H' P S_yr) = sum(H .* B)
    return s_yy - 2.0 * (h.array() * b.array()).sum() + (h.array() * a.array()).sum() +
           lambda * h.cwiseAbs().sum();
  };

  LearnedSignatureMatrix out;
  out.lambda = lambda;
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    double max_delta = 0.0;
    for (Eigen::Index k = 0; k < k_count; ++k) {
      const double skk = s_rr(k, k);
      for (Eigen::Index i = 0; i < m; ++i) {
        const double quad = prec(i, i) * skk;
        const double old = h(i, k);
        double next = 0.0;
        if (quad > 0.0) {
          next = soft_threshold(quad * old - (a(i, k) - b(i, k)), 0.5 * lambda) / quad;
        }
        const double delta = next - old;
        if (delta != 0.0) {
          h(i, k) = next;
          a.noalias() += delta * prec.col(i) * s_rr.row(k);
          max_delta = std::max(max_delta, std::abs(delta));
        }
      }
    }
    out.objective_trace.push_back(objective());
    out.sweeps = sweep + 1;
    if (max_delta < opts.tolerance) {
      out.converged = true;
      break;
    }
  }
  out.H = std::move(h);
  out.residual = out.objective_trace.back();
  return out;
}

// ---------------------------------------------------------------------------
// s-relu fit
// ---------------------------------------------------------------------------
struct DistanceSample {
  double d{0.0};         ///< m
  double increase{0.0};  ///< observed temperature increase, degC
};

struct SreluFit {
  double sigma0{0.0};
  double gamma{0.0};
  double rmse{0.0};
  int iterations{0};
};

/// Levenberg-Marquardt least squares for sigma_bar(d; sigma0, gamma).
inline SreluFit fit_srelu(std::span<const DistanceSample> samples) {
  std::map<double, std::pair<double, int>> by_d;
  for (const auto& s : samples) {
    if (!std::isfinite(s.d) || !std::isfinite(s.increase)) throw FitError("non-finite sample");
    auto& acc = by_d[s.d];
    acc.first += s.increase;
    acc.second += 1;
  }
  if (by_d.size() < 2) throw FitError("s-relu fit needs at least two distinct distances");

  // gamma from the slope between the nearest and farthest distance groups,
  // sigma0 from the largest group mean plus log 2.
  const auto& [d_near, near] = *by_d.begin();
  const auto& [d_far, far] = *by_d.rbegin();
  const double y_near = near.first / near.second;
  const double y_far = far.first / far.second;
  double gamma = std::max((y_near - y_far) / (d_far - d_near), 1e-3);
  double max_mean = -std::numeric_limits<double>::infinity();
  for (const auto& [d, acc] : by_d) max_mean = std::max(max_mean, acc.first / acc.second);
  double sigma0 = max_mean + std::log(2.0);

  const auto n = static_cast<Eigen::Index>(samples.size());
  auto cost_at = [&](double s0, double g) {
    double c = 0.0;
    for (const auto& s : samples) {
      const double e = srelu_mean(s.d, s0, g) - s.increase;
      c += e * e;
    }
    return c;
  };

  double cost = cost_at(sigma0, gamma);
  double damping = 1e-3;
  int it = 0;
  for (; it < 500; ++it) {
    Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
    Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& s = samples[static_cast<std::size_t>(i)];
      const double e = srelu_mean(s.d, sigma0, gamma) - s.increase;
      const double ds0 = srelu_dsigma0(s.d, sigma0, gamma);
      const Eigen::Vector2d j(ds0, -s.d * ds0);
      jtj.noalias() += j * j.transpose();
      jtr.noalias() += j * e;
    }
    bool accepted = false;
    Eigen::Vector2d step = Eigen::Vector2d::Zero();
    for (int tries = 0; tries < 60 && !accepted; ++tries) {
      Eigen::Matrix2d lhs = jtj;
      lhs.diagonal() += damping * jtj.diagonal().cwiseMax(1e-12);
      step = lhs.ldlt().solve(-jtr);
      const double next = cost_at(sigma0 + step[0], gamma + step[1]);
      if (std::isfinite(next) && next <= cost) {
        sigma0 += step[0];
        gamma += step[1];
        cost = next;
        damping = std::max(damping / 3.0, 1e-15);
        accepted = true;
      } else {
        damping *= 4.0;
      }
    }
    if (!accepted) break;
    if (step.norm() <= 1e-13 * (1.0 + std::abs(sigma0) + std::abs(gamma))) break;
  }
  return {sigma0, gamma, std::sqrt(cost / static_cast<double>(n)), it};
}

}  // namespace thermotrack
