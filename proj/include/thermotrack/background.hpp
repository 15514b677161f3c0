// background.hpp -- empty-scene Gaussian statistics (mu, C) with exponential
// forgetting (MEWMA for the mean, MEWMC for the covariance).
#pragma once

#include "thermotrack/core.hpp"

#include <span>

namespace thermotrack {

struct BackgroundModel {
  Vector mu;    ///< degC
  Matrix cov;   ///< degC^2, ridge included
  double lambda_mu{0.99};
  double lambda_c{0.995};
  double ridge{1e-4};
  bool diagonal{false};
  std::uint64_t frames_seen{0};

  std::size_t size() const { return static_cast<std::size_t>(mu.size()); }
};

/// Startup estimate from >= 2 frames of an empty scene: sample mean and
/// (unbiased) sample covariance plus ridge * I.
inline BackgroundModel init_background(std::span<const ThermalFrame> frames,
                                       const BackgroundParams& params = {}) {
  if (frames.size() < 2) throw UsageError("background needs at least 2 empty-scene frames");
  const Eigen::Index m = frames.front().temps.size();
  if (m == 0) throw UsageError("empty frames");
  Vector mean = Vector::Zero(m);
  for (const auto& f : frames) {
    if (f.temps.size() != m) throw UsageError("background frames differ in length");
    mean += f.temps;
  }
  mean /= static_cast<double>(frames.size());
  Matrix cov = Matrix::Zero(m, m);
  for (const auto& f : frames) {
    const Vector d = f.temps - mean;
    if (params.diagonal) {
      cov.diagonal().array() += d.array().square();
    } else {
      cov.selfadjointView<Eigen::Lower>().rankUpdate(d);
    }
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= static_cast<double>(frames.size() - 1);
  cov.diagonal().array() += params.ridge;

  BackgroundModel bg;
  bg.mu = std::move(mean);
  bg.cov = std::move(cov);
  bg.lambda_mu = params.lambda_mu;
  bg.lambda_c = params.lambda_c;
  bg.ridge = params.ridge;
  bg.diagonal = params.diagonal;
  bg.frames_seen = frames.size();
  return bg;
}

/// One MEWMA/MEWMC step. The ridge stays at exactly `ridge` (it is removed
/// before smoothing and re-added afterwards).
inline BackgroundModel update_background(BackgroundModel bg, const ThermalFrame& frame) {
  if (frame.temps.size() != bg.mu.size()) throw InputError("frame length differs from background");
  bg.mu = bg.lambda_mu * bg.mu + (1.0 - bg.lambda_mu) * frame.temps;
  const Vector d = frame.temps - bg.mu;
  bg.cov.diagonal().array() -= bg.ridge;
  if (bg.diagonal) {
    bg.cov.diagonal() = bg.lambda_c * bg.cov.diagonal() +
                        (1.0 - bg.lambda_c) * d.array().square().matrix();
  } else {
    bg.cov = bg.lambda_c * bg.cov + (1.0 - bg.lambda_c) * (d * d.transpose());
    bg.cov = 0.5 * (bg.cov + bg.cov.transpose()).eval();
  }
  bg.cov.diagonal().array() += bg.ridge;
  ++bg.frames_seen;
  return bg;
}

/// mu_k and the principal submatrix C_k on the support of one mask.
struct MaskedBackground {
  std::vector<std::size_t> support;
  Vector mu;
  Matrix cov;
};

inline MaskedBackground subset(const BackgroundModel& bg, std::span<const std::size_t> support) {
  if (support.empty()) throw UsageError("cannot subset the background on an empty mask");
  const auto n = static_cast<Eigen::Index>(support.size());
  MaskedBackground out;
  out.support.assign(support.begin(), support.end());
  out.mu.resize(n);
  out.cov.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto si = static_cast<Eigen::Index>(support[static_cast<std::size_t>(i)]);
    if (si >= bg.mu.size()) throw UsageError("mask index outside the background");
    out.mu[i] = bg.mu[si];
    for (Eigen::Index j = 0; j < n; ++j) {
      out.cov(i, j) = bg.cov(si, static_cast<Eigen::Index>(support[static_cast<std::size_t>(j)]));
    }
  }
  return out;
}

inline MaskedBackground subset(const BackgroundModel& bg, const Mask& mask) {
  if (mask.size() != bg.size()) throw UsageError("mask length differs from background");
  const auto support = mask_support(mask);
  return subset(bg, std::span<const std::size_t>(support));
}

/// Restriction of a full vector to a support.
inline Vector gather(const Vector& v, std::span<const std::size_t> support) {
  Vector out(static_cast<Eigen::Index>(support.size()));
  for (std::size_t i = 0; i < support.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(support[i])];
  }
  return out;
}

}  // namespace thermotrack
