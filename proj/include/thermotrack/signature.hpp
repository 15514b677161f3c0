// signature.hpp -- body-induced thermal signatures h_k = sigma * b_k.
//
// Wall mounts use a distance-dependent increase sigma_bar(d) (softplus law);
// ceiling mounts use a constant increase. Masks b_k come from the layout
// geometry alone.
#pragma once

#include "thermotrack/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <utility>

namespace thermotrack {

/// Mean temperature increase log(1 + exp(sigma0 - gamma * d)), overflow-safe.
inline double srelu_mean(double d, double sigma0, double gamma) {
  const double x = sigma0 - gamma * d;
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

/// d sigma_bar / d sigma0 (the logistic function of the same argument).
inline double srelu_dsigma0(double d, double sigma0, double gamma) {
  const double x = sigma0 - gamma * d;
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Azimuth of the centre of detector column `c`, degrees. Column 0 is the
/// leftmost (most negative) azimuth.
inline double column_azimuth_deg(const SensorLayout& layout, std::size_t c) {
  const double w = layout.fov_deg / static_cast<double>(layout.cols);
  return -0.5 * layout.fov_deg + (static_cast<double>(c) + 0.5) * w;
}

/// Elevation of the centre of detector row `r`, degrees (row 0 most negative).
inline double row_elevation_deg(const SensorLayout& layout, std::size_t r) {
  const double w = layout.fov_deg / static_cast<double>(layout.rows);
  return -0.5 * layout.fov_deg + (static_cast<double>(r) + 0.5) * w;
}

namespace detail {

inline std::vector<std::size_t> wall_column_owner(const SensorLayout& layout) {
  const std::size_t k_count = layout.rois.size();
  const double half = 0.5 * layout.fov_deg;
  std::vector<std::size_t> order(k_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return layout.rois[a].aoa_deg < layout.rois[b].aoa_deg;
  });
  for (std::size_t k : order) {
    const double a = layout.rois[k].aoa_deg;
    if (!std::isfinite(a) || a < -half - 1e-9 || a > half + 1e-9) {
      throw LayoutError("ROI " + std::to_string(k) + " AOA " + std::to_string(a) +
                        " deg lies outside the field of view");
    }
  }
  // Sector boundaries are midpoints between neighbouring AOAs.
  std::vector<double> upper(k_count);
  for (std::size_t i = 0; i < k_count; ++i) {
    upper[i] = (i + 1 < k_count)
                   ? 0.5 * (layout.rois[order[i]].aoa_deg + layout.rois[order[i + 1]].aoa_deg)
                   : half + 1.0;
  }
  std::vector<std::size_t> owner(layout.cols);
  for (std::size_t c = 0; c < layout.cols; ++c) {
    const double az = column_azimuth_deg(layout, c);
    std::size_t i = 0;
    while (i + 1 < k_count && az >= upper[i]) ++i;
    owner[c] = order[i];
  }
  return owner;
}

}  // namespace detail

/// Angular span [lo, hi] (deg) of the detector columns in a wall ROI's mask.
inline std::pair<double, double> roi_angular_span(const SensorLayout& layout, std::size_t k) {
  const double w = layout.fov_deg / static_cast<double>(layout.cols);
  const Mask& mask = layout.rois.at(k).mask;
  double lo = 1e9;
  double hi = -1e9;
  for (std::size_t i : mask_support(mask)) {
    const double az = column_azimuth_deg(layout, i % layout.cols);
    lo = std::min(lo, az - 0.5 * w);
    hi = std::max(hi, az + 0.5 * w);
  }
  if (lo > hi) throw LayoutError("ROI " + std::to_string(k) + " has an empty mask");
  return {lo, hi};
}

/// Floor-plane projection (m) of detector (row, col) for a ceiling mount.
inline std::array<double, 2> detector_floor_point(const SensorLayout& layout, std::size_t r,
                                                  std::size_t c) {
  return {layout.height_m * std::tan(deg2rad(column_azimuth_deg(layout, c))),
          layout.height_m * std::tan(deg2rad(row_elevation_deg(layout, r)))};
}

/// Geometric masks b_k for every ROI of the layout.
///
/// Wall: each detector column belongs to the ROI whose angular sector (split at
/// midpoints between neighbouring AOAs) contains the column azimuth; all rows of
/// that column are selected. Ceiling: a ROI selects the detectors whose floor
/// projection falls inside its square cell (side `cell_m`) centred on the
/// footprint, falling back to the nearest detector when the cell is smaller
/// than a pixel footprint.
inline std::vector<Mask> build_geometric_masks(const SensorLayout& layout) {
  validate_layout(layout, /*require_masks=*/false);
  const std::size_t m = layout.detector_count();
  const std::size_t k_count = layout.rois.size();
  std::vector<Mask> masks(k_count, Mask(m, 0));

  if (layout.mount == Mount::Wall) {
    const auto owner = detail::wall_column_owner(layout);
    for (std::size_t r = 0; r < layout.rows; ++r) {
      for (std::size_t c = 0; c < layout.cols; ++c) masks[owner[c]][r * layout.cols + c] = 1;
    }
    for (std::size_t k = 0; k < k_count; ++k) {
      if (mask_support(masks[k]).empty()) {
        throw LayoutError("ROI " + std::to_string(k) + " covers no detector column");
      }
    }
    return masks;
  }

  const double half_cell = 0.5 * layout.cell_m;
  const double half_fov = std::tan(deg2rad(0.5 * layout.fov_deg)) * layout.height_m;
  for (std::size_t k = 0; k < k_count; ++k) {
    const auto& fp = layout.rois[k].footprint_m;
    if (std::abs(fp[0]) > half_fov || std::abs(fp[1]) > half_fov) {
      throw LayoutError("ROI " + std::to_string(k) + " footprint lies outside the field of view");
    }
    double best = 1e300;
    std::size_t best_i = 0;
    for (std::size_t r = 0; r < layout.rows; ++r) {
      for (std::size_t c = 0; c < layout.cols; ++c) {
        const auto p = detector_floor_point(layout, r, c);
        const double dx = p[0] - fp[0];
        const double dy = p[1] - fp[1];
        if (dx >= -half_cell && dx < half_cell && dy >= -half_cell && dy < half_cell) {
          masks[k][r * layout.cols + c] = 1;
        }
        const double dist = dx * dx + dy * dy;
        if (dist < best) {
          best = dist;
          best_i = r * layout.cols + c;
        }
      }
    }
    if (mask_support(masks[k]).empty()) masks[k][best_i] = 1;
  }
  return masks;
}

/// Returns a copy of `layout` with every ROI mask rebuilt from geometry.
inline SensorLayout with_geometric_masks(SensorLayout layout) {
  auto masks = build_geometric_masks(layout);
  for (std::size_t k = 0; k < masks.size(); ++k) {
    layout.rois[k].mask = std::move(masks[k]);
    layout.rois[k].index = k;
  }
  validate_layout(layout);
  return layout;
}

// ---------------------------------------------------------------------------
// Signature model
// ---------------------------------------------------------------------------
enum class SignatureVariant { WallDistanceDependent, CeilingConstant };

class SignatureModel {
 public:
  SignatureModel(SensorLayout layout, const SignatureParams& params)
      : layout_(std::move(layout)), params_(params) {
    validate_layout(layout_);
    variant_ = layout_.mount == Mount::Wall ? SignatureVariant::WallDistanceDependent
                                            : SignatureVariant::CeilingConstant;
    if (variant_ == SignatureVariant::CeilingConstant && !(params_.sigma_bar_ceiling > 0.0)) {
      throw ConfigError("ceiling signature needs sigma_bar > 0");
    }
    supports_.reserve(layout_.rois.size());
    for (const auto& roi : layout_.rois) supports_.push_back(mask_support(roi.mask));
  }

  SignatureVariant variant() const { return variant_; }
  const SensorLayout& layout() const { return layout_; }
  const SignatureParams& params() const { return params_; }
  std::size_t roi_count() const { return layout_.rois.size(); }
  std::size_t detector_count() const { return layout_.detector_count(); }
  const Mask& mask(std::size_t k) const { return layout_.rois.at(k).mask; }
  const std::vector<std::size_t>& support(std::size_t k) const { return supports_.at(k); }

  /// sigma_T for this mount.
  double spread() const {
    return variant_ == SignatureVariant::WallDistanceDependent ? params_.sigma_t_wall
                                                               : params_.sigma_t_ceiling;
  }

  /// sigma_bar(d) for wall mounts, the constant sigma_bar for ceilings.
  double mean_increase(std::optional<double> d) const {
    check_distance_arg(d);
    if (variant_ == SignatureVariant::WallDistanceDependent) {
      return srelu_mean(*d, params_.sigma0, params_.gamma);
    }
    return params_.sigma_bar_ceiling;
  }

  /// h_k for a present target: mean increase times b_k.
  Vector signature(std::size_t k, std::optional<double> d) const {
    if (k >= roi_count()) throw UsageError("ROI index " + std::to_string(k) + " out of range");
    const double s = mean_increase(d);
    Vector h = Vector::Zero(static_cast<Eigen::Index>(detector_count()));
    for (std::size_t i : supports_[k]) h[static_cast<Eigen::Index>(i)] = s;
    return h;
  }

  /// h_k for an absent target.
  Vector absent() const { return Vector::Zero(static_cast<Eigen::Index>(detector_count())); }

 private:
  void check_distance_arg(const std::optional<double>& d) const {
    if (variant_ == SignatureVariant::WallDistanceDependent && !d) {
      throw UsageError("wall signature needs a distance");
    }
    if (variant_ == SignatureVariant::CeilingConstant && d) {
      throw UsageError("ceiling signature takes no distance");
    }
    if (d && !(*d >= 0.0)) throw UsageError("distance must be >= 0");
  }

  SensorLayout layout_;
  SignatureParams params_;
  SignatureVariant variant_;
  std::vector<std::vector<std::size_t>> supports_;
};

}  // namespace thermotrack
