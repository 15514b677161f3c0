// core.hpp -- domain types shared by every thermotrack module.
//
// A sensor is an M-detector thermopile array (8x8 by default, row-major).
// Frames carry absolute temperatures in degrees Celsius; all internal math
// works on dequantized doubles and quantization only happens in codec.hpp.
#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace thermotrack {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RangeError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct UsageError : Error { using Error::Error; };
struct NumericError : Error { using Error::Error; };
struct LayoutError : Error { using Error::Error; };
struct FitError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct InputError : Error { using Error::Error; };

inline constexpr double kPi = std::numbers::pi;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

// ---------------------------------------------------------------------------
// Frames
// ---------------------------------------------------------------------------
struct ThermalFrame {
  std::uint64_t sensor_id{0};
  std::int64_t ts_ms{0};  ///< milliseconds since epoch
  Vector temps;           ///< detector temperatures, degC

  std::size_t size() const { return static_cast<std::size_t>(temps.size()); }
};

/// Throws InputError unless the frame has `m` finite temperatures.
inline void validate_frame(const ThermalFrame& frame, std::size_t m) {
  if (frame.size() != m) {
    throw InputError("frame has " + std::to_string(frame.size()) +
                     " detectors, layout expects " + std::to_string(m));
  }
  for (Eigen::Index i = 0; i < frame.temps.size(); ++i) {
    if (!std::isfinite(frame.temps[i])) {
      throw InputError("frame detector " + std::to_string(i) + " is not finite");
    }
  }
}

// ---------------------------------------------------------------------------
// Layout
// ---------------------------------------------------------------------------
enum class Mount { Wall, Ceiling };

inline const char* to_string(Mount m) { return m == Mount::Wall ? "wall" : "ceiling"; }

/// Binary detector mask b_k, one byte per detector.
using Mask = std::vector<std::uint8_t>;

inline std::vector<std::size_t> mask_support(const Mask& mask) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] != 0) idx.push_back(i);
  }
  return idx;
}

struct RoiSpec {
  std::size_t index{0};  ///< zero-based ROI index
  Mask mask;             ///< b_k; may be empty before build_geometric_masks
  double aoa_deg{0.0};   ///< wall: theta_bar_k
  std::array<double, 2> footprint_m{0.0, 0.0};  ///< ceiling: x_bar_k on the floor plane
  double tau{0.8};       ///< per-ROI threshold tau_k, degC
};

struct SensorLayout {
  Mount mount{Mount::Wall};
  std::size_t rows{8};
  std::size_t cols{8};
  double fov_deg{60.0};
  std::vector<RoiSpec> rois;
  double d_min{0.25};     ///< wall only, m
  double d_max{3.5};      ///< wall only, m
  double height_m{3.0};   ///< ceiling only, m
  double cell_m{0.5};     ///< ceiling ROI cell size, m

  std::size_t detector_count() const { return rows * cols; }
  std::size_t roi_count() const { return rois.size(); }
};

/// Structural checks. Masks are checked only when `require_masks` is set.
inline void validate_layout(const SensorLayout& layout, bool require_masks = true) {
  const std::size_t m = layout.detector_count();
  if (m == 0) throw LayoutError("layout has no detectors");
  if (layout.rois.empty()) throw LayoutError("layout has no ROIs");
  if (layout.rois.size() > m) throw LayoutError("more ROIs than detectors (K > M)");
  if (!(layout.fov_deg > 0.0 && layout.fov_deg < 180.0)) {
    throw LayoutError("field of view must be in (0, 180) degrees");
  }
  if (layout.mount == Mount::Wall && !(layout.d_min >= 0.0 && layout.d_min < layout.d_max)) {
    throw LayoutError("wall layout needs 0 <= d_min < d_max");
  }
  if (layout.mount == Mount::Ceiling && !(layout.height_m > 0.0)) {
    throw LayoutError("ceiling layout needs a positive mount height");
  }
  bool any = false;
  for (std::size_t k = 0; k < layout.rois.size(); ++k) {
    const RoiSpec& roi = layout.rois[k];
    if (!(roi.tau > 0.0)) throw LayoutError("ROI " + std::to_string(k) + " has tau <= 0");
    if (!require_masks) continue;
    if (roi.mask.size() != m) {
      throw LayoutError("ROI " + std::to_string(k) + " mask length differs from M");
    }
    if (mask_support(roi.mask).empty()) {
      throw LayoutError("ROI " + std::to_string(k) + " mask is all-zero");
    }
    any = true;
  }
  if (require_masks && !any) throw LayoutError("union of ROI masks is empty");
}

// ---------------------------------------------------------------------------
// Parameters (defaults follow the published sensor parameter table)
// ---------------------------------------------------------------------------
enum class AlphaMode { Auto, Linear, Quadratic };

struct SignatureParams {
  double sigma0{4.5};             ///< s-relu offset, degC
  double gamma{1.1};              ///< s-relu slope, degC/m
  double sigma_t_wall{1.5};       ///< signature spread, wall mount, degC
  double sigma_t_ceiling{0.3};    ///< signature spread, ceiling mount, degC
  double sigma_bar_ceiling{1.3};  ///< constant increase for a 3 m ceiling, degC
  double tau_wall{0.8};
  double tau_ceiling{0.4};
  double lambda_lasso{41.0};
};

struct BackgroundParams {
  double lambda_mu{0.99};
  double lambda_c{0.995};
  double ridge{1e-4};  ///< degC^2
  bool diagonal{false};
  bool gate_updates{true};
};

struct TrackingParams {
  double delta_d{0.25};        ///< m
  double walk_speed_mps{0.5};
  double frame_interval_s{0.3};
};

struct CountingParams {
  std::size_t zeta{3};
  double p_stay{0.8};
  double p_move{0.15};
  double p_exit{0.05};
  double p_birth{0.05};
  double adjacency_radius_m{0.55};
  double alert_threshold_m{1.0};
  std::int64_t alert_window_ms{60'000};
};

struct ScreeningParams {
  double alpha0_lin{0.67};
  double alpha1_lin{0.45};
  double alpha0_quad{0.66};
  double alpha1_quad{0.54};
  double alpha2_quad{-0.21};
  double alpha_switch_m{0.75};
  AlphaMode alpha_mode{AlphaMode::Auto};
  double beta0{1.0};
  double beta1{-0.09};
  double sigma_body{0.4};
  double xi{-0.2};
  std::size_t q{12};
  double t_max{37.5};
  double t_min{20.0};
  double t_amb_low{20.0};
  double t_amb_high{28.0};
  double max_distance_m{1.1};
  double radar_std_m{0.1};
  double ir_std_m{0.32};
  double fusion_gate_m{0.3};
};

struct ModelParams {
  SignatureParams signature;
  BackgroundParams background;
  TrackingParams tracking;
  CountingParams counting;
  ScreeningParams screening;
};

inline void validate_params(const ModelParams& p) {
  auto in_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!in_unit(p.background.lambda_mu) || !in_unit(p.background.lambda_c)) {
    throw ConfigError("smoothing constants must lie in (0, 1)");
  }
  if (p.background.ridge < 0.0) throw ConfigError("ridge must be >= 0");
  if (!(p.tracking.delta_d > 0.0)) throw ConfigError("delta_d must be positive");
  if (!(p.tracking.frame_interval_s > 0.0)) throw ConfigError("frame interval must be positive");
  if (p.tracking.walk_speed_mps < 0.0) throw ConfigError("walk speed must be >= 0");
  if (p.screening.q < 1) throw ConfigError("Q must be >= 1");
  if (!(p.screening.sigma_body > 0.0)) throw ConfigError("sigma_body must be positive");
  if (!(p.screening.t_min > 0.0)) throw ConfigError("T_min must be positive");
  if (p.counting.zeta < 1) throw ConfigError("zeta must be >= 1");
  if (!(p.signature.sigma_t_wall > 0.0 && p.signature.sigma_t_ceiling > 0.0)) {
    throw ConfigError("sigma_T must be positive");
  }
}

}  // namespace thermotrack
