// records.hpp -- plain output/ground-truth records exchanged between the
// estimators, the simulator and the JSONL layer.
#pragma once

#include "thermotrack/core.hpp"

#include <optional>
#include <string>
#include <vector>

namespace thermotrack {

/// One wall-tracker output line (one per ROI per frame).
struct TrackEstimate {
  std::uint64_t sensor_id{0};
  std::int64_t ts_ms{0};
  std::size_t roi{0};
  bool occupied{false};
  std::optional<double> d_hat_m;
  std::optional<double> theta_hat_deg;
  std::optional<std::vector<double>> posterior;  ///< probabilities over the distance grid
};

struct TruthBody {
  std::optional<std::size_t> roi;  ///< ROI containing the body centre, if any
  std::vector<std::size_t> rois;   ///< every ROI the body occupies this frame
  double d_m{0.0};                 ///< wall: range
  double theta_deg{0.0};           ///< wall: azimuth
  double x_m{0.0};                 ///< ceiling: floor position
  double y_m{0.0};
  std::optional<double> t_body_c;
};

struct TruthRecord {
  std::uint64_t sensor_id{0};
  std::int64_t ts_ms{0};
  std::vector<TruthBody> bodies;
};

/// External radar range estimate.
struct RadarSample {
  std::int64_t ts_ms{0};
  double d_m{0.0};
  double quality{1.0};
};

}  // namespace thermotrack
