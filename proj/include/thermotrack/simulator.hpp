// simulator.hpp -- generative scene and frame synthesis for the linear model
// y = sum_k sigma_k b_k r_k + w, w ~ N(mu*, C*), plus trajectory and
// screening-subject generators.
//
// Frames are a pure function of (scene, t): each frame has its own RNG stream
// seeded from (scene.seed, t). Nothing here evaluates a likelihood.
#pragma once

#include "thermotrack/core.hpp"
#include "thermotrack/records.hpp"
#include "thermotrack/screening.hpp"
#include "thermotrack/signature.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace thermotrack {

/// One trajectory sample. Wall scenes use (d, theta), ceiling scenes (x, y).
struct Pose {
  double d_m{0.0};
  double theta_deg{0.0};
  double x_m{0.0};
  double y_m{0.0};
};

using Trajectory = std::vector<Pose>;

struct SceneBody {
  std::size_t start_frame{0};  ///< first frame index at which the body is present
  Trajectory poses;            ///< one pose per frame from start_frame on
  std::optional<double> t_body_c;

  bool present(std::size_t t) const { return t >= start_frame && t - start_frame < poses.size(); }
  const Pose& pose(std::size_t t) const { return poses[t - start_frame]; }
};

struct Scene {
  SensorLayout layout;  ///< masks must be populated
  SignatureParams signature;
  Vector mu;   ///< true background mean
  Matrix cov;  ///< true noise covariance C*
  std::vector<SceneBody> bodies;
  std::uint64_t seed{0};
  std::uint64_t sensor_id{1};
  std::int64_t t0_ms{0};
  std::int64_t dt_ms{300};
  std::size_t n_frames{0};
  double body_half_width_m{0.25};  ///< wall: lateral half-width of a body
};

/// Flat-ish empty-scene truth: T_amb plus a gentle column gradient, diagonal
/// noise with the given per-detector std (0.08 degC is the sensor NETD).
inline void set_default_background(Scene& scene, double t_amb = 23.0, double noise_std = 0.08) {
  const std::size_t m = scene.layout.detector_count();
  scene.mu.resize(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    const double c = static_cast<double>(i % scene.layout.cols);
    const double span = std::max<double>(1.0, static_cast<double>(scene.layout.cols - 1));
    scene.mu[static_cast<Eigen::Index>(i)] = t_amb + 0.2 * (c / span - 0.5);
  }
  scene.cov = Matrix::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m)) *
              (noise_std * noise_std);
}

struct SynthFrame {
  ThermalFrame frame;
  TruthRecord truth;
  std::vector<std::uint8_t> occupancy;  ///< true r_t
  std::vector<std::string> diagnostics;
};

/// Frame-local RNG: one independent stream per (seed, t).
inline std::mt19937_64 frame_rng(std::uint64_t seed, std::uint64_t t) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(t >> 32)};
  return std::mt19937_64(seq);
}

/// ROI of a ceiling layout whose half-open cell contains (x, y), if any.
inline std::optional<std::size_t> ceiling_roi_at(const SensorLayout& layout, double x, double y) {
  const double h = 0.5 * layout.cell_m;
  for (std::size_t k = 0; k < layout.rois.size(); ++k) {
    const auto& fp = layout.rois[k].footprint_m;
    if (x - fp[0] >= -h && x - fp[0] < h && y - fp[1] >= -h && y - fp[1] < h) return k;
  }
  return std::nullopt;
}

/// Renders frames of one scene. Caches the noise Cholesky factor.
class SceneRenderer {
 public:
  explicit SceneRenderer(Scene scene) : scene_(std::move(scene)) {
    validate_layout(scene_.layout);
    const auto m = static_cast<Eigen::Index>(scene_.layout.detector_count());
    if (scene_.mu.size() != m || scene_.cov.rows() != m || scene_.cov.cols() != m) {
      throw ConfigError("scene background size differs from the layout");
    }
    const Matrix off = scene_.cov - Matrix(scene_.cov.diagonal().asDiagonal());
    if (off.cwiseAbs().maxCoeff() == 0.0) {
      if ((scene_.cov.diagonal().array() < 0.0).any()) throw ConfigError("negative noise variance");
      chol_ = Matrix(scene_.cov.diagonal().cwiseSqrt().asDiagonal());
    } else {
      Eigen::LLT<Matrix> llt(scene_.cov);
      if (llt.info() != Eigen::Success) throw NumericError("scene covariance is not positive definite");
      chol_ = llt.matrixL();
    }
    for (std::size_t k = 0; k < scene_.layout.rois.size(); ++k) {
      supports_.push_back(mask_support(scene_.layout.rois[k].mask));
      if (scene_.layout.mount == Mount::Wall) spans_.push_back(roi_angular_span(scene_.layout, k));
    }
  }

  const Scene& scene() const { return scene_; }

  SynthFrame render(std::size_t t) const {
    const auto& layout = scene_.layout;
    const auto m = static_cast<Eigen::Index>(layout.detector_count());
    const std::size_t k_count = layout.rois.size();
    auto rng = frame_rng(scene_.seed, t);
    std::normal_distribution<double> unit(0.0, 1.0);

    SynthFrame out;
    out.occupancy.assign(k_count, 0);
    out.truth.sensor_id = scene_.sensor_id;
    out.truth.ts_ms = scene_.t0_ms + static_cast<std::int64_t>(t) * scene_.dt_ms;

    Vector z(m);
    for (Eigen::Index i = 0; i < m; ++i) z[i] = unit(rng);
    Vector y = scene_.mu + chol_ * z;

    const bool wall = layout.mount == Mount::Wall;
    const double sigma_t = wall ? scene_.signature.sigma_t_wall : scene_.signature.sigma_t_ceiling;
    for (std::size_t bi = 0; bi < scene_.bodies.size(); ++bi) {
      const auto& body = scene_.bodies[bi];
      if (!body.present(t)) continue;
      const Pose& pose = body.pose(t);
      TruthBody tb;
      tb.d_m = pose.d_m;
      tb.theta_deg = pose.theta_deg;
      tb.x_m = pose.x_m;
      tb.y_m = pose.y_m;
      tb.t_body_c = body.t_body_c;
      double mean = scene_.signature.sigma_bar_ceiling;
      if (wall) {
        mean = srelu_mean(pose.d_m, scene_.signature.sigma0, scene_.signature.gamma);
        const double half = rad2deg(std::atan(scene_.body_half_width_m / std::max(pose.d_m, 1e-6)));
        for (std::size_t k = 0; k < k_count; ++k) {
          const auto [lo, hi] = spans_[k];
          if (pose.theta_deg + half >= lo && pose.theta_deg - half <= hi) tb.rois.push_back(k);
          if (!tb.roi && pose.theta_deg >= lo && pose.theta_deg < hi) tb.roi = k;
        }
        if (!tb.roi && !spans_.empty() && pose.theta_deg == spans_.back().second) tb.roi = k_count - 1;
      } else {
        tb.roi = ceiling_roi_at(layout, pose.x_m, pose.y_m);
        if (tb.roi) tb.rois.push_back(*tb.roi);
      }
      if (tb.rois.empty()) {
        out.diagnostics.push_back("body " + std::to_string(bi) + " outside all ROIs at frame " +
                                  std::to_string(t) + "; dropped");
        continue;
      }
      for (std::size_t k : tb.rois) {
        if (out.occupancy[k]) {
          out.diagnostics.push_back("ROI " + std::to_string(k) + " already occupied at frame " +
                                    std::to_string(t) + "; body " + std::to_string(bi) +
                                    " adds no second signature there");
          continue;
        }
        out.occupancy[k] = 1;
        const double sigma = mean + sigma_t * unit(rng);
        for (std::size_t i : supports_[k]) y[static_cast<Eigen::Index>(i)] += sigma;
      }
      out.truth.bodies.push_back(std::move(tb));
    }

    out.frame.sensor_id = scene_.sensor_id;
    out.frame.ts_ms = out.truth.ts_ms;
    out.frame.temps = std::move(y);
    return out;
  }

  std::vector<SynthFrame> render_all() const {
    std::vector<SynthFrame> frames;
    frames.reserve(scene_.n_frames);
    for (std::size_t t = 0; t < scene_.n_frames; ++t) frames.push_back(render(t));
    return frames;
  }

 private:
  Scene scene_;
  Matrix chol_;
  std::vector<std::vector<std::size_t>> supports_;
  std::vector<std::pair<double, double>> spans_;
};

inline SynthFrame synth_frame(const Scene& scene, std::size_t t) { return SceneRenderer(scene).render(t); }

/// Empty-scene frames drawn from the scene's background only.
inline std::vector<ThermalFrame> synth_empty_frames(const Scene& scene, std::size_t n,
                                                    std::uint64_t stream = 0xB6) {
  Scene empty = scene;
  empty.bodies.clear();
  empty.seed = scene.seed ^ (stream * 0x9E3779B97F4A7C15ull);
  empty.t0_ms = scene.t0_ms - static_cast<std::int64_t>(n) * scene.dt_ms;
  SceneRenderer r(std::move(empty));
  std::vector<ThermalFrame> out;
  out.reserve(n);
  for (std::size_t t = 0; t < n; ++t) out.push_back(r.render(t).frame);
  return out;
}

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------
enum class TrajectoryKind { Static, RandomWalk, CorridorPass };

struct TrajectoryParams {
  Pose start;
  Pose end;                 ///< corridor_pass only
  std::size_t n_steps{1};   ///< static / random_walk: number of samples
  double speed_mps{0.5};
  double dt_s{0.3};
  double d_min{0.25};       ///< random_walk bounds on d
  double d_max{3.5};
};

/// Reflects v into [lo, hi].
inline double reflect_into(double v, double lo, double hi) {
  const double w = hi - lo;
  if (!(w > 0.0)) return lo;
  double u = std::fmod(v - lo, 2.0 * w);
  if (u < 0.0) u += 2.0 * w;
  return lo + (u <= w ? u : 2.0 * w - u);
}

/// static: n_steps copies of start. random_walk: reflected Gaussian steps of
/// std speed * dt in d on [d_min, d_max], other fields fixed. corridor_pass:
/// straight line start -> end at `speed_mps`, both endpoints included.
inline Trajectory gen_trajectory(TrajectoryKind kind, const TrajectoryParams& p, std::uint64_t seed) {
  Trajectory out;
  switch (kind) {
    case TrajectoryKind::Static:
      out.assign(p.n_steps, p.start);
      break;
    case TrajectoryKind::RandomWalk: {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> step(0.0, 1.0);
      const double sd = p.speed_mps * p.dt_s;
      Pose cur = p.start;
      cur.d_m = std::clamp(cur.d_m, p.d_min, p.d_max);
      for (std::size_t i = 0; i < p.n_steps; ++i) {
        out.push_back(cur);
        const double n = step(rng);
        if (sd > 0.0) cur.d_m = reflect_into(cur.d_m + sd * n, p.d_min, p.d_max);
      }
      break;
    }
    case TrajectoryKind::CorridorPass: {
      if (!(p.speed_mps > 0.0 && p.dt_s > 0.0)) throw ConfigError("corridor pass needs speed, dt > 0");
      const double len = std::hypot(p.end.x_m - p.start.x_m, p.end.y_m - p.start.y_m);
      const double len_wall = std::abs(p.end.d_m - p.start.d_m);
      const double path = len > 0.0 ? len : len_wall;
      const auto steps = static_cast<std::size_t>(std::llround(path / (p.speed_mps * p.dt_s)));
      for (std::size_t i = 0; i <= steps; ++i) {
        const double f = steps == 0 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps);
        out.push_back({p.start.d_m + f * (p.end.d_m - p.start.d_m),
                       p.start.theta_deg + f * (p.end.theta_deg - p.start.theta_deg),
                       p.start.x_m + f * (p.end.x_m - p.start.x_m),
                       p.start.y_m + f * (p.end.y_m - p.start.y_m)});
      }
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Screening subjects
// ---------------------------------------------------------------------------
struct ScreeningSubjectSample {
  double d_m{0.0};
  double reading{0.0};       ///< injected hot-pixel absolute reading
  std::size_t detector{0};   ///< index of the hot pixel
  ThermalFrame frame;
};

struct ScreeningSubjectOptions {
  bool reading_noise{true};       ///< add N(0, sigma_body^2) to the hot pixel
  double background_std{0.08};    ///< noise of the remaining detectors
  std::uint64_t sensor_id{1};
  std::int64_t t0_ms{0};
  std::int64_t dt_ms{300};
};

/// Detector in the middle row whose column azimuth is nearest theta.
inline std::size_t nearest_azimuth_detector(const SensorLayout& layout, double theta_deg) {
  std::size_t best_c = 0;
  double best = 1e300;
  for (std::size_t c = 0; c < layout.cols; ++c) {
    const double e = std::abs(column_azimuth_deg(layout, c) - theta_deg);
    if (e < best) {
      best = e;
      best_c = c;
    }
  }
  return (layout.rows / 2) * layout.cols + best_c;
}

/// Per frame, the hot pixel reads (alpha(d) T_body + (1 - alpha(d)) T_amb) / beta(T_amb)
/// plus optional N(0, sigma_body^2); every other detector reads T_amb plus
/// background noise.
inline std::vector<ScreeningSubjectSample> synth_screening_subject(
    double t_body, const Trajectory& trajectory, double t_amb, std::uint64_t seed,
    const SensorLayout& layout, const ScreeningParams& p = {}, const ScreeningSubjectOptions& opt = {}) {
  std::vector<ScreeningSubjectSample> out;
  out.reserve(trajectory.size());
  const double beta = beta_correction(t_amb, p);
  const auto m = static_cast<Eigen::Index>(layout.detector_count());
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    auto rng = frame_rng(seed, t);
    std::normal_distribution<double> unit(0.0, 1.0);
    const Pose& pose = trajectory[t];
    ScreeningSubjectSample s;
    s.d_m = pose.d_m;
    const double alpha = alpha_fraction(pose.d_m, p);
    s.reading = forward_reading(t_body, alpha, beta, t_amb);
    if (opt.reading_noise) s.reading += p.sigma_body * unit(rng);
    s.detector = nearest_azimuth_detector(layout, pose.theta_deg);
    s.frame.sensor_id = opt.sensor_id;
    s.frame.ts_ms = opt.t0_ms + static_cast<std::int64_t>(t) * opt.dt_ms;
    s.frame.temps.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) s.frame.temps[i] = t_amb + opt.background_std * unit(rng);
    s.frame.temps[static_cast<Eigen::Index>(s.detector)] = s.reading;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace thermotrack
