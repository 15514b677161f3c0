// tracking.hpp -- wall-mount occupancy, distance and AOA tracking.
//
// Every ROI is handled independently on its masked detectors: an ML occupancy
// test against the empty-scene Gaussian, then (for occupied ROIs) a grid Bayes
// filter over the distance with a truncated Gaussian random-walk prior. All
// probability arithmetic is done in the log domain.
#pragma once

#include "thermotrack/background.hpp"
#include "thermotrack/gaussian.hpp"
#include "thermotrack/records.hpp"
#include "thermotrack/signature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>

namespace thermotrack {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct DistanceGrid {
  double d_min{0.25};
  double d_max{3.5};
  double step{0.25};
  std::vector<double> points;

  static DistanceGrid make(double d_min, double d_max, double step) {
    if (!(step > 0.0) || !(d_min < d_max)) throw ConfigError("invalid distance grid");
    DistanceGrid g{d_min, d_max, step, {}};
    const auto n = static_cast<std::size_t>(std::floor((d_max - d_min) / step + 1e-9)) + 1;
    if (n < 2) throw ConfigError("distance grid needs at least two points");
    for (std::size_t i = 0; i < n; ++i) g.points.push_back(d_min + static_cast<double>(i) * step);
    return g;
  }

  static DistanceGrid for_layout(const SensorLayout& layout, const TrackingParams& p) {
    return make(layout.d_min, layout.d_max, p.delta_d);
  }

  std::size_t size() const { return points.size(); }

  /// log of the uniform-prior quadrature weight delta_d / (d_max - d_min).
  double log_quadrature_weight() const { return std::log(step / (d_max - d_min)); }
};

struct DistancePosterior {
  std::size_t roi{0};
  std::vector<double> grid;
  std::vector<double> log_weights;

  static DistancePosterior uniform(std::size_t roi, const DistanceGrid& g) {
    const double lw = -std::log(static_cast<double>(g.size()));
    return {roi, g.points, std::vector<double>(g.size(), lw)};
  }

  std::vector<double> probabilities() const {
    std::vector<double> p(log_weights.size());
    std::transform(log_weights.begin(), log_weights.end(), p.begin(),
                   [](double v) { return std::exp(v); });
    return p;
  }

  /// Grid index of the maximum; lowest index on ties.
  std::size_t argmax() const {
    return static_cast<std::size_t>(
        std::distance(log_weights.begin(), std::max_element(log_weights.begin(), log_weights.end())));
  }
};

/// Pr(d | h) = N(d; h, W) restricted to the grid, each row renormalised.
class RandomWalkKernel {
 public:
  RandomWalkKernel(const DistanceGrid& grid, double variance) : n_(grid.size()) {
    if (variance < 0.0) throw ConfigError("random-walk variance must be >= 0");
    log_t_.assign(n_ * n_, kNegInf);
    for (std::size_t h = 0; h < n_; ++h) {
      if (variance == 0.0) {
        log_t_[h * n_ + h] = 0.0;
        continue;
      }
      std::vector<double> row(n_);
      for (std::size_t d = 0; d < n_; ++d) {
        const double diff = grid.points[d] - grid.points[h];
        row[d] = -0.5 * diff * diff / variance;
      }
      const double z = log_sum_exp(row);
      for (std::size_t d = 0; d < n_; ++d) log_t_[h * n_ + d] = row[d] - z;
    }
  }

  static RandomWalkKernel from_params(const DistanceGrid& grid, const TrackingParams& p) {
    const double step_std = p.walk_speed_mps * p.frame_interval_s;
    return RandomWalkKernel(grid, step_std * step_std);
  }

  std::size_t size() const { return n_; }
  double log_transition(std::size_t from, std::size_t to) const { return log_t_[from * n_ + to]; }

  /// log prior(d) = log sum_h Pr(d | h) exp(log_posterior(h)).
  std::vector<double> apply(std::span<const double> log_posterior) const {
    std::vector<double> out(n_);
    std::vector<double> terms(n_);
    for (std::size_t d = 0; d < n_; ++d) {
      for (std::size_t h = 0; h < n_; ++h) terms[h] = log_t_[h * n_ + d] + log_posterior[h];
      out[d] = log_sum_exp(terms);
    }
    return out;
  }

 private:
  std::size_t n_;
  std::vector<double> log_t_;
};

// ---------------------------------------------------------------------------
// Likelihoods
// ---------------------------------------------------------------------------

/// Gaussian likelihoods of one frame restricted to one ROI's mask.
class RoiLikelihood {
 public:
  RoiLikelihood(const ThermalFrame& frame, const BackgroundModel& bg, const SignatureModel& sig,
                std::size_t k)
      : sig_(&sig), k_(k) {
    if (k >= sig.roi_count()) throw UsageError("ROI index out of range");
    if (frame.temps.size() != bg.mu.size()) throw InputError("frame length differs from background");
    const auto& support = sig.support(k);
    masked_ = subset(bg, std::span<const std::size_t>(support));
    y_ = gather(frame.temps, support);
    empty_.emplace(masked_.cov);
    Matrix occ_cov = masked_.cov;
    const double st = sig.spread();
    occ_cov.diagonal().array() += st * st;
    occupied_.emplace(occ_cov);
  }

  double log_empty() const { return (*empty_)(y_, masked_.mu); }

  /// log N(y_k; sigma_bar(d) 1 + mu_k, C_k + sigma_T^2 I).
  double log_occupied(std::optional<double> d) const {
    const double s = sig_->mean_increase(d);
    return (*occupied_)(y_, (masked_.mu.array() + s).matrix());
  }

  const Vector& masked_frame() const { return y_; }
  const MaskedBackground& masked_background() const { return masked_; }

 private:
  const SignatureModel* sig_;
  std::size_t k_;
  MaskedBackground masked_;
  Vector y_;
  std::optional<GaussianLogDensity> empty_;
  std::optional<GaussianLogDensity> occupied_;
};

inline void check_grid_distance(const SignatureModel& sig, double d) {
  const auto& l = sig.layout();
  if (!(d >= l.d_min - 1e-12 && d <= l.d_max + 1e-12)) {
    throw UsageError("distance " + std::to_string(d) + " m outside [d_min, d_max]");
  }
}

inline double log_likelihood_occupied(const ThermalFrame& frame, const BackgroundModel& bg,
                                      const SignatureModel& sig, std::size_t k,
                                      std::optional<double> d) {
  if (d && sig.variant() == SignatureVariant::WallDistanceDependent) check_grid_distance(sig, *d);
  return RoiLikelihood(frame, bg, sig, k).log_occupied(d);
}

inline double log_likelihood_empty(const ThermalFrame& frame, const BackgroundModel& bg,
                                   const SignatureModel& sig, std::size_t k) {
  return RoiLikelihood(frame, bg, sig, k).log_empty();
}

struct OccupancyDecision {
  bool occupied{false};
  double log_empty{0.0};
  double log_occupied{0.0};
  std::vector<double> log_likelihood_by_d;  ///< wall only, aligned to the grid
};

/// ML occupancy test. For wall mounts Pr(y | r = 1) is the Riemann sum of the
/// distance-marginalised likelihood under a uniform distance prior. Ties go to
/// "empty".
inline OccupancyDecision detect_occupancy(const RoiLikelihood& lik, const SignatureModel& sig,
                                          const DistanceGrid* grid) {
  OccupancyDecision out;
  out.log_empty = lik.log_empty();
  if (sig.variant() == SignatureVariant::WallDistanceDependent) {
    if (grid == nullptr) throw UsageError("wall occupancy needs a distance grid");
    out.log_likelihood_by_d.reserve(grid->size());
    for (double d : grid->points) out.log_likelihood_by_d.push_back(lik.log_occupied(d));
    out.log_occupied = log_sum_exp(out.log_likelihood_by_d) + grid->log_quadrature_weight();
  } else {
    out.log_occupied = lik.log_occupied(std::nullopt);
  }
  out.occupied = out.log_occupied > out.log_empty;
  return out;
}

inline OccupancyDecision detect_occupancy(const ThermalFrame& frame, const BackgroundModel& bg,
                                          const SignatureModel& sig, std::size_t k,
                                          const TrackingParams& params = {}) {
  RoiLikelihood lik(frame, bg, sig, k);
  if (sig.variant() == SignatureVariant::WallDistanceDependent) {
    const auto grid = DistanceGrid::for_layout(sig.layout(), params);
    return detect_occupancy(lik, sig, &grid);
  }
  return detect_occupancy(lik, sig, nullptr);
}

// ---------------------------------------------------------------------------
// Recursive tracking
// ---------------------------------------------------------------------------
struct RoiTrack {
  bool occupied{false};
  DistancePosterior posterior;
  std::optional<double> d_hat;
  std::optional<double> theta_hat;
  double log_empty{0.0};
  double log_occupied{0.0};
};

struct TrackState {
  std::int64_t ts_ms{0};
  std::vector<RoiTrack> rois;
  std::uint64_t steps{0};
  std::uint64_t resets{0};  ///< posteriors that degenerated to all -inf

  static TrackState initial(const SignatureModel& sig, const DistanceGrid& grid) {
    TrackState s;
    for (std::size_t k = 0; k < sig.roi_count(); ++k) {
      RoiTrack t;
      t.posterior = DistancePosterior::uniform(k, grid);
      s.rois.push_back(std::move(t));
    }
    return s;
  }

  bool any_occupied() const {
    return std::any_of(rois.begin(), rois.end(), [](const RoiTrack& r) { return r.occupied; });
  }
};

inline void normalize_log(std::vector<double>& lw) {
  const double z = log_sum_exp(lw);
  for (double& v : lw) v -= z;
}

/// One round of the tracker: occupancy per ROI, then the distance filter for
/// occupied ROIs (prior propagated only if the ROI was occupied at t-1, else
/// uniform). Unoccupied ROIs keep a uniform posterior.
inline TrackState step_track(const TrackState& prev, const ThermalFrame& frame,
                             const BackgroundModel& bg, const SignatureModel& sig,
                             const DistanceGrid& grid, const RandomWalkKernel& kernel) {
  if (sig.variant() != SignatureVariant::WallDistanceDependent) {
    throw UsageError("distance tracking needs a wall-mount signature model");
  }
  if (prev.rois.size() != sig.roi_count()) throw UsageError("track state ROI count mismatch");
  TrackState next;
  next.ts_ms = frame.ts_ms;
  next.steps = prev.steps + 1;
  next.resets = prev.resets;
  next.rois.resize(sig.roi_count());

  for (std::size_t k = 0; k < sig.roi_count(); ++k) {
    RoiLikelihood lik(frame, bg, sig, k);
    auto decision = detect_occupancy(lik, sig, &grid);
    RoiTrack& out = next.rois[k];
    out.log_empty = decision.log_empty;
    out.log_occupied = decision.log_occupied;
    out.occupied = decision.occupied;
    if (!out.occupied) {
      out.posterior = DistancePosterior::uniform(k, grid);
      continue;
    }
    const RoiTrack& before = prev.rois[k];
    std::vector<double> lw = before.occupied
                                 ? kernel.apply(before.posterior.log_weights)
                                 : DistancePosterior::uniform(k, grid).log_weights;
    for (std::size_t i = 0; i < lw.size(); ++i) lw[i] += decision.log_likelihood_by_d[i];
    if (!std::isfinite(log_sum_exp(lw))) {
      lw = DistancePosterior::uniform(k, grid).log_weights;
      ++next.resets;
    } else {
      normalize_log(lw);
    }
    out.posterior = {k, grid.points, std::move(lw)};
    out.d_hat = grid.points[out.posterior.argmax()];
    out.theta_hat = sig.layout().rois[k].aoa_deg;
  }
  return next;
}

/// Stateful wrapper owning the grid, kernel and current state.
class WallTracker {
 public:
  WallTracker(SignatureModel sig, const TrackingParams& params)
      : sig_(std::move(sig)),
        grid_(DistanceGrid::for_layout(sig_.layout(), params)),
        kernel_(RandomWalkKernel::from_params(grid_, params)),
        state_(TrackState::initial(sig_, grid_)) {}

  const TrackState& step(const ThermalFrame& frame, const BackgroundModel& bg) {
    state_ = step_track(state_, frame, bg, sig_, grid_, kernel_);
    return state_;
  }

  const TrackState& state() const { return state_; }
  const DistanceGrid& grid() const { return grid_; }
  const RandomWalkKernel& kernel() const { return kernel_; }
  const SignatureModel& signature_model() const { return sig_; }

  std::vector<TrackEstimate> estimates(std::uint64_t sensor_id, bool with_posterior = false) const {
    std::vector<TrackEstimate> out;
    for (std::size_t k = 0; k < state_.rois.size(); ++k) {
      const auto& r = state_.rois[k];
      TrackEstimate e{sensor_id, state_.ts_ms, k, r.occupied, r.d_hat, r.theta_hat, std::nullopt};
      if (with_posterior) e.posterior = r.posterior.probabilities();
      out.push_back(std::move(e));
    }
    return out;
  }

 private:
  SignatureModel sig_;
  DistanceGrid grid_;
  RandomWalkKernel kernel_;
  TrackState state_;
};

// ---------------------------------------------------------------------------
// RMSE evaluation
// ---------------------------------------------------------------------------
struct RmseRow {
  double true_d_m{0.0};  ///< NaN for the overall row
  std::size_t matched{0};
  std::size_t missed{0};
  double d_rmse_m{0.0};
  double aoa_rmse_deg{0.0};
};

struct RmseReport {
  RmseRow overall;
  std::vector<RmseRow> rows;  ///< one per distinct true distance
};

/// Distance / AOA RMSE of wall-tracker output against ground truth.
///
/// At each truth timestamp every occupied estimate is assigned to the body
/// nearest in azimuth; a body's estimate is the mean d_hat and the centroid of
/// theta_hat over its assigned ROIs. Bodies with no assigned estimate count
/// as misses and do not enter the RMSE.
inline RmseReport rmse_report(std::span<const TrackEstimate> estimates,
                              std::span<const TruthRecord> truth) {
  std::map<std::int64_t, std::vector<const TrackEstimate*>> by_ts;
  for (const auto& e : estimates) by_ts[e.ts_ms].push_back(&e);

  struct Acc {
    double sd = 0, sa = 0;
    std::size_t n = 0, miss = 0;
  };
  std::map<long long, Acc> rows;
  Acc all;
  std::size_t overlap = 0;
  for (const auto& rec : truth) {
    auto it = by_ts.find(rec.ts_ms);
    if (it == by_ts.end() || rec.bodies.empty()) continue;
    ++overlap;
    const std::size_t nb = rec.bodies.size();
    std::vector<double> sum_d(nb, 0.0), sum_a(nb, 0.0);
    std::vector<std::size_t> cnt(nb, 0);
    for (const TrackEstimate* e : it->second) {
      if (!e->occupied || !e->d_hat_m || !e->theta_hat_deg) continue;
      std::size_t best = 0;
      for (std::size_t b = 1; b < nb; ++b) {
        if (std::abs(rec.bodies[b].theta_deg - *e->theta_hat_deg) <
            std::abs(rec.bodies[best].theta_deg - *e->theta_hat_deg)) {
          best = b;
        }
      }
      sum_d[best] += *e->d_hat_m;
      sum_a[best] += *e->theta_hat_deg;
      ++cnt[best];
    }
    for (std::size_t b = 0; b < nb; ++b) {
      const auto key = std::llround(rec.bodies[b].d_m * 1000.0);
      Acc& row = rows[key];
      if (cnt[b] == 0) {
        ++row.miss;
        ++all.miss;
        continue;
      }
      const double ed = sum_d[b] / static_cast<double>(cnt[b]) - rec.bodies[b].d_m;
      const double ea = sum_a[b] / static_cast<double>(cnt[b]) - rec.bodies[b].theta_deg;
      for (Acc* a : {&row, &all}) {
        a->sd += ed * ed;
        a->sa += ea * ea;
        ++a->n;
      }
    }
  }
  if (overlap == 0) throw UsageError("estimates and ground truth share no timestamps");

  auto finish = [](const Acc& a, double d) {
    RmseRow r;
    r.true_d_m = d;
    r.matched = a.n;
    r.missed = a.miss;
    r.d_rmse_m = a.n ? std::sqrt(a.sd / static_cast<double>(a.n)) : 0.0;
    r.aoa_rmse_deg = a.n ? std::sqrt(a.sa / static_cast<double>(a.n)) : 0.0;
    return r;
  };
  RmseReport rep;
  rep.overall = finish(all, std::numeric_limits<double>::quiet_NaN());
  for (const auto& [key, acc] : rows) rep.rows.push_back(finish(acc, static_cast<double>(key) / 1000.0));
  return rep;
}

}  // namespace thermotrack
