// counting.hpp -- ceiling-mount occupancy MAP over K ROIs, subject counting
// and mutual-distancing alerts.
//
// The joint posterior over occupancy vectors is kept on the bounded support
// {r : sum(r) <= zeta}, encoded as bitmasks (bit k = ROI k).
#pragma once

#include "thermotrack/background.hpp"
#include "thermotrack/gaussian.hpp"
#include "thermotrack/signature.hpp"
#include "thermotrack/tracking.hpp"

#include <algorithm>
#include <bit>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <tuple>

namespace thermotrack {

using OccupancyBits = std::uint32_t;
inline constexpr std::size_t kMaxCountingRois = 32;

inline std::vector<std::uint8_t> bits_to_vector(OccupancyBits bits, std::size_t k_count) {
  std::vector<std::uint8_t> r(k_count, 0);
  for (std::size_t k = 0; k < k_count; ++k) r[k] = (bits >> k) & 1u;
  return r;
}

inline OccupancyBits vector_to_bits(std::span<const std::uint8_t> r) {
  if (r.size() > kMaxCountingRois) throw UsageError("too many ROIs for counting");
  OccupancyBits bits = 0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (r[k]) bits |= OccupancyBits{1} << k;
  }
  return bits;
}

/// Pr(r_{t,k} = 1 | r_{t-1}) for every ROI.
class OccupancyTransition {
 public:
  using Fn = std::function<double(std::size_t k, OccupancyBits prev)>;

  OccupancyTransition(std::size_t k_count, Fn fn) : k_count_(k_count), fn_(std::move(fn)) {}

  /// Nearest-neighbour chain, per-ROI noisy-OR over independent bodies: a body
  /// stays with p_stay, moves to each of its n adjacent ROIs with p_move / n and
  /// leaves otherwise; border ROIs also see births with p_birth.
  static OccupancyTransition nearest_neighbour(const SensorLayout& layout, const CountingParams& p) {
    const std::size_t k_count = layout.roi_count();
    if (k_count > kMaxCountingRois) throw UsageError("too many ROIs for counting");
    std::vector<std::vector<std::size_t>> adj(k_count);
    for (std::size_t a = 0; a < k_count; ++a) {
      for (std::size_t b = 0; b < k_count; ++b) {
        if (a == b) continue;
        const auto& fa = layout.rois[a].footprint_m;
        const auto& fb = layout.rois[b].footprint_m;
        if (std::hypot(fa[0] - fb[0], fa[1] - fb[1]) <= p.adjacency_radius_m) adj[a].push_back(b);
      }
    }
    std::size_t max_deg = 0;
    for (const auto& a : adj) max_deg = std::max(max_deg, a.size());
    std::vector<bool> border(k_count);
    for (std::size_t k = 0; k < k_count; ++k) border[k] = adj[k].size() < max_deg || max_deg == 0;
    if (max_deg > 0 && std::none_of(border.begin(), border.end(), [](bool b) { return b; })) {
      border.assign(k_count, true);  // regular graph: every ROI is an entry point
    }
    const double stay = p.p_stay, move = p.p_move, birth = p.p_birth;
    return OccupancyTransition(k_count, [=](std::size_t k, OccupancyBits prev) {
      double none = 1.0;
      if ((prev >> k) & 1u) none *= 1.0 - stay;
      for (std::size_t j : adj[k]) {
        if ((prev >> j) & 1u) none *= 1.0 - move / static_cast<double>(adj[j].size());
      }
      if (border[k]) none *= 1.0 - birth;
      return 1.0 - none;
    });
  }

  /// Occupancy never changes.
  static OccupancyTransition identity(std::size_t k_count) {
    return OccupancyTransition(k_count, [](std::size_t k, OccupancyBits prev) {
      return static_cast<double>((prev >> k) & 1u);
    });
  }

  /// Fully mixing chain: every ROI is occupied with probability 1/2.
  static OccupancyTransition uniform(std::size_t k_count) {
    return OccupancyTransition(k_count, [](std::size_t, OccupancyBits) { return 0.5; });
  }

  std::size_t roi_count() const { return k_count_; }
  double prob_occupied(std::size_t k, OccupancyBits prev) const { return fn_(k, prev); }

 private:
  std::size_t k_count_;
  Fn fn_;
};

/// Posterior over occupancy vectors with at most zeta ones.
struct OccupancyPosterior {
  std::size_t roi_count{0};
  std::size_t zeta{0};
  std::vector<OccupancyBits> support;  ///< all-zero vector first
  std::vector<double> log_probs;

  static std::vector<OccupancyBits> bounded_support(std::size_t k_count, std::size_t zeta) {
    if (k_count > kMaxCountingRois) throw UsageError("too many ROIs for counting");
    std::vector<OccupancyBits> s;
    const std::uint64_t total = std::uint64_t{1} << k_count;
    for (std::uint64_t b = 0; b < total; ++b) {
      if (static_cast<std::size_t>(std::popcount(b)) <= zeta) s.push_back(static_cast<OccupancyBits>(b));
    }
    std::stable_sort(s.begin(), s.end(), [](OccupancyBits a, OccupancyBits b) {
      return std::popcount(a) < std::popcount(b);
    });
    return s;
  }

  /// Product-form posterior from per-ROI log-odds, restricted and renormalised.
  static OccupancyPosterior from_log_odds(std::span<const double> log_odds, std::size_t zeta) {
    OccupancyPosterior post;
    post.roi_count = log_odds.size();
    post.zeta = zeta;
    post.support = bounded_support(log_odds.size(), zeta);
    post.log_probs.reserve(post.support.size());
    for (OccupancyBits s : post.support) {
      double lp = 0.0;
      for (std::size_t k = 0; k < log_odds.size(); ++k) {
        // log sigmoid(+/- l) = -softplus(-/+ l)
        const double l = ((s >> k) & 1u) ? log_odds[k] : -log_odds[k];
        lp -= l > 0.0 ? std::log1p(std::exp(-l)) : -l + std::log1p(std::exp(l));
      }
      post.log_probs.push_back(lp);
    }
    normalize_log(post.log_probs);
    return post;
  }

  /// Uniform marginals (all log-odds zero).
  static OccupancyPosterior uniform(std::size_t k_count, std::size_t zeta) {
    std::vector<double> zeros(k_count, 0.0);
    return from_log_odds(zeros, zeta);
  }

  std::vector<double> marginals() const {
    std::vector<double> m(roi_count, 0.0);
    for (std::size_t i = 0; i < support.size(); ++i) {
      const double p = std::exp(log_probs[i]);
      for (std::size_t k = 0; k < roi_count; ++k) {
        if ((support[i] >> k) & 1u) m[k] += p;
      }
    }
    return m;
  }

  double total_probability() const {
    double s = 0.0;
    for (double lp : log_probs) s += std::exp(lp);
    return s;
  }
};

/// Pr(r_{t,k} = 1 | Y_{t-1}) = sum_r Pr(r_{t,k} = 1 | r) Pr(r | Y_{t-1}).
inline std::vector<double> propagate_prior(const OccupancyPosterior& post,
                                           const OccupancyTransition& trans) {
  if (trans.roi_count() != post.roi_count) throw UsageError("transition/posterior size mismatch");
  std::vector<double> prior(post.roi_count, 0.0);
  for (std::size_t i = 0; i < post.support.size(); ++i) {
    const double w = std::exp(post.log_probs[i]);
    if (w == 0.0) continue;
    for (std::size_t k = 0; k < post.roi_count; ++k) {
      prior[k] += w * trans.prob_occupied(k, post.support[i]);
    }
  }
  for (double& p : prior) p = std::clamp(p, 0.0, 1.0);
  return prior;
}

struct MapResult {
  OccupancyBits r_hat{0};
  std::vector<double> log_odds;        ///< per-ROI posterior log-odds
  std::vector<double> roi_posteriors;  ///< Pr(r_{t,k} = 1 | Y_t)
  OccupancyPosterior posterior;

  std::vector<std::uint8_t> occupancy() const { return bits_to_vector(r_hat, log_odds.size()); }
};

/// Priors are clamped to [kPriorFloor, 1 - kPriorFloor] so a ROI is never
/// ruled out a priori.
inline constexpr double kPriorFloor = 1e-12;

/// Constrained MAP: maximise prod_k Pr(r_k | Y_t) subject to sum(r) <= zeta.
/// Picks the ROIs with positive posterior log-odds, largest first (lower index
/// on ties), at most zeta of them.
inline OccupancyBits constrained_map(std::span<const double> log_odds, std::size_t zeta) {
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < log_odds.size(); ++k) {
    if (log_odds[k] > 0.0) order.push_back(k);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return log_odds[a] > log_odds[b]; });
  OccupancyBits bits = 0;
  for (std::size_t i = 0; i < order.size() && i < zeta; ++i) bits |= OccupancyBits{1} << order[i];
  return bits;
}

inline MapResult map_occupancy(const ThermalFrame& frame, const BackgroundModel& bg,
                               const SignatureModel& sig, std::span<const double> priors,
                               std::size_t zeta) {
  if (sig.variant() != SignatureVariant::CeilingConstant) {
    throw UsageError("occupancy MAP needs a ceiling-mount signature model");
  }
  if (priors.size() != sig.roi_count()) throw UsageError("prior count differs from ROI count");
  MapResult out;
  out.log_odds.resize(sig.roi_count());
  out.roi_posteriors.resize(sig.roi_count());
  for (std::size_t k = 0; k < sig.roi_count(); ++k) {
    RoiLikelihood lik(frame, bg, sig, k);
    const double prior = std::clamp(priors[k], kPriorFloor, 1.0 - kPriorFloor);
    const double l = lik.log_occupied(std::nullopt) - lik.log_empty() + std::log(prior) -
                     std::log1p(-prior);
    out.log_odds[k] = l;
    out.roi_posteriors[k] = l >= 0.0 ? 1.0 / (1.0 + std::exp(-l)) : std::exp(l) / (1.0 + std::exp(l));
  }
  out.r_hat = constrained_map(out.log_odds, zeta);
  out.posterior = OccupancyPosterior::from_log_odds(out.log_odds, zeta);
  return out;
}

inline std::size_t count(OccupancyBits r_hat) { return static_cast<std::size_t>(std::popcount(r_hat)); }

inline std::size_t count(std::span<const std::uint8_t> r_hat) {
  std::size_t n = 0;
  for (auto v : r_hat) n += v != 0;
  return n;
}

/// Ceiling counter: prior propagation + MAP per frame.
class CeilingCounter {
 public:
  CeilingCounter(SignatureModel sig, OccupancyTransition trans, std::size_t zeta)
      : sig_(std::move(sig)), trans_(std::move(trans)), zeta_(zeta) {
    if (trans_.roi_count() != sig_.roi_count()) throw UsageError("transition size mismatch");
  }

  const MapResult& step(const ThermalFrame& frame, const BackgroundModel& bg) {
    const std::vector<double> priors =
        last_ ? propagate_prior(last_->posterior, trans_) : std::vector<double>(sig_.roi_count(), 0.5);
    last_ = map_occupancy(frame, bg, sig_, priors, zeta_);
    return *last_;
  }

  const std::optional<MapResult>& last() const { return last_; }
  const SignatureModel& signature_model() const { return sig_; }
  std::size_t zeta() const { return zeta_; }

 private:
  SignatureModel sig_;
  OccupancyTransition trans_;
  std::size_t zeta_;
  std::optional<MapResult> last_;
};

// ---------------------------------------------------------------------------
// Distancing alerts
// ---------------------------------------------------------------------------
struct OccupancySnapshot {
  std::uint64_t sensor_id{0};
  std::int64_t ts_ms{0};
  std::vector<std::uint8_t> occupancy;
};

struct DistancingAlert {
  std::uint64_t sensor_id{0};
  std::int64_t ts_ms{0};
  std::size_t roi_a{0};
  std::size_t roi_b{0};
  double distance_m{0.0};
  std::int64_t window{0};  ///< floor(ts_ms / window_ms)
};

/// Emits an alert for each occupied ROI pair closer than the threshold, at most
/// once per (sensor, pair, aggregation window).
class DistancingMonitor {
 public:
  DistancingMonitor(std::vector<std::array<double, 2>> footprints, double threshold_m,
                    std::int64_t window_ms)
      : footprints_(std::move(footprints)), threshold_(threshold_m), window_ms_(window_ms) {
    if (window_ms_ <= 0) throw ConfigError("alert window must be positive");
  }

  std::vector<DistancingAlert> push(const OccupancySnapshot& snap) {
    if (snap.occupancy.size() != footprints_.size()) throw UsageError("occupancy length mismatch");
    std::vector<DistancingAlert> out;
    const std::int64_t window = floor_div(snap.ts_ms, window_ms_);
    for (std::size_t a = 0; a < footprints_.size(); ++a) {
      if (!snap.occupancy[a]) continue;
      for (std::size_t b = a + 1; b < footprints_.size(); ++b) {
        if (!snap.occupancy[b]) continue;
        const double dist = std::hypot(footprints_[a][0] - footprints_[b][0],
                                       footprints_[a][1] - footprints_[b][1]);
        if (!(dist < threshold_)) continue;
        if (!seen_.insert({snap.sensor_id, a, b, window}).second) continue;
        out.push_back({snap.sensor_id, snap.ts_ms, a, b, dist, window});
      }
    }
    return out;
  }

 private:
  static std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
  }

  std::vector<std::array<double, 2>> footprints_;
  double threshold_;
  std::int64_t window_ms_;
  std::set<std::tuple<std::uint64_t, std::size_t, std::size_t, std::int64_t>> seen_;
};

inline std::vector<std::array<double, 2>> layout_footprints(const SensorLayout& layout) {
  std::vector<std::array<double, 2>> fp;
  for (const auto& roi : layout.rois) fp.push_back(roi.footprint_m);
  return fp;
}

inline std::vector<DistancingAlert> distancing_alerts(std::span<const OccupancySnapshot> snapshots,
                                                      std::vector<std::array<double, 2>> footprints,
                                                      double threshold_m, std::int64_t window_ms) {
  DistancingMonitor mon(std::move(footprints), threshold_m, window_ms);
  std::vector<DistancingAlert> out;
  for (const auto& s : snapshots) {
    auto a = mon.push(s);
    out.insert(out.end(), a.begin(), a.end());
  }
  return out;
}

}  // namespace thermotrack
