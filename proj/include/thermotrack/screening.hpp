// screening.hpp -- contactless body-temperature estimation, anomalous
// temperature detection by LLR majority voting, and IR+radar distance fusion.
#pragma once

#include "thermotrack/background.hpp"
#include "thermotrack/records.hpp"
#include "thermotrack/signature.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace thermotrack {

inline const std::string kWarnDistanceRange = "distance_out_of_range";
inline const std::string kWarnAmbientRange = "ambient_out_of_range";
inline const std::string kWarnAlphaFloor = "alpha_at_floor";

inline constexpr double kAlphaFloor = 0.01;

/// T_amb = mean of the background mean vector.
inline double ambient_temperature(const BackgroundModel& bg) {
  if (bg.mu.size() == 0) throw UsageError("background is not initialised");
  return bg.mu.mean();
}

struct MaxExcess {
  std::size_t index{0};
  double reading{0.0};  ///< absolute temperature y_{m*}
};

/// m* = argmax_m (y_m - mu_m), lowest index on ties. An optional support
/// restricts the search (e.g. to one ROI).
inline MaxExcess max_excess_reading(const ThermalFrame& frame, const Vector& mu,
                                    std::span<const std::size_t> support = {}) {
  if (frame.temps.size() != mu.size()) throw InputError("frame length differs from background");
  auto consider = [&](std::size_t m, MaxExcess& best, double& best_excess) {
    const auto i = static_cast<Eigen::Index>(m);
    const double e = frame.temps[i] - mu[i];
    if (e > best_excess) {
      best_excess = e;
      best = {m, frame.temps[i]};
    }
  };
  MaxExcess best;
  double best_excess = -std::numeric_limits<double>::infinity();
  if (support.empty()) {
    for (std::size_t m = 0; m < static_cast<std::size_t>(mu.size()); ++m) consider(m, best, best_excess);
  } else {
    for (std::size_t m : support) {
      if (m >= static_cast<std::size_t>(mu.size())) throw UsageError("support index outside the frame");
      consider(m, best, best_excess);
    }
  }
  return best;
}

/// Window average of the per-frame max-excess absolute readings.
inline double mean_max_temperature(std::span<const ThermalFrame> window, const Vector& mu) {
  if (window.empty()) throw UsageError("screening window is empty");
  double acc = 0.0;
  for (const auto& f : window) acc += max_excess_reading(f, mu).reading;
  return acc / static_cast<double>(window.size());
}

/// Spot-area fraction alpha(d), clamped to [0.01, 1].
inline double alpha_fraction(double d, AlphaMode mode, const ScreeningParams& p = {}) {
  if (!(d >= 0.0)) throw InputError("distance must be >= 0");
  if (mode == AlphaMode::Auto) mode = d < p.alpha_switch_m ? AlphaMode::Linear : AlphaMode::Quadratic;
  const double a = mode == AlphaMode::Linear
                       ? p.alpha0_lin - p.alpha1_lin * d
                       : p.alpha0_quad - p.alpha1_quad * d - p.alpha2_quad * d * d;
  return std::clamp(a, kAlphaFloor, 1.0);
}

inline double alpha_fraction(double d, const ScreeningParams& p = {}) {
  return alpha_fraction(d, p.alpha_mode, p);
}

/// beta = beta0 (1 + beta1 (T_amb - T_min) / T_min).
inline double beta_correction(double t_amb, const ScreeningParams& p = {}) {
  if (!std::isfinite(t_amb)) throw InputError("ambient temperature must be finite");
  return p.beta0 * (1.0 + p.beta1 * (t_amb - p.t_min) / p.t_min);
}

/// Forward reading model: T_bar = (alpha T_body + (1 - alpha) T_amb) / beta.
inline double forward_reading(double t_body, double alpha, double beta, double t_amb) {
  return (alpha * t_body + (1.0 - alpha) * t_amb) / beta;
}

struct BodyTemperatureEstimate {
  double t_body{0.0};
  double alpha{0.0};
  double beta{0.0};
  std::vector<std::string> warnings;
};

inline void add_warning(std::vector<std::string>& w, const std::string& s) {
  if (std::find(w.begin(), w.end(), s) == w.end()) w.push_back(s);
}

inline std::vector<std::string> range_warnings(double d, double t_amb, const ScreeningParams& p) {
  std::vector<std::string> w;
  if (d > p.max_distance_m) add_warning(w, kWarnDistanceRange);
  if (t_amb < p.t_amb_low || t_amb > p.t_amb_high) add_warning(w, kWarnAmbientRange);
  return w;
}

/// T_body = (beta T_bar - (1 - alpha) T_amb) / alpha for a given alpha.
inline double invert_reading(double t_bar, double alpha, double beta, double t_amb) {
  return (beta * t_bar - (1.0 - alpha) * t_amb) / alpha;
}

inline BodyTemperatureEstimate estimate_body_temperature(double t_bar, double d, double t_amb,
                                                         const ScreeningParams& p = {}) {
  BodyTemperatureEstimate e;
  e.alpha = alpha_fraction(d, p);
  e.beta = beta_correction(t_amb, p);
  e.t_body = invert_reading(t_bar, e.alpha, e.beta, t_amb);
  e.warnings = range_warnings(d, t_amb, p);
  if (e.alpha <= kAlphaFloor) add_warning(e.warnings, kWarnAlphaFloor);
  return e;
}

// ---------------------------------------------------------------------------
// Log-likelihood ratio
// ---------------------------------------------------------------------------

/// log Q(x), Q the standard Gaussian tail. Uses erfc where it is accurate and
/// the asymptotic series far in the upper tail.
inline double log_q(double x) {
  if (x < 30.0) return std::log(0.5 * std::erfc(x / std::sqrt(2.0)));
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - std::log(x * std::sqrt(2.0 * kPi)) + std::log(series);
}

struct LlrOptions {
  bool full_form{false};  ///< evaluate both class likelihoods explicitly
  double log_gamma{0.0};  ///< log Gamma(y | Theta), shared by both classes
  double prior_f1{0.5};
};

/// Exceedance score z = (beta T_bar - (alpha T_max + (1 - alpha) T_amb)) / sigma_body.
inline double exceedance_score(double t_bar, double alpha, double t_amb, const ScreeningParams& p) {
  if (!(p.sigma_body > 0.0)) throw ConfigError("sigma_body must be > 0");
  const double beta = beta_correction(t_amb, p);
  return (beta * t_bar - (alpha * p.t_max + (1.0 - alpha) * t_amb)) / p.sigma_body;
}

/// log Pr(y | F1) - log Pr(y | F0) with Pr(y | F1) = Q(-z), Pr(y | F0) = Q(z).
inline double llr_from_reading(double t_bar, double alpha, double t_amb, const ScreeningParams& p = {},
                               const LlrOptions& opts = {}) {
  const double z = exceedance_score(t_bar, alpha, t_amb, p);
  if (!opts.full_form) return log_q(-z) - log_q(z);
  if (!(opts.prior_f1 > 0.0 && opts.prior_f1 < 1.0)) throw ConfigError("prior must lie in (0, 1)");
  const double log_f1 = log_q(-z) + opts.log_gamma - std::log(opts.prior_f1);
  const double log_f0 = log_q(z) + opts.log_gamma - std::log1p(-opts.prior_f1);
  return log_f1 - log_f0;
}

/// Frame-level LLR for a subject in ROI k at fused distance d.
inline double llr(const ThermalFrame& frame, double fused_d, std::size_t k, const BackgroundModel& bg,
                  const SignatureModel& sig, double t_amb, const ScreeningParams& p = {},
                  const LlrOptions& opts = {}) {
  if (k >= sig.roi_count()) throw UsageError("ROI index out of range");
  const auto& support = sig.support(k);
  const double t_bar = max_excess_reading(frame, bg.mu, support).reading;
  return llr_from_reading(t_bar, alpha_fraction(fused_d, p), t_amb, p, opts);
}

// ---------------------------------------------------------------------------
// Verdicts
// ---------------------------------------------------------------------------
enum class ScreeningState { F0, F1 };

inline std::string to_string(ScreeningState s) { return s == ScreeningState::F1 ? "F1" : "F0"; }

struct ScreeningVerdict {
  ScreeningState state{ScreeningState::F0};
  double soft{0.0};  ///< fraction of LLRs >= xi
  double t_body_hat{std::numeric_limits<double>::quiet_NaN()};
  std::vector<double> llr_trace;
  std::vector<std::string> warnings;
};

/// Majority vote: F1 iff strictly more LLRs are >= xi than below it.
inline ScreeningVerdict screen(std::span<const double> llrs, double xi, double t_body_hat = std::nan("")) {
  if (llrs.empty()) throw UsageError("no LLR values to vote on");
  ScreeningVerdict v;
  std::size_t above = 0;
  for (double l : llrs) above += l >= xi;
  const std::size_t below = llrs.size() - above;
  v.state = above > below ? ScreeningState::F1 : ScreeningState::F0;
  v.soft = static_cast<double>(above) / static_cast<double>(llrs.size());
  v.t_body_hat = t_body_hat;
  v.llr_trace.assign(llrs.begin(), llrs.end());
  return v;
}

// ---------------------------------------------------------------------------
// Distance fusion
// ---------------------------------------------------------------------------
inline double fuse_distance(double ir_d, std::optional<double> radar_d, const ScreeningParams& p = {}) {
  if (!(ir_d >= 0.0)) throw InputError("IR distance must be >= 0");
  if (!radar_d) return ir_d;
  if (!(*radar_d >= 0.0)) throw InputError("radar distance must be >= 0");
  if (std::abs(ir_d - *radar_d) > p.fusion_gate_m) return *radar_d;
  const double w_ir = 1.0 / (p.ir_std_m * p.ir_std_m);
  const double w_radar = 1.0 / (p.radar_std_m * p.radar_std_m);
  return (w_ir * ir_d + w_radar * *radar_d) / (w_ir + w_radar);
}

/// Radar sample closest to ts within +/- tolerance, if any.
inline std::optional<double> match_radar(std::span<const RadarSample> radar, std::int64_t ts_ms,
                                         std::int64_t tolerance_ms) {
  std::optional<double> best;
  std::int64_t best_gap = tolerance_ms + 1;
  for (const auto& r : radar) {
    const std::int64_t gap = r.ts_ms > ts_ms ? r.ts_ms - ts_ms : ts_ms - r.ts_ms;
    if (gap <= tolerance_ms && gap < best_gap) {
      best_gap = gap;
      best = r.d_m;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Sliding-window session
// ---------------------------------------------------------------------------

/// One subject in range of one sensor. Each push adds a max-excess reading and
/// a fused distance. Once Q readings are buffered, every push yields an LLR
/// computed on the window means (T_bar and d) of the last Q frames; once Q
/// LLRs exist, every push yields a verdict over the last Q of them.
class ScreeningSession {
 public:
  ScreeningSession(ScreeningParams params, double t_amb) : p_(std::move(params)), t_amb_(t_amb) {
    if (p_.q < 1) throw ConfigError("Q must be >= 1");
    if (!(p_.sigma_body > 0.0)) throw ConfigError("sigma_body must be > 0");
  }

  std::optional<ScreeningVerdict> push_reading(double reading, double fused_d) {
    if (!(fused_d >= 0.0)) throw InputError("fused distance must be >= 0");
    readings_.push_back(reading);
    distances_.push_back(fused_d);
    const auto q = static_cast<std::size_t>(p_.q);
    if (readings_.size() > q) {
      readings_.pop_front();
      distances_.pop_front();
    }
    if (readings_.size() < q) return std::nullopt;

    double t_bar = 0.0, d_bar = 0.0;
    for (std::size_t i = 0; i < q; ++i) {
      t_bar += readings_[i];
      d_bar += distances_[i];
    }
    t_bar /= static_cast<double>(q);
    d_bar /= static_cast<double>(q);
    const auto est = estimate_body_temperature(t_bar, d_bar, t_amb_, p_);
    llrs_.push_back(llr_from_reading(t_bar, est.alpha, t_amb_, p_));
    t_hats_.push_back(est.t_body);
    if (llrs_.size() > q) {
      llrs_.pop_front();
      t_hats_.pop_front();
    }
    last_d_ = d_bar;
    if (llrs_.size() < q) return std::nullopt;

    const std::vector<double> trace(llrs_.begin(), llrs_.end());
    double t_mean = 0.0;
    for (double t : t_hats_) t_mean += t;
    t_mean /= static_cast<double>(t_hats_.size());
    ScreeningVerdict v = screen(trace, p_.xi, t_mean);
    v.warnings = range_warnings(d_bar, t_amb_, p_);
    if (est.alpha <= kAlphaFloor) add_warning(v.warnings, kWarnAlphaFloor);
    return v;
  }

  std::optional<ScreeningVerdict> push(const ThermalFrame& frame, const Vector& mu, double fused_d) {
    return push_reading(max_excess_reading(frame, mu).reading, fused_d);
  }

  /// Number of frames before the first verdict.
  std::size_t frames_to_first_verdict() const { return 2 * static_cast<std::size_t>(p_.q) - 1; }
  double ambient() const { return t_amb_; }
  std::optional<double> last_distance() const { return last_d_; }
  const ScreeningParams& params() const { return p_; }

 private:
  ScreeningParams p_;
  double t_amb_;
  std::deque<double> readings_;
  std::deque<double> distances_;
  std::deque<double> llrs_;
  std::deque<double> t_hats_;
  std::optional<double> last_d_;
};

// ---------------------------------------------------------------------------
// ROC
// ---------------------------------------------------------------------------
struct LabeledWindow {
  bool positive{false};
  std::vector<double> llrs;
};

struct RocPoint {
  double xi{0.0};
  std::size_t tp{0}, fp{0}, tn{0}, fn{0};
  double tpr() const { return tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0; }
  double fpr() const { return fp + tn ? static_cast<double>(fp) / static_cast<double>(fp + tn) : 0.0; }
  double precision_f1() const { return tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0; }
  double recall_f1() const { return tpr(); }
  double precision_f0() const { return tn + fn ? static_cast<double>(tn) / static_cast<double>(tn + fn) : 0.0; }
  double recall_f0() const { return fp + tn ? static_cast<double>(tn) / static_cast<double>(fp + tn) : 0.0; }
};

struct RocReport {
  std::vector<RocPoint> points;  ///< in the order of the xi sweep
  double auc{0.0};

  std::string to_csv() const {
    std::ostringstream os;
    os << "xi,fpr,tpr,tp,fp,tn,fn,precision_f1,recall_f1,precision_f0,recall_f0\n";
    os.precision(10);
    for (const auto& pt : points) {
      os << pt.xi << ',' << pt.fpr() << ',' << pt.tpr() << ',' << pt.tp << ',' << pt.fp << ',' << pt.tn
         << ',' << pt.fn << ',' << pt.precision_f1() << ',' << pt.recall_f1() << ','
         << pt.precision_f0() << ',' << pt.recall_f0() << '\n';
    }
    return os.str();
  }
};

/// Confusion-matrix sweep of the majority-vote verdict over xi. The AUC is the
/// trapezoidal area under the (FPR, TPR) curve completed with (0,0) and (1,1).
inline RocReport roc_report(std::span<const LabeledWindow> windows, std::span<const double> xis) {
  std::size_t pos = 0;
  for (const auto& w : windows) pos += w.positive;
  if (pos == 0 || pos == windows.size()) throw UsageError("ROC needs both positive and negative windows");
  if (xis.empty()) throw UsageError("empty xi sweep");
  RocReport rep;
  for (double xi : xis) {
    RocPoint pt{xi};
    for (const auto& w : windows) {
      const bool f1 = screen(w.llrs, xi).state == ScreeningState::F1;
      if (w.positive) {
        (f1 ? pt.tp : pt.fn)++;
      } else {
        (f1 ? pt.fp : pt.tn)++;
      }
    }
    rep.points.push_back(pt);
  }
  std::vector<std::pair<double, double>> curve{{0.0, 0.0}, {1.0, 1.0}};
  for (const auto& pt : rep.points) curve.emplace_back(pt.fpr(), pt.tpr());
  std::sort(curve.begin(), curve.end());
  for (std::size_t i = 1; i < curve.size(); ++i) {
    rep.auc += (curve[i].first - curve[i - 1].first) * 0.5 * (curve[i].second + curve[i - 1].second);
  }
  return rep;
}

/// Default sweep: xi from -lim to +lim in n steps.
inline std::vector<double> xi_sweep(double lim = 20.0, std::size_t n = 401) {
  std::vector<double> xs;
  for (std::size_t i = 0; i < n; ++i) {
    xs.push_back(-lim + 2.0 * lim * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  xs.push_back(std::numeric_limits<double>::infinity());
  xs.insert(xs.begin(), -std::numeric_limits<double>::infinity());
  return xs;
}

}  // namespace thermotrack
