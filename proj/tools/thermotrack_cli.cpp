// thermotrack -- command-line driver: track, count, screen, simulate, fit, eval.
#include "thermotrack/thermotrack.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <set>

namespace fs = std::filesystem;
using namespace thermotrack;

namespace {

struct Options {
  std::string mode;
  std::string frames;
  std::string layout;
  std::string params;
  std::string out;
  std::string alerts;
  std::string radar;
  std::string scene = "wall-walk";
  std::string truth;
  std::string est;
  std::string samples;
  std::uint64_t seed = 7;
  std::size_t warmup = 100;
  std::size_t n_frames = 600;
  std::optional<std::size_t> zeta;
  std::optional<double> threshold_m;
  std::optional<std::size_t> q;
  std::optional<double> xi;
  std::optional<double> lambda;
  std::size_t window = 2;
  bool posterior = false;
};

/// Output sink: a file when a path is given, stdout otherwise.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (path.empty() || path == "-") return;
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw InputError("cannot write '" + path + "'");
  }
  std::ostream& os() { return file_ ? *file_ : std::cout; }
  void line(const json& j) { os() << j.dump() << '\n'; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("thermotrack");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("THERMOTRACK_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
}

ModelParams load_model_params(const Options& o) {
  ModelParams p = load_params(o.params);
  if (o.zeta) p.counting.zeta = *o.zeta;
  if (o.threshold_m) p.counting.alert_threshold_m = *o.threshold_m;
  if (o.q) p.screening.q = *o.q;
  if (o.xi) p.screening.xi = *o.xi;
  validate_params(p);
  return p;
}

std::unique_ptr<LineSource> open_frames(const Options& o, std::unique_ptr<std::ifstream>& file) {
  if (o.frames.empty()) throw UsageError("--frames is required");
  if (o.frames.rfind("tcp://", 0) == 0) {
    return std::unique_ptr<LineSource>(new SocketLineSource(SocketLineSource::from_endpoint(o.frames)));
  }
  file = std::make_unique<std::ifstream>(o.frames);
  if (!*file) throw InputError("cannot open '" + o.frames + "'");
  return std::make_unique<StreamLineSource>(*file);
}

/// Per-sensor lane: collects warm-up frames, then owns the background model.
struct BackgroundLane {
  std::vector<ThermalFrame> warm;
  std::optional<BackgroundModel> bg;

  /// Returns true once the background exists and `f` should be processed.
  bool accept(const ThermalFrame& f, std::size_t warmup, const BackgroundParams& p) {
    if (bg) return true;
    warm.push_back(f);
    if (warm.size() >= std::max<std::size_t>(warmup, 2)) {
      bg = init_background(warm, p);
      warm.clear();
      spdlog::info("sensor {}: background ready (T_amb {:.2f} C)", f.sensor_id, ambient_temperature(*bg));
    }
    return false;
  }

  void update(const ThermalFrame& f, bool any_occupied, const BackgroundParams& p) {
    if (p.gate_updates && any_occupied) return;
    *bg = update_background(std::move(*bg), f);
  }
};

void log_counters(const IngestCounters& c) {
  spdlog::info("ingest: accepted {}, malformed {}, duplicates {}, late {}", c.accepted, c.malformed,
               c.duplicates, c.late);
  if (c.malformed + c.duplicates + c.late > 0) {
    spdlog::warn("dropped {} malformed, {} duplicate, {} late records", c.malformed, c.duplicates, c.late);
  }
}

// ---------------------------------------------------------------------------
// track
// ---------------------------------------------------------------------------
int run_track(const Options& o) {
  const auto p = load_model_params(o);
  const auto layout = load_layout(o.layout.empty() ? "wall5" : o.layout);
  if (layout.mount != Mount::Wall) throw UsageError("track needs a wall-mount layout");
  const SignatureModel sig(layout, p.signature);
  std::unique_ptr<std::ifstream> file;
  auto src = open_frames(o, file);
  Sink out(o.out);

  struct Lane {
    BackgroundLane bg;
    std::optional<WallTracker> tracker;
  };
  std::map<std::uint64_t, Lane> lanes;
  const auto counters = ingest_stream(
      *src,
      [&](ThermalFrame f) {
        auto& lane = lanes[f.sensor_id];
        if (!lane.bg.accept(f, o.warmup, p.background)) return;
        if (!lane.tracker) lane.tracker.emplace(sig, p.tracking);
        const auto& st = lane.tracker->step(f, *lane.bg.bg);
        for (const auto& e : lane.tracker->estimates(f.sensor_id, o.posterior)) out.line(to_json(e));
        lane.bg.update(f, st.any_occupied(), p.background);
      },
      layout.detector_count(), o.window);
  log_counters(counters);
  return 0;
}

// ---------------------------------------------------------------------------
// count
// ---------------------------------------------------------------------------
int run_count(const Options& o) {
  const auto p = load_model_params(o);
  const auto layout = load_layout(o.layout.empty() ? "ceiling12" : o.layout);
  if (layout.mount != Mount::Ceiling) throw UsageError("count needs a ceiling-mount layout");
  const SignatureModel sig(layout, p.signature);
  const auto trans = OccupancyTransition::nearest_neighbour(layout, p.counting);
  std::unique_ptr<std::ifstream> file;
  auto src = open_frames(o, file);
  Sink out(o.out);
  std::optional<Sink> alert_sink;
  if (!o.alerts.empty()) alert_sink.emplace(o.alerts);
  DistancingMonitor monitor(layout_footprints(layout), p.counting.alert_threshold_m,
                            p.counting.alert_window_ms);

  struct Lane {
    BackgroundLane bg;
    std::optional<CeilingCounter> counter;
  };
  std::map<std::uint64_t, Lane> lanes;
  std::size_t n_alerts = 0;
  const auto counters = ingest_stream(
      *src,
      [&](ThermalFrame f) {
        auto& lane = lanes[f.sensor_id];
        if (!lane.bg.accept(f, o.warmup, p.background)) return;
        if (!lane.counter) lane.counter.emplace(sig, trans, p.counting.zeta);
        const auto& res = lane.counter->step(f, *lane.bg.bg);
        const OccupancySnapshot snap{f.sensor_id, f.ts_ms, res.occupancy()};
        out.line(to_json(snap));
        for (const auto& a : monitor.push(snap)) {
          ++n_alerts;
          (alert_sink ? *alert_sink : out).line(to_json(a));
        }
        lane.bg.update(f, res.r_hat != 0, p.background);
      },
      layout.detector_count(), o.window);
  log_counters(counters);
  spdlog::info("{} distancing alerts", n_alerts);
  return 0;
}

// ---------------------------------------------------------------------------
// screen
// ---------------------------------------------------------------------------
int run_screen(const Options& o) {
  const auto p = load_model_params(o);
  const auto layout = load_layout(o.layout.empty() ? "wall5" : o.layout);
  if (layout.mount != Mount::Wall) throw UsageError("screen needs a wall-mount layout");
  const SignatureModel sig(layout, p.signature);
  std::vector<RadarSample> radar;
  if (!o.radar.empty()) radar = read_jsonl_file<RadarSample>(o.radar, radar_from_json);
  const auto tolerance_ms = static_cast<std::int64_t>(p.tracking.frame_interval_s * 1000.0 / 2.0);
  std::unique_ptr<std::ifstream> file;
  auto src = open_frames(o, file);
  Sink out(o.out);

  struct Lane {
    BackgroundLane bg;
    std::optional<WallTracker> tracker;
    std::optional<ScreeningSession> session;
  };
  std::map<std::uint64_t, Lane> lanes;
  const auto counters = ingest_stream(
      *src,
      [&](ThermalFrame f) {
        auto& lane = lanes[f.sensor_id];
        if (!lane.bg.accept(f, o.warmup, p.background)) return;
        if (!lane.tracker) lane.tracker.emplace(sig, p.tracking);
        const auto& st = lane.tracker->step(f, *lane.bg.bg);
        const BackgroundModel& bg = *lane.bg.bg;

        // subject ROI: the occupied ROI with the strongest occupancy evidence
        std::optional<std::size_t> roi;
        for (std::size_t k = 0; k < st.rois.size(); ++k) {
          const auto& r = st.rois[k];
          if (!r.occupied) continue;
          if (!roi || r.log_occupied - r.log_empty >
                          st.rois[*roi].log_occupied - st.rois[*roi].log_empty) {
            roi = k;
          }
        }
        const auto radar_d = radar.empty() ? std::nullopt : match_radar(radar, f.ts_ms, tolerance_ms);
        std::optional<double> fused;
        if (roi) {
          fused = fuse_distance(*st.rois[*roi].d_hat, radar_d, p.screening);
        } else if (radar_d) {
          fused = *radar_d;
        }
        if (!fused) {
          lane.session.reset();  // subject left: start a fresh window next time
          lane.bg.update(f, st.any_occupied(), p.background);
          return;
        }
        if (!lane.session) lane.session.emplace(p.screening, ambient_temperature(bg));
        std::span<const std::size_t> support;
        if (roi) support = sig.support(*roi);
        const double reading = max_excess_reading(f, bg.mu, support).reading;
        if (auto v = lane.session->push_reading(reading, *fused)) {
          out.line(to_json(VerdictRecord{f.sensor_id, f.ts_ms, *v, lane.session->ambient(),
                                         lane.session->last_distance().value_or(*fused)}));
        }
        lane.bg.update(f, true, p.background);
      },
      layout.detector_count(), o.window);
  log_counters(counters);
  return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------
int run_simulate(const Options& o) {
  if (o.out.empty()) throw UsageError("simulate needs --out DIR");
  const auto p = load_model_params(o);
  fs::create_directories(o.out);
  const fs::path dir(o.out);
  SceneOptions so;
  so.seed = o.seed;
  so.n_frames = o.n_frames;
  so.signature = p.signature;

  if (o.scene == "screening") {
    // one subject per session at a random distance in [0.3, 1.1] m, hot pixel
    // only; radar stream with 0.1 m error alongside
    const auto layout = wall5_layout(p.signature);
    std::mt19937_64 rng(o.seed);
    std::uniform_real_distribution<double> ud(0.3, 1.1), ut(36.0, 38.5);
    std::normal_distribution<double> radar_err(0.0, p.screening.radar_std_m);
    Sink frames((dir / "frames.jsonl").string()), truth((dir / "truth.jsonl").string()),
        radar((dir / "radar.jsonl").string());
    const std::size_t per_subject = 2 * p.screening.q - 1;
    std::int64_t t0 = 0;
    Scene bg_scene = base_scene(layout, so);
    auto empty_gap = [&](std::size_t n, std::uint64_t stream) {
      for (auto f : synth_empty_frames(bg_scene, n, stream)) {
        f.ts_ms = t0;
        t0 += bg_scene.dt_ms;
        frames.os() << encode_frame_line(f) << '\n';
      }
    };
    empty_gap(o.warmup, 0);
    for (std::size_t s = 0; s * per_subject < o.n_frames; ++s) {
      TrajectoryParams tp;
      tp.start.d_m = ud(rng);
      tp.n_steps = per_subject;
      const double t_body = ut(rng);
      ScreeningSubjectOptions opt;
      opt.t0_ms = t0;
      const auto samples = synth_screening_subject(t_body, gen_trajectory(TrajectoryKind::Static, tp, 0), 23.0,
                                                   o.seed + s, layout, p.screening, opt);
      for (const auto& smp : samples) {
        frames.os() << encode_frame_line(smp.frame) << '\n';
        TruthRecord tr{smp.frame.sensor_id, smp.frame.ts_ms, {}};
        TruthBody b;
        b.d_m = smp.d_m;
        b.t_body_c = t_body;
        tr.bodies.push_back(b);
        truth.line(to_json(tr));
        radar.line(to_json(RadarSample{smp.frame.ts_ms, std::max(0.0, smp.d_m + radar_err(rng)), 1.0}));
      }
      t0 += static_cast<std::int64_t>(per_subject) * opt.dt_ms;
      empty_gap(p.screening.q, s + 1);  // subject leaves before the next one steps up
    }
    spdlog::info("wrote screening scene to {}", dir.string());
    return 0;
  }

  Scene scene = make_scene(o.scene, so);
  Sink frames((dir / "frames.jsonl").string()), truth((dir / "truth.jsonl").string());
  for (const auto& f : synth_empty_frames(scene, o.warmup)) frames.os() << encode_frame_line(f) << '\n';
  const SceneRenderer r(scene);
  std::size_t clipped = 0;
  for (std::size_t t = 0; t < scene.n_frames; ++t) {
    auto sf = r.render(t);
    for (Eigen::Index i = 0; i < sf.frame.temps.size(); ++i) {
      const double v = sf.frame.temps[i];
      if (v < 0.0 || v > kQuantMax) {
        sf.frame.temps[i] = std::clamp(v, 0.0, kQuantMax);
        ++clipped;
      }
    }
    for (const auto& d : sf.diagnostics) spdlog::debug("{}", d);
    frames.os() << encode_frame_line(sf.frame) << '\n';
    truth.line(to_json(sf.truth));
  }
  if (clipped) spdlog::warn("{} readings clipped to the codec range", clipped);
  write_json_file((dir / "layout.json").string(), layout_to_json(scene.layout));
  spdlog::info("wrote {} frames ({} warm-up) to {}", scene.n_frames + o.warmup, o.warmup, dir.string());
  return 0;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------
int run_fit(const Options& o) {
  Sink out(o.out);
  if (!o.samples.empty()) {
    // {d_m, increase} records -> s-relu parameters
    std::vector<DistanceSample> samples;
    for_each_jsonl_file(o.samples, [&](const json& j) {
      samples.push_back({j.at("d_m").get<double>(), j.at("increase").get<double>()});
    });
    const auto fit = fit_srelu(samples);
    out.os() << srelu_to_json(fit).dump(2) << '\n';
    return 0;
  }
  // frames + truth occupancy -> Lasso signature matrix
  if (o.frames.empty() || o.truth.empty()) throw UsageError("fit needs --samples, or --frames with --truth");
  const auto p = load_model_params(o);
  const auto layout = load_layout(o.layout.empty() ? "wall5" : o.layout);
  std::map<std::int64_t, TruthRecord> truth;
  for (auto& t : read_jsonl_file<TruthRecord>(o.truth, truth_from_json)) truth[t.ts_ms] = std::move(t);
  std::vector<ThermalFrame> empty;
  std::vector<TrainingSample> training;
  for_each_jsonl_file(o.frames, [&](const json& j) {
    auto f = decode_frame(j, layout.detector_count());
    auto it = truth.find(f.ts_ms);
    if (it == truth.end()) {
      empty.push_back(std::move(f));
      return;
    }
    TrainingSample s{std::vector<std::uint8_t>(layout.roi_count(), 0), f.temps};
    for (const auto& b : it->second.bodies) {
      for (std::size_t k : b.rois) {
        if (k < layout.roi_count()) s.occupancy[k] = 1;
      }
    }
    training.push_back(std::move(s));
  });
  if (empty.size() < 2) throw UsageError("fit needs warm-up frames without truth records");
  const auto bg = init_background(empty, p.background);
  const auto h = learn_signatures_lasso(training, bg.mu, bg.cov, o.lambda.value_or(p.signature.lambda_lasso));
  out.os() << learned_to_json(h).dump(2) << '\n';
  spdlog::info("lasso: {} sweeps, converged {}", h.sweeps, h.converged);
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------
int eval_tracking(const std::vector<json>& est, const std::vector<TruthRecord>& truth, Sink& out) {
  std::vector<TrackEstimate> e;
  for (const auto& j : est) e.push_back(track_estimate_from_json(j));
  const auto rep = rmse_report(e, truth);
  // pool per-distance rows into 0.5 m bins
  struct Bin {
    std::size_t matched = 0, missed = 0;
    double sq_d = 0.0, sq_aoa = 0.0;
  };
  std::map<int, Bin> bins;
  for (const auto& r : rep.rows) {
    auto& b = bins[static_cast<int>(std::floor(r.true_d_m / 0.5))];
    b.matched += r.matched;
    b.missed += r.missed;
    b.sq_d += static_cast<double>(r.matched) * r.d_rmse_m * r.d_rmse_m;
    b.sq_aoa += static_cast<double>(r.matched) * r.aoa_rmse_deg * r.aoa_rmse_deg;
  }
  out.os() << "true_d_m,matched,missed,d_rmse_m,aoa_rmse_deg\n";
  for (const auto& [i, b] : bins) {
    const double n = std::max<double>(1.0, static_cast<double>(b.matched));
    out.os() << fmt::format("{:.1f}-{:.1f},{},{},{:.4f},{:.3f}\n", 0.5 * i, 0.5 * (i + 1), b.matched, b.missed,
                            std::sqrt(b.sq_d / n), std::sqrt(b.sq_aoa / n));
  }
  const auto& r = rep.overall;
  out.os() << fmt::format("all,{},{},{:.4f},{:.3f}\n", r.matched, r.missed, r.d_rmse_m, r.aoa_rmse_deg);
  return 0;
}

int eval_screening(const std::vector<json>& est, const std::vector<TruthRecord>& truth, const ModelParams& p,
                   Sink& out) {
  std::map<std::int64_t, double> t_body;
  for (const auto& t : truth) {
    for (const auto& b : t.bodies) {
      if (b.t_body_c) t_body[t.ts_ms] = *b.t_body_c;
    }
  }
  std::vector<LabeledWindow> windows;
  for (const auto& j : est) {
    auto it = t_body.find(j.at("ts_ms").get<std::int64_t>());
    if (it == t_body.end()) continue;
    windows.push_back({it->second >= p.screening.t_max, j.at("llr").get<std::vector<double>>()});
  }
  const auto rep = roc_report(windows, xi_sweep());
  out.os() << rep.to_csv();
  spdlog::info("AUC {:.4f}", rep.auc);
  return 0;
}

int eval_alerts(const std::vector<json>& est, const std::vector<TruthRecord>& truth, const ModelParams& p,
                const SensorLayout& layout, Sink& out) {
  // truth alert events: pairs of bodies in ROIs whose footprints are closer
  // than the threshold, deduplicated per window
  std::vector<OccupancySnapshot> snaps;
  for (const auto& t : truth) {
    OccupancySnapshot s{t.sensor_id, t.ts_ms, std::vector<std::uint8_t>(layout.roi_count(), 0)};
    for (const auto& b : t.bodies) {
      if (b.roi && *b.roi < layout.roi_count()) s.occupancy[*b.roi] = 1;
    }
    snaps.push_back(std::move(s));
  }
  using Key = std::tuple<std::uint64_t, std::size_t, std::size_t, std::int64_t>;
  std::set<Key> want, got;
  for (const auto& a : distancing_alerts(snaps, layout_footprints(layout), p.counting.alert_threshold_m,
                                         p.counting.alert_window_ms)) {
    want.insert({a.sensor_id, a.roi_a, a.roi_b, a.window});
  }
  for (const auto& j : est) {
    if (!j.contains("roi_pair")) continue;
    const auto a = alert_from_json(j);
    got.insert({a.sensor_id, a.roi_a, a.roi_b, a.window});
  }
  std::size_t tp = 0;
  for (const auto& k : got) tp += want.count(k);
  const double precision = got.empty() ? 1.0 : static_cast<double>(tp) / static_cast<double>(got.size());
  const double recall = want.empty() ? 1.0 : static_cast<double>(tp) / static_cast<double>(want.size());
  out.os() << "alerts,truth_events,true_positives,precision,recall\n"
           << got.size() << ',' << want.size() << ',' << tp << ',' << precision << ',' << recall << '\n';
  return 0;
}

int run_eval(const Options& o) {
  if (o.est.empty() || o.truth.empty()) throw UsageError("eval needs --est and --truth");
  const auto p = load_model_params(o);
  std::vector<json> est;
  for_each_jsonl_file(o.est, [&](const json& j) { est.push_back(j); });
  if (est.empty()) throw InputError("'" + o.est + "' holds no records");
  const auto truth = read_jsonl_file<TruthRecord>(o.truth, truth_from_json);
  Sink out(o.out);
  const json& first = est.front();
  if (first.contains("d_hat_m")) return eval_tracking(est, truth, out);
  if (first.contains("state")) return eval_screening(est, truth, p, out);
  if (first.contains("roi_pair") || first.contains("occupancy")) {
    return eval_alerts(est, truth, p, load_layout(o.layout.empty() ? "ceiling12" : o.layout), out);
  }
  throw InputError("cannot tell what kind of records '" + o.est + "' holds");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian occupancy, tracking, counting and temperature screening for 8x8 thermopile arrays"};
  Options o;
  const std::vector<std::string> modes{"track", "count", "screen", "simulate", "fit", "eval"};
  app.add_option("mode,--mode", o.mode, "track | count | screen | simulate | fit | eval")
      ->required()
      ->check(CLI::IsMember(modes));
  app.add_option("--frames", o.frames, "frame JSONL file or tcp://host:port");
  app.add_option("--layout", o.layout, "layout preset (wall5, ceiling12) or JSON file");
  app.add_option("--params", o.params, "parameter JSON file (defaults when omitted)");
  app.add_option("--out", o.out, "output file (stdout when omitted); directory for simulate");
  app.add_option("--alerts", o.alerts, "count: separate JSONL file for distancing alerts");
  app.add_option("--seed", o.seed, "RNG seed");
  app.add_option("--radar", o.radar, "screen: radar distance JSONL");
  app.add_option("--zeta", o.zeta, "count: maximum co-present bodies");
  app.add_option("--threshold-m", o.threshold_m, "count: distancing alert threshold (m)");
  app.add_option("--q", o.q, "screen: window length Q");
  app.add_option("--xi", o.xi, "screen: LLR threshold");
  app.add_option("--scene", o.scene, "simulate: wall-static | wall-walk | corridor1..3 | screening");
  app.add_option("--n-frames", o.n_frames, "simulate: frames after warm-up");
  app.add_option("--warmup", o.warmup, "empty-scene frames used to initialise the background");
  app.add_option("--truth", o.truth, "ground-truth JSONL");
  app.add_option("--est", o.est, "eval: estimates, verdicts or alerts JSONL");
  app.add_option("--samples", o.samples, "fit: {d_m, increase} JSONL for the s-relu fit");
  app.add_option("--lambda", o.lambda, "fit: Lasso penalty");
  app.add_option("--reorder-window", o.window, "frames held per sensor for reordering");
  app.add_flag("--posterior", o.posterior, "track: include distance posteriors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  configure_logging();
  try {
    if (o.mode == "track") return run_track(o);
    if (o.mode == "count") return run_count(o);
    if (o.mode == "screen") return run_screen(o);
    if (o.mode == "simulate") return run_simulate(o);
    if (o.mode == "fit") return run_fit(o);
    return run_eval(o);
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    std::cerr << app.help();
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}
