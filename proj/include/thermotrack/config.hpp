// config.hpp -- layout presets and JSON (de)serialisation of layouts, model
// parameters, background state and fitted signatures.
//
// Every parameter key is optional on input; missing keys keep their defaults.
// Unknown keys are rejected so typos do not pass silently.
#pragma once

#include "thermotrack/background.hpp"
#include "thermotrack/core.hpp"
#include "thermotrack/signature.hpp"
#include "thermotrack/signature_fit.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <string>

namespace thermotrack {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// Wall mount, 8x8 array, 60 deg FOV, K = 5 ROIs at -30, -18, 0, 18, 30 deg.
inline SensorLayout wall5_layout(const SignatureParams& sp = {}) {
  SensorLayout l;
  l.mount = Mount::Wall;
  for (double a : {-30.0, -18.0, 0.0, 18.0, 30.0}) {
    RoiSpec r;
    r.aoa_deg = a;
    r.tau = sp.tau_wall;
    l.rois.push_back(r);
  }
  return with_geometric_masks(l);
}

/// Ceiling mount at 3 m, K = 12 ROIs on a regular 0.5 m grid (4 x 3);
/// ROI index k = j * 4 + i for column i (x) and row j (y).
inline SensorLayout ceiling12_layout(const SignatureParams& sp = {}) {
  SensorLayout l;
  l.mount = Mount::Ceiling;
  l.height_m = 3.0;
  l.cell_m = 0.5;
  for (double y : {-0.5, 0.0, 0.5}) {
    for (double x : {-0.75, -0.25, 0.25, 0.75}) {
      RoiSpec r;
      r.footprint_m = {x, y};
      r.tau = sp.tau_ceiling;
      l.rois.push_back(r);
    }
  }
  return with_geometric_masks(l);
}

inline SensorLayout layout_preset(const std::string& name) {
  if (name == "wall5") return wall5_layout();
  if (name == "ceiling12") return ceiling12_layout();
  throw ConfigError("unknown layout preset '" + name + "'");
}

namespace detail {

/// Reads or writes one named field; `Reader` mode tracks the keys it consumed.
class FieldIo {
 public:
  FieldIo(json* out, const json* in) : out_(out), in_(in) {}

  template <class T>
  void operator()(const char* key, T& value) {
    if (out_) {
      write(key, value);
      return;
    }
    seen_.insert(key);
    if (!in_->contains(key)) return;
    read(key, (*in_)[key], value);
  }

  void check_unknown(const std::string& where) const {
    if (!in_) return;
    for (auto it = in_->begin(); it != in_->end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
  }

 private:
  template <class T>
  void write(const char* key, const T& v) { (*out_)[key] = v; }
  void write(const char* key, const AlphaMode& v) {
    (*out_)[key] = v == AlphaMode::Auto ? "auto" : v == AlphaMode::Linear ? "linear" : "quadratic";
  }

  static void read(const char* key, const json& j, double& v) {
    if (!j.is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
    v = j.get<double>();
  }
  static void read(const char* key, const json& j, bool& v) {
    if (!j.is_boolean()) throw ConfigError(std::string("'") + key + "' must be a boolean");
    v = j.get<bool>();
  }
  static void read(const char* key, const json& j, std::size_t& v) {
    if (!j.is_number_integer() || j.get<std::int64_t>() < 0) {
      throw ConfigError(std::string("'") + key + "' must be a non-negative integer");
    }
    v = j.get<std::size_t>();
  }
  static void read(const char* key, const json& j, std::int64_t& v) {
    if (!j.is_number_integer()) throw ConfigError(std::string("'") + key + "' must be an integer");
    v = j.get<std::int64_t>();
  }
  static void read(const char* key, const json& j, AlphaMode& v) {
    const std::string s = j.is_string() ? j.get<std::string>() : "";
    if (s == "auto") v = AlphaMode::Auto;
    else if (s == "linear") v = AlphaMode::Linear;
    else if (s == "quadratic") v = AlphaMode::Quadratic;
    else throw ConfigError(std::string("'") + key + "' must be auto, linear or quadratic");
  }

  json* out_;
  const json* in_;
  std::set<std::string> seen_;
};

template <class F> void fields(SignatureParams& p, F& f) {
  f("sigma0", p.sigma0);
  f("gamma", p.gamma);
  f("sigma_t_wall", p.sigma_t_wall);
  f("sigma_t_ceiling", p.sigma_t_ceiling);
  f("sigma_bar_ceiling", p.sigma_bar_ceiling);
  f("tau_wall", p.tau_wall);
  f("tau_ceiling", p.tau_ceiling);
  f("lambda_lasso", p.lambda_lasso);
}
template <class F> void fields(BackgroundParams& p, F& f) {
  f("lambda_mu", p.lambda_mu);
  f("lambda_c", p.lambda_c);
  f("ridge", p.ridge);
  f("diagonal", p.diagonal);
  f("gate_updates", p.gate_updates);
}
template <class F> void fields(TrackingParams& p, F& f) {
  f("delta_d", p.delta_d);
  f("walk_speed_mps", p.walk_speed_mps);
  f("frame_interval_s", p.frame_interval_s);
}
template <class F> void fields(CountingParams& p, F& f) {
  f("zeta", p.zeta);
  f("p_stay", p.p_stay);
  f("p_move", p.p_move);
  f("p_exit", p.p_exit);
  f("p_birth", p.p_birth);
  f("adjacency_radius_m", p.adjacency_radius_m);
  f("alert_threshold_m", p.alert_threshold_m);
  f("alert_window_ms", p.alert_window_ms);
}
template <class F> void fields(ScreeningParams& p, F& f) {
  f("alpha0_lin", p.alpha0_lin);
  f("alpha1_lin", p.alpha1_lin);
  f("alpha0_quad", p.alpha0_quad);
  f("alpha1_quad", p.alpha1_quad);
  f("alpha2_quad", p.alpha2_quad);
  f("alpha_switch_m", p.alpha_switch_m);
  f("alpha_mode", p.alpha_mode);
  f("beta0", p.beta0);
  f("beta1", p.beta1);
  f("sigma_body", p.sigma_body);
  f("xi", p.xi);
  f("q", p.q);
  f("t_max", p.t_max);
  f("t_min", p.t_min);
  f("t_amb_low", p.t_amb_low);
  f("t_amb_high", p.t_amb_high);
  f("max_distance_m", p.max_distance_m);
  f("radar_std_m", p.radar_std_m);
  f("ir_std_m", p.ir_std_m);
  f("fusion_gate_m", p.fusion_gate_m);
}

template <class P>
json section_to_json(P p) {
  json out = json::object();
  FieldIo io(&out, nullptr);
  fields(p, io);
  return out;
}

template <class P>
void section_from_json(const json& j, P& p, const std::string& name) {
  if (!j.is_object()) throw ConfigError("'" + name + "' must be an object");
  FieldIo io(nullptr, &j);
  fields(p, io);
  io.check_unknown(name);
}

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty()) throw ConfigError("'" + name + "' must be a non-empty 2-D array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError("'" + name + "' rows differ in length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

inline json vector_to_json(const Vector& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Vector vector_from_json(const json& j, const std::string& name) {
  if (!j.is_array()) throw ConfigError("'" + name + "' must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Params
// ---------------------------------------------------------------------------
inline json params_to_json(const ModelParams& p) {
  return json{{"signature", detail::section_to_json(p.signature)},
              {"background", detail::section_to_json(p.background)},
              {"tracking", detail::section_to_json(p.tracking)},
              {"counting", detail::section_to_json(p.counting)},
              {"screening", detail::section_to_json(p.screening)}};
}

inline ModelParams params_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("params must be a JSON object");
  ModelParams p;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "signature") detail::section_from_json(*it, p.signature, k);
    else if (k == "background") detail::section_from_json(*it, p.background, k);
    else if (k == "tracking") detail::section_from_json(*it, p.tracking, k);
    else if (k == "counting") detail::section_from_json(*it, p.counting, k);
    else if (k == "screening") detail::section_from_json(*it, p.screening, k);
    else throw ConfigError("unknown params section '" + k + "'");
  }
  validate_params(p);
  return p;
}

// ---------------------------------------------------------------------------
// Layout
// ---------------------------------------------------------------------------
inline json layout_to_json(const SensorLayout& l) {
  json rois = json::array();
  for (const auto& r : l.rois) {
    json jr{{"tau", r.tau}};
    if (l.mount == Mount::Wall) jr["aoa_deg"] = r.aoa_deg;
    else jr["footprint_m"] = {r.footprint_m[0], r.footprint_m[1]};
    if (!r.mask.empty()) jr["mask"] = r.mask;
    rois.push_back(std::move(jr));
  }
  json out{{"mount", to_string(l.mount)}, {"rows", l.rows},       {"cols", l.cols},
           {"fov_deg", l.fov_deg},        {"rois", std::move(rois)}};
  if (l.mount == Mount::Wall) {
    out["d_min"] = l.d_min;
    out["d_max"] = l.d_max;
  } else {
    out["height_m"] = l.height_m;
    out["cell_m"] = l.cell_m;
  }
  return out;
}

/// ROI masks are rebuilt from geometry unless every ROI lists one.
inline SensorLayout layout_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("layout must be a JSON object");
  static const std::set<std::string> known{"mount", "rows", "cols", "fov_deg", "rois",
                                           "d_min", "d_max", "height_m", "cell_m"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in layout");
  }
  SensorLayout l;
  const std::string mount = j.value("mount", std::string("wall"));
  if (mount == "wall") l.mount = Mount::Wall;
  else if (mount == "ceiling") l.mount = Mount::Ceiling;
  else throw ConfigError("mount must be 'wall' or 'ceiling'");
  l.rows = j.value("rows", l.rows);
  l.cols = j.value("cols", l.cols);
  l.fov_deg = j.value("fov_deg", l.fov_deg);
  l.d_min = j.value("d_min", l.d_min);
  l.d_max = j.value("d_max", l.d_max);
  l.height_m = j.value("height_m", l.height_m);
  l.cell_m = j.value("cell_m", l.cell_m);
  if (!j.contains("rois") || !j["rois"].is_array()) throw ConfigError("layout needs a 'rois' array");
  bool all_masks = true;
  for (const auto& jr : j["rois"]) {
    RoiSpec r;
    r.index = l.rois.size();
    const SignatureParams defaults;
    r.tau = jr.value("tau", l.mount == Mount::Wall ? defaults.tau_wall : defaults.tau_ceiling);
    if (l.mount == Mount::Wall) {
      if (!jr.contains("aoa_deg")) throw ConfigError("wall ROI needs aoa_deg");
      r.aoa_deg = jr["aoa_deg"].get<double>();
    } else {
      if (!jr.contains("footprint_m") || jr["footprint_m"].size() != 2) {
        throw ConfigError("ceiling ROI needs footprint_m [x, y]");
      }
      r.footprint_m = {jr["footprint_m"][0].get<double>(), jr["footprint_m"][1].get<double>()};
    }
    if (jr.contains("mask")) r.mask = jr["mask"].get<Mask>();
    else all_masks = false;
    l.rois.push_back(std::move(r));
  }
  if (!all_masks) return with_geometric_masks(std::move(l));
  validate_layout(l);
  return l;
}

// ---------------------------------------------------------------------------
// Background state and fitted signatures
// ---------------------------------------------------------------------------
inline json background_to_json(const BackgroundModel& bg) {
  return json{{"mu", detail::vector_to_json(bg.mu)},     {"cov", detail::matrix_to_json(bg.cov)},
              {"lambda_mu", bg.lambda_mu},               {"lambda_c", bg.lambda_c},
              {"ridge", bg.ridge},                       {"diagonal", bg.diagonal},
              {"frames_seen", bg.frames_seen}};
}

inline BackgroundModel background_from_json(const json& j) {
  BackgroundModel bg;
  if (!j.contains("mu") || !j.contains("cov")) throw ConfigError("background state needs mu and cov");
  bg.mu = detail::vector_from_json(j["mu"], "mu");
  bg.cov = detail::matrix_from_json(j["cov"], "cov");
  if (bg.cov.rows() != bg.mu.size() || bg.cov.cols() != bg.mu.size()) {
    throw ConfigError("background cov size differs from mu");
  }
  bg.lambda_mu = j.value("lambda_mu", bg.lambda_mu);
  bg.lambda_c = j.value("lambda_c", bg.lambda_c);
  bg.ridge = j.value("ridge", bg.ridge);
  bg.diagonal = j.value("diagonal", bg.diagonal);
  bg.frames_seen = j.value("frames_seen", bg.frames_seen);
  return bg;
}

inline json learned_to_json(const LearnedSignatureMatrix& h) {
  return json{{"H", detail::matrix_to_json(h.H)}, {"lambda", h.lambda}, {"residual", h.residual},
              {"sweeps", h.sweeps},                {"converged", h.converged}};
}

inline LearnedSignatureMatrix learned_from_json(const json& j) {
  LearnedSignatureMatrix h;
  if (!j.contains("H")) throw ConfigError("learned signatures need 'H'");
  h.H = detail::matrix_from_json(j["H"], "H");
  h.lambda = j.value("lambda", 0.0);
  h.residual = j.value("residual", 0.0);
  h.sweeps = j.value("sweeps", 0);
  h.converged = j.value("converged", false);
  return h;
}

inline json srelu_to_json(const SreluFit& f) {
  return json{{"sigma0", f.sigma0}, {"gamma", f.gamma}, {"rmse", f.rmse}, {"iterations", f.iterations}};
}

inline SreluFit srelu_from_json(const json& j) {
  SreluFit f;
  f.sigma0 = j.at("sigma0").get<double>();
  f.gamma = j.at("gamma").get<double>();
  f.rmse = j.value("rmse", 0.0);
  f.iterations = j.value("iterations", 0);
  return f;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------
inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

/// A layout argument is either a preset name or a JSON file path.
inline SensorLayout load_layout(const std::string& arg) {
  if (arg == "wall5" || arg == "ceiling12") return layout_preset(arg);
  try {
    return layout_from_json(read_json_file(arg));
  } catch (const json::exception& e) {
    throw ConfigError("layout '" + arg + "': " + e.what());
  }
}

inline ModelParams load_params(const std::string& path) {
  if (path.empty()) return {};
  return params_from_json(read_json_file(path));
}

}  // namespace thermotrack
