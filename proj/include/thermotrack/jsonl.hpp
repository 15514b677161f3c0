// jsonl.hpp -- one-record-per-line JSON for estimates, truth, radar samples,
// verdicts, alerts and occupancy snapshots.
#pragma once

#include "thermotrack/codec.hpp"
#include "thermotrack/counting.hpp"
#include "thermotrack/records.hpp"
#include "thermotrack/screening.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <functional>
#include <istream>
#include <string>

namespace thermotrack {

namespace detail {

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline std::optional<double> read_optional(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

}  // namespace detail

inline json to_json(const TrackEstimate& e) {
  json j{{"sensor_id", std::to_string(e.sensor_id)},
         {"ts_ms", e.ts_ms},
         {"roi", e.roi},
         {"occupied", e.occupied},
         {"d_hat_m", detail::optional_number(e.d_hat_m)},
         {"theta_hat_deg", detail::optional_number(e.theta_hat_deg)}};
  if (e.posterior) j["posterior"] = *e.posterior;
  return j;
}

inline TrackEstimate track_estimate_from_json(const json& j) {
  TrackEstimate e;
  e.sensor_id = detail::parse_sensor_id(j.at("sensor_id"));
  e.ts_ms = j.at("ts_ms").get<std::int64_t>();
  e.roi = j.at("roi").get<std::size_t>();
  e.occupied = j.at("occupied").get<bool>();
  e.d_hat_m = detail::read_optional(j, "d_hat_m");
  e.theta_hat_deg = detail::read_optional(j, "theta_hat_deg");
  if (j.contains("posterior")) e.posterior = j["posterior"].get<std::vector<double>>();
  return e;
}

inline json to_json(const TruthRecord& t) {
  json bodies = json::array();
  for (const auto& b : t.bodies) {
    json jb{{"roi", b.roi ? json(*b.roi) : json(nullptr)},
            {"rois", b.rois},
            {"d_m", b.d_m},
            {"theta_deg", b.theta_deg},
            {"x_m", b.x_m},
            {"y_m", b.y_m},
            {"t_body_c", detail::optional_number(b.t_body_c)}};
    bodies.push_back(std::move(jb));
  }
  return json{{"sensor_id", std::to_string(t.sensor_id)}, {"ts_ms", t.ts_ms}, {"bodies", std::move(bodies)}};
}

inline TruthRecord truth_from_json(const json& j) {
  TruthRecord t;
  if (j.contains("sensor_id")) t.sensor_id = detail::parse_sensor_id(j["sensor_id"]);
  t.ts_ms = j.at("ts_ms").get<std::int64_t>();
  for (const auto& jb : j.at("bodies")) {
    TruthBody b;
    if (jb.contains("roi") && !jb["roi"].is_null()) b.roi = jb["roi"].get<std::size_t>();
    if (jb.contains("rois")) b.rois = jb["rois"].get<std::vector<std::size_t>>();
    else if (b.roi) b.rois = {*b.roi};
    b.d_m = jb.value("d_m", 0.0);
    b.theta_deg = jb.value("theta_deg", 0.0);
    b.x_m = jb.value("x_m", 0.0);
    b.y_m = jb.value("y_m", 0.0);
    b.t_body_c = detail::read_optional(jb, "t_body_c");
    t.bodies.push_back(std::move(b));
  }
  return t;
}

inline json to_json(const RadarSample& r) {
  return json{{"ts_ms", r.ts_ms}, {"d_m", r.d_m}, {"quality", r.quality}};
}

inline RadarSample radar_from_json(const json& j) {
  RadarSample r;
  r.ts_ms = j.at("ts_ms").get<std::int64_t>();
  r.d_m = j.at("d_m").get<double>();
  r.quality = j.value("quality", 1.0);
  return r;
}

struct VerdictRecord {
  std::uint64_t sensor_id{0};
  std::int64_t ts_ms{0};
  ScreeningVerdict verdict;
  double t_amb_c{0.0};
  double d_m{0.0};
};

inline json to_json(const VerdictRecord& v) {
  return json{{"sensor_id", std::to_string(v.sensor_id)},
              {"ts_ms", v.ts_ms},
              {"state", to_string(v.verdict.state)},
              {"soft", v.verdict.soft},
              {"t_body_c", v.verdict.t_body_hat},
              {"t_amb_c", v.t_amb_c},
              {"d_m", v.d_m},
              {"llr", v.verdict.llr_trace},
              {"warnings", v.verdict.warnings}};
}

inline json to_json(const DistancingAlert& a) {
  return json{{"ts_ms", a.ts_ms},
              {"sensor_id", std::to_string(a.sensor_id)},
              {"roi_pair", {a.roi_a, a.roi_b}},
              {"distance_m", a.distance_m},
              {"window", a.window}};
}

inline DistancingAlert alert_from_json(const json& j) {
  DistancingAlert a;
  a.ts_ms = j.at("ts_ms").get<std::int64_t>();
  a.sensor_id = detail::parse_sensor_id(j.at("sensor_id"));
  a.roi_a = j.at("roi_pair").at(0).get<std::size_t>();
  a.roi_b = j.at("roi_pair").at(1).get<std::size_t>();
  a.distance_m = j.at("distance_m").get<double>();
  a.window = j.at("window").get<std::int64_t>();
  return a;
}

inline json to_json(const OccupancySnapshot& s) {
  return json{{"sensor_id", std::to_string(s.sensor_id)},
              {"ts_ms", s.ts_ms},
              {"occupancy", s.occupancy},
              {"count", count(std::span<const std::uint8_t>(s.occupancy))}};
}

inline OccupancySnapshot snapshot_from_json(const json& j) {
  OccupancySnapshot s;
  s.sensor_id = detail::parse_sensor_id(j.at("sensor_id"));
  s.ts_ms = j.at("ts_ms").get<std::int64_t>();
  s.occupancy = j.at("occupancy").get<std::vector<std::uint8_t>>();
  return s;
}

/// Calls `fn` for each non-blank line parsed as JSON. Parse failures throw
/// ParseError with the line number.
inline void for_each_jsonl(std::istream& in, const std::function<void(const json&)>& fn) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(n) + ": " + e.what());
    }
    fn(j);
  }
}

inline void for_each_jsonl_file(const std::string& path, const std::function<void(const json&)>& fn) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  for_each_jsonl(in, fn);
}

template <class T, class Parse>
std::vector<T> read_jsonl_file(const std::string& path, Parse parse) {
  std::vector<T> out;
  for_each_jsonl_file(path, [&](const json& j) {
    try {
      out.push_back(parse(j));
    } catch (const json::exception& e) {
      throw ParseError("'" + path + "': " + e.what());
    }
  });
  return out;
}

}  // namespace thermotrack
