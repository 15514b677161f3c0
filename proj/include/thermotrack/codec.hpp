// codec.hpp -- 8-bit quantized wire format for thermal frames.
//
// One JSON object per frame:
//   {"sensor_id": "<decimal u64>", "ts_ms": <int>, "codes": [c_0, ..., c_{M-1}]}
// with code = round(temp / 0.25), code in [0, 255].
#pragma once

#include "thermotrack/core.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <string>

namespace thermotrack {

inline constexpr double kQuantStep = 0.25;
inline constexpr double kQuantMax = 63.75;
inline constexpr int kCodeMax = 255;

inline int quantize(double temp, std::size_t index = 0) {
  if (!std::isfinite(temp) || temp < 0.0 || temp > kQuantMax) {
    throw RangeError("detector " + std::to_string(index) + " temperature " +
                     std::to_string(temp) + " outside [0, 63.75] degC");
  }
  return static_cast<int>(std::lround(temp / kQuantStep));
}

inline double dequantize(int code) { return code * kQuantStep; }

inline nlohmann::json encode_frame(const ThermalFrame& frame) {
  nlohmann::json codes = nlohmann::json::array();
  for (Eigen::Index i = 0; i < frame.temps.size(); ++i) {
    codes.push_back(quantize(frame.temps[i], static_cast<std::size_t>(i)));
  }
  return nlohmann::json{{"sensor_id", std::to_string(frame.sensor_id)},
                        {"ts_ms", frame.ts_ms},
                        {"codes", std::move(codes)}};
}

inline std::string encode_frame_line(const ThermalFrame& frame) {
  return encode_frame(frame).dump();
}

namespace detail {

inline std::uint64_t parse_sensor_id(const nlohmann::json& v) {
  if (v.is_string()) {
    const std::string& s = v.get_ref<const std::string&>();
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
      throw ParseError("sensor_id is not a decimal 64-bit integer: '" + s + "'");
    }
    return out;
  }
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  throw ParseError("sensor_id must be a decimal string");
}

}  // namespace detail

/// Decodes a wire record. `expected_m` == 0 accepts any length.
inline ThermalFrame decode_frame(const nlohmann::json& record, std::size_t expected_m = 64) {
  if (!record.is_object()) throw ParseError("frame record is not a JSON object");
  if (!record.contains("sensor_id")) throw ParseError("frame record missing sensor_id");
  if (!record.contains("ts_ms") || !record["ts_ms"].is_number_integer()) {
    throw ParseError("frame record missing integer ts_ms");
  }
  if (!record.contains("codes") || !record["codes"].is_array()) {
    throw ParseError("frame record missing codes array");
  }
  const auto& codes = record["codes"];
  if (expected_m != 0 && codes.size() != expected_m) {
    throw ParseError("frame record has " + std::to_string(codes.size()) + " codes, expected " +
                     std::to_string(expected_m));
  }
  ThermalFrame frame;
  frame.sensor_id = detail::parse_sensor_id(record["sensor_id"]);
  frame.ts_ms = record["ts_ms"].get<std::int64_t>();
  frame.temps.resize(static_cast<Eigen::Index>(codes.size()));
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (!codes[i].is_number_integer()) {
      throw ParseError("code " + std::to_string(i) + " is not an integer");
    }
    const auto c = codes[i].get<std::int64_t>();
    if (c < 0 || c > kCodeMax) {
      throw ParseError("code " + std::to_string(i) + " outside [0, 255]");
    }
    frame.temps[static_cast<Eigen::Index>(i)] = dequantize(static_cast<int>(c));
  }
  return frame;
}

inline ThermalFrame decode_frame_line(const std::string& line, std::size_t expected_m = 64) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed frame JSON: ") + e.what());
  }
  return decode_frame(j, expected_m);
}

}  // namespace thermotrack
