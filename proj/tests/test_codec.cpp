#include "thermotrack/codec.hpp"
#include "thermotrack/config.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace thermotrack;

namespace {

ThermalFrame flat_frame(double t, std::size_t m = 64) {
  ThermalFrame f;
  f.sensor_id = 42;
  f.ts_ms = 1'700'000'000'000;
  f.temps = Vector::Constant(static_cast<Eigen::Index>(m), t);
  return f;
}

}  // namespace

TEST(Codec, QuantizesToQuarterDegrees) {
  EXPECT_EQ(quantize(23.37), 93);
  EXPECT_DOUBLE_EQ(dequantize(93), 23.25);
  EXPECT_EQ(quantize(0.0), 0);
  EXPECT_DOUBLE_EQ(dequantize(0), 0.0);
  EXPECT_EQ(quantize(63.75), 255);
  EXPECT_DOUBLE_EQ(dequantize(255), 63.75);
}

TEST(Codec, OutOfRangeNamesDetector) {
  auto f = flat_frame(20.0);
  f.temps[17] = 64.0;
  try {
    encode_frame(f);
    FAIL() << "expected RangeError";
  } catch (const RangeError& e) {
    EXPECT_NE(std::string(e.what()).find("detector 17"), std::string::npos);
  }
  f.temps[17] = -0.01;
  EXPECT_THROW(encode_frame(f), RangeError);
  f.temps[17] = std::nan("");
  EXPECT_THROW(encode_frame(f), RangeError);
}

TEST(Codec, Codes80DecodeTo20Degrees) {
  nlohmann::json rec{{"sensor_id", "7"}, {"ts_ms", 5}, {"codes", std::vector<int>(64, 80)}};
  const auto f = decode_frame(rec);
  EXPECT_EQ(f.sensor_id, 7u);
  EXPECT_EQ(f.ts_ms, 5);
  for (Eigen::Index i = 0; i < 64; ++i) EXPECT_DOUBLE_EQ(f.temps[i], 20.0);
}

TEST(Codec, RejectsMalformedRecords) {
  nlohmann::json rec{{"sensor_id", "7"}, {"ts_ms", 5}, {"codes", std::vector<int>(63, 80)}};
  EXPECT_THROW(decode_frame(rec), ParseError);
  rec["codes"] = std::vector<int>(64, 80);
  auto no_ts = rec;
  no_ts.erase("ts_ms");
  EXPECT_THROW(decode_frame(no_ts), ParseError);
  auto no_id = rec;
  no_id.erase("sensor_id");
  EXPECT_THROW(decode_frame(no_id), ParseError);
  auto bad_code = rec;
  bad_code["codes"][3] = 256;
  EXPECT_THROW(decode_frame(bad_code), ParseError);
  auto bad_id = rec;
  bad_id["sensor_id"] = "12a";
  EXPECT_THROW(decode_frame(bad_id), ParseError);
  EXPECT_THROW(decode_frame_line("{not json"), ParseError);
}

TEST(Codec, FullRangeSensorId) {
  auto f = flat_frame(20.0);
  f.sensor_id = 18'446'744'073'709'551'615ull;
  const auto back = decode_frame(encode_frame(f));
  EXPECT_EQ(back.sensor_id, f.sensor_id);
}

TEST(Codec, EncodeDecodeWithinHalfStep) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 63.75);
  for (int rep = 0; rep < 200; ++rep) {
    auto f = flat_frame(0.0);
    for (Eigen::Index i = 0; i < 64; ++i) f.temps[i] = u(rng);
    const auto back = decode_frame(encode_frame(f));
    EXPECT_LE((back.temps - f.temps).cwiseAbs().maxCoeff(), 0.125 + 1e-12);
    EXPECT_EQ(back.ts_ms, f.ts_ms);
  }
}

TEST(Codec, DecodeEncodeIsExactIdentityOnRecords) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> code(0, 255);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<int> codes(64);
    for (auto& c : codes) c = code(rng);
    nlohmann::json rec{{"sensor_id", std::to_string(rep)}, {"ts_ms", rep * 300}, {"codes", codes}};
    EXPECT_EQ(encode_frame(decode_frame(rec)), rec);
    // idempotent on already-quantized values
    const auto once = decode_frame(rec);
    EXPECT_EQ(decode_frame(encode_frame(once)).temps, once.temps);
  }
}

TEST(Layout, RejectsAllZeroMask) {
  auto l = wall5_layout();
  l.rois[2].mask.assign(64, 0);
  EXPECT_THROW(validate_layout(l), LayoutError);
  l = wall5_layout();
  l.rois[0].tau = 0.0;
  EXPECT_THROW(validate_layout(l), LayoutError);
  l = wall5_layout();
  l.rois[1].mask.resize(10);
  EXPECT_THROW(validate_layout(l), LayoutError);
}

TEST(Frame, ValidateChecksLengthAndFiniteness) {
  auto f = flat_frame(20.0);
  EXPECT_NO_THROW(validate_frame(f, 64));
  EXPECT_THROW(validate_frame(f, 63), InputError);
  f.temps[0] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(validate_frame(f, 64), InputError);
}

TEST(Config, ParamsRoundTripAndDefaults) {
  ModelParams p;
  p.screening.q = 9;
  p.screening.alpha_mode = AlphaMode::Quadratic;
  p.counting.zeta = 2;
  p.background.gate_updates = false;
  const auto back = params_from_json(params_to_json(p));
  EXPECT_EQ(back.screening.q, 9u);
  EXPECT_EQ(back.screening.alpha_mode, AlphaMode::Quadratic);
  EXPECT_EQ(back.counting.zeta, 2u);
  EXPECT_FALSE(back.background.gate_updates);
  EXPECT_DOUBLE_EQ(back.signature.sigma0, 4.5);

  const auto partial = params_from_json(nlohmann::json{{"signature", {{"gamma", 1.2}}}});
  EXPECT_DOUBLE_EQ(partial.signature.gamma, 1.2);
  EXPECT_DOUBLE_EQ(partial.signature.sigma0, 4.5);
  EXPECT_DOUBLE_EQ(partial.screening.xi, -0.2);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(params_from_json(nlohmann::json{{"signature", {{"sigmaO", 1.0}}}}), ConfigError);
  EXPECT_THROW(params_from_json(nlohmann::json{{"tracker", nlohmann::json::object()}}), ConfigError);
  EXPECT_THROW(params_from_json(nlohmann::json{{"screening", {{"q", 0}}}}), ConfigError);
  EXPECT_THROW(params_from_json(nlohmann::json{{"background", {{"lambda_mu", 1.0}}}}), ConfigError);
  EXPECT_THROW(params_from_json(nlohmann::json{{"screening", {{"alpha_mode", "cubic"}}}}), ConfigError);
}

TEST(Config, TableDefaults) {
  const ModelParams p;
  EXPECT_DOUBLE_EQ(p.signature.sigma0, 4.5);
  EXPECT_DOUBLE_EQ(p.signature.gamma, 1.1);
  EXPECT_DOUBLE_EQ(p.signature.sigma_t_wall, 1.5);
  EXPECT_DOUBLE_EQ(p.signature.sigma_bar_ceiling, 1.3);
  EXPECT_DOUBLE_EQ(p.signature.tau_wall, 0.8);
  EXPECT_DOUBLE_EQ(p.signature.tau_ceiling, 0.4);
  EXPECT_DOUBLE_EQ(p.signature.lambda_lasso, 41.0);
  EXPECT_DOUBLE_EQ(p.tracking.delta_d, 0.25);
  EXPECT_DOUBLE_EQ(p.screening.xi, -0.2);
  EXPECT_DOUBLE_EQ(p.screening.t_max, 37.5);
  EXPECT_DOUBLE_EQ(p.screening.t_min, 20.0);
  EXPECT_DOUBLE_EQ(p.background.lambda_mu, 0.99);
  EXPECT_DOUBLE_EQ(p.background.lambda_c, 0.995);
}

TEST(Config, LayoutRoundTrip) {
  for (const auto& l : {wall5_layout(), ceiling12_layout()}) {
    const auto back = layout_from_json(layout_to_json(l));
    ASSERT_EQ(back.rois.size(), l.rois.size());
    EXPECT_EQ(back.mount, l.mount);
    for (std::size_t k = 0; k < l.rois.size(); ++k) {
      EXPECT_EQ(back.rois[k].mask, l.rois[k].mask);
      EXPECT_EQ(back.rois[k].aoa_deg, l.rois[k].aoa_deg);
      EXPECT_EQ(back.rois[k].footprint_m, l.rois[k].footprint_m);
    }
  }
  // masks are rebuilt from geometry when omitted
  auto j = layout_to_json(wall5_layout());
  for (auto& r : j["rois"]) r.erase("mask");
  EXPECT_EQ(layout_from_json(j).rois[3].mask, wall5_layout().rois[3].mask);
}

TEST(Config, BackgroundAndFitRoundTrip) {
  BackgroundModel bg;
  bg.mu = Vector::LinSpaced(4, 20.0, 23.0);
  bg.cov = Matrix::Identity(4, 4) * 0.0065;
  bg.cov(0, 1) = bg.cov(1, 0) = 0.001;
  bg.frames_seen = 17;
  const auto back = background_from_json(background_to_json(bg));
  EXPECT_EQ(back.mu, bg.mu);
  EXPECT_EQ(back.cov, bg.cov);
  EXPECT_EQ(back.frames_seen, 17u);

  SreluFit fit{4.4, 1.05, 0.3, 12};
  const auto f2 = srelu_from_json(srelu_to_json(fit));
  EXPECT_DOUBLE_EQ(f2.sigma0, 4.4);
  EXPECT_DOUBLE_EQ(f2.gamma, 1.05);

  LearnedSignatureMatrix h;
  h.H = Matrix::Random(6, 3);
  h.lambda = 41.0;
  const auto h2 = learned_from_json(learned_to_json(h));
  EXPECT_EQ(h2.H, h.H);
  EXPECT_DOUBLE_EQ(h2.lambda, 41.0);
}
