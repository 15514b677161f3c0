// scenes.hpp -- named simulator scenes used by the CLI and the tests.
#pragma once

#include "thermotrack/config.hpp"
#include "thermotrack/simulator.hpp"

#include <random>
#include <string>

namespace thermotrack {

struct SceneOptions {
  std::uint64_t seed{7};
  std::size_t n_frames{600};
  double t_amb{23.0};
  double noise_std{0.08};
  SignatureParams signature{};
};

inline Scene base_scene(SensorLayout layout, const SceneOptions& o) {
  Scene s;
  s.layout = std::move(layout);
  s.signature = o.signature;
  s.seed = o.seed;
  s.n_frames = o.n_frames;
  set_default_background(s, o.t_amb, o.noise_std);
  return s;
}

/// One body at fixed range and azimuth in front of a wall sensor.
inline Scene wall_static_scene(double d, double theta_deg, const SceneOptions& o = {}) {
  Scene s = base_scene(wall5_layout(o.signature), o);
  SceneBody b;
  TrajectoryParams tp;
  tp.start.d_m = d;
  tp.start.theta_deg = theta_deg;
  tp.n_steps = o.n_frames;
  b.poses = gen_trajectory(TrajectoryKind::Static, tp, o.seed);
  s.bodies.push_back(std::move(b));
  return s;
}

/// One body doing a reflected random walk in range (0.5 m/s, 0.3 s steps)
/// while drifting in azimuth across the field of view.
inline Scene wall_walk_scene(const SceneOptions& o = {}) {
  Scene s = base_scene(wall5_layout(o.signature), o);
  TrajectoryParams tp;
  tp.start.d_m = 1.5;
  tp.n_steps = o.n_frames;
  tp.d_min = s.layout.d_min;
  tp.d_max = s.layout.d_max;
  Trajectory poses = gen_trajectory(TrajectoryKind::RandomWalk, tp, o.seed ^ 0x5EEDull);
  std::mt19937_64 rng(o.seed ^ 0xA0Aull);
  std::normal_distribution<double> step(0.0, 2.0);
  double theta = 0.0;
  const double half = 0.5 * s.layout.fov_deg - 1e-6;
  for (auto& p : poses) {
    p.theta_deg = theta;
    theta = reflect_into(theta + step(rng), -half, half);
  }
  SceneBody b;
  b.poses = std::move(poses);
  s.bodies.push_back(std::move(b));
  return s;
}

/// Ceiling corridor: `zeta` bodies, one per lane (y = 0, 0.5, -0.5), each doing
/// repeated straight passes along x across the 12-ROI grid at 0.5 m/s with
/// random direction and random pauses between passes.
inline Scene corridor_scene(std::size_t zeta, const SceneOptions& o = {}) {
  if (zeta < 1 || zeta > 3) throw ConfigError("corridor scenes support 1 to 3 bodies");
  Scene s = base_scene(ceiling12_layout(o.signature), o);
  const double lanes[3] = {0.0, 0.5, -0.5};
  std::mt19937_64 rng(o.seed ^ 0xC0221D02ull);
  std::uniform_int_distribution<int> gap(0, 12);
  std::uniform_int_distribution<int> coin(0, 1);
  for (std::size_t b = 0; b < zeta; ++b) {
    std::size_t t = static_cast<std::size_t>(gap(rng));
    while (t < o.n_frames) {
      TrajectoryParams tp;
      const double x0 = coin(rng) ? -0.99 : 0.99;
      tp.start.x_m = x0;
      tp.start.y_m = lanes[b];
      tp.end.x_m = -x0;
      tp.end.y_m = lanes[b];
      tp.speed_mps = 0.5;
      tp.dt_s = static_cast<double>(s.dt_ms) / 1000.0;
      SceneBody body;
      body.start_frame = t;
      body.poses = gen_trajectory(TrajectoryKind::CorridorPass, tp, 0);
      if (t + body.poses.size() > o.n_frames) body.poses.resize(o.n_frames - t);
      t += body.poses.size() + 2 + static_cast<std::size_t>(gap(rng));
      s.bodies.push_back(std::move(body));
    }
  }
  return s;
}

inline const std::vector<std::string>& scene_names() {
  static const std::vector<std::string> names{"wall-static", "wall-walk", "corridor1", "corridor2",
                                              "corridor3"};
  return names;
}

inline Scene make_scene(const std::string& name, const SceneOptions& o = {}) {
  if (name == "wall-static") return wall_static_scene(1.5, 0.0, o);
  if (name == "wall-walk") return wall_walk_scene(o);
  if (name == "corridor1") return corridor_scene(1, o);
  if (name == "corridor2") return corridor_scene(2, o);
  if (name == "corridor3") return corridor_scene(3, o);
  throw UsageError("unknown scene '" + name + "'");
}

}  // namespace thermotrack
