#include "oracles.hpp"
#include "thermotrack/counting.hpp"
#include "thermotrack/scenes.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace thermotrack;

namespace {

SensorLayout first_rois(std::size_t k_count) {
  auto l = ceiling12_layout();
  l.rois.resize(k_count);
  return l;
}

oracle::ChainModel chain_of(const SensorLayout& l, const CountingParams& p = {}) {
  return {layout_footprints(l), p.adjacency_radius_m, p.p_stay, p.p_move, p.p_birth};
}

std::vector<double> logit(const std::vector<double>& p) {
  std::vector<double> l;
  for (double v : p) l.push_back(std::log(v) - std::log1p(-v));
  return l;
}

std::vector<double> random_marginals(std::size_t k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.02, 0.98);
  std::vector<double> m(k);
  for (auto& v : m) v = u(rng);
  return m;
}

ThermalFrame frame_of(const Vector& v, std::int64_t ts = 0) {
  ThermalFrame f;
  f.ts_ms = ts;
  f.temps = v;
  return f;
}

BackgroundModel ceiling_background(std::uint64_t seed = 5) {
  SceneOptions o;
  o.seed = seed;
  return init_background(synth_empty_frames(base_scene(ceiling12_layout(), o), 200));
}

OccupancySnapshot snap(std::int64_t ts, std::vector<std::uint8_t> occ, std::uint64_t sensor = 1) {
  return {sensor, ts, std::move(occ)};
}

}  // namespace

TEST(Support, BoundedSizeAndOrder) {
  const auto s = OccupancyPosterior::bounded_support(12, 3);
  EXPECT_EQ(s.size(), 299u);
  EXPECT_EQ(s.front(), 0u);
  EXPECT_EQ(OccupancyPosterior::bounded_support(6, 6).size(), 64u);
  EXPECT_THROW(OccupancyPosterior::bounded_support(33, 1), UsageError);
}

TEST(Support, ProductPosteriorSumsToOne) {
  std::mt19937_64 rng(1);
  for (std::size_t zeta : {1u, 2u, 3u}) {
    const auto post = OccupancyPosterior::from_log_odds(logit(random_marginals(12, rng)), zeta);
    EXPECT_NEAR(post.total_probability(), 1.0, 1e-9);
  }
  const auto u = OccupancyPosterior::uniform(4, 4);
  for (double m : u.marginals()) EXPECT_NEAR(m, 0.5, 1e-15);
}

TEST(Propagate, IdentityReturnsMarginals) {
  std::mt19937_64 rng(2);
  const auto post = OccupancyPosterior::from_log_odds(logit(random_marginals(8, rng)), 3);
  const auto prior = propagate_prior(post, OccupancyTransition::identity(8));
  const auto m = post.marginals();
  for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(prior[k], m[k], 1e-12);
}

TEST(Propagate, UniformIsHalf) {
  std::mt19937_64 rng(3);
  const auto post = OccupancyPosterior::from_log_odds(logit(random_marginals(12, rng)), 3);
  for (double p : propagate_prior(post, OccupancyTransition::uniform(12))) EXPECT_NEAR(p, 0.5, 1e-12);
}

TEST(Propagate, K4Zeta2MatchesExhaustiveSum) {
  std::mt19937_64 rng(4);
  const auto layout = first_rois(4);
  const CountingParams cp;
  const auto trans = OccupancyTransition::nearest_neighbour(layout, cp);
  const auto chain = chain_of(layout, cp);
  for (int rep = 0; rep < 50; ++rep) {
    const auto m = random_marginals(4, rng);
    const auto post = OccupancyPosterior::from_log_odds(logit(m), 2);
    const auto got = propagate_prior(post, trans);
    const auto want = oracle::propagate_exhaustive(m, 2, chain);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(got[k], want[k], 1e-12);
  }
}

TEST(Propagate, ZetaEqualsKMatchesUnrestricted) {
  std::mt19937_64 rng(5);
  for (std::size_t k_count = 1; k_count <= 6; ++k_count) {
    const auto layout = first_rois(k_count);
    const auto trans = OccupancyTransition::nearest_neighbour(layout, {});
    const auto chain = chain_of(layout);
    for (int rep = 0; rep < 20; ++rep) {
      const auto m = random_marginals(k_count, rng);
      const auto got = propagate_prior(OccupancyPosterior::from_log_odds(logit(m), k_count), trans);
      const auto want = oracle::propagate_exhaustive(m, k_count, chain);
      for (std::size_t k = 0; k < k_count; ++k) {
        EXPECT_NEAR(got[k], want[k], 1e-12);
        EXPECT_GE(got[k], 0.0);
        EXPECT_LE(got[k], 1.0);
      }
    }
  }
}

TEST(Transition, NearestNeighbourHandValues) {
  const auto layout = ceiling12_layout();
  const auto trans = OccupancyTransition::nearest_neighbour(layout, {});
  // interior ROI 5 (x=-0.25, y=0) has 4 neighbours; corners have 2, edges 3
  EXPECT_NEAR(trans.prob_occupied(5, 0), 0.0, 1e-15);
  EXPECT_NEAR(trans.prob_occupied(0, 0), 0.05, 1e-15);
  EXPECT_NEAR(trans.prob_occupied(5, OccupancyBits{1} << 5), 0.8, 1e-15);
  // body in corner ROI 0 moves to ROI 1 with 0.15 / 2; ROI 1 is a border ROI
  const double want = 1.0 - (1.0 - 0.15 / 2.0) * (1.0 - 0.05);
  EXPECT_NEAR(trans.prob_occupied(1, 1u), want, 1e-15);
}

TEST(Map, EmptyFrameGivesZero) {
  const auto bg = ceiling_background();
  SignatureModel sig(ceiling12_layout(), {});
  const std::vector<double> half(12, 0.5);
  const auto res = map_occupancy(frame_of(bg.mu), bg, sig, half, 3);
  EXPECT_EQ(res.r_hat, 0u);
  EXPECT_EQ(count(res.r_hat), 0u);
}

TEST(Map, TwoBodiesAtTwoAndNine) {
  const auto bg = ceiling_background();
  SignatureModel sig(ceiling12_layout(), {});
  const Vector y = bg.mu + sig.signature(2, std::nullopt) + sig.signature(9, std::nullopt);
  const std::vector<double> half(12, 0.5);
  const auto res = map_occupancy(frame_of(y), bg, sig, half, 3);
  const auto r = res.occupancy();
  for (std::size_t k = 0; k < 12; ++k) EXPECT_EQ(r[k], (k == 2 || k == 9) ? 1 : 0) << k;
  EXPECT_EQ(count(r), 2u);
  EXPECT_NEAR(res.posterior.total_probability(), 1.0, 1e-9);
}

TEST(Map, MatchesExhaustiveArgmax) {
  std::mt19937_64 rng(6);
  for (std::size_t k_count = 2; k_count <= 6; ++k_count) {
    const auto layout = first_rois(k_count);
    SignatureModel sig(layout, {});
    SceneOptions o;
    o.seed = 100 + k_count;
    Scene sc = base_scene(layout, o);
    const auto bg = init_background(synth_empty_frames(sc, 200));
    std::bernoulli_distribution coin(0.4);
    std::normal_distribution<double> noise(0.0, 0.08);
    for (std::size_t zeta = 1; zeta <= k_count; ++zeta) {
      for (int rep = 0; rep < 10; ++rep) {
        Vector y = bg.mu;
        for (std::size_t k = 0; k < k_count; ++k) {
          if (coin(rng)) y += sig.signature(k, std::nullopt) * (0.5 + 0.5 * coin(rng));
        }
        for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += noise(rng);
        const auto priors = random_marginals(k_count, rng);
        std::vector<double> l0, l1;
        for (std::size_t k = 0; k < k_count; ++k) {
          l0.push_back(oracle::log_empty(y, bg.mu, bg.cov, sig.mask(k)));
          l1.push_back(oracle::log_occupied(y, bg.mu, bg.cov, sig.mask(k), 1.3, 0.3));
        }
        std::vector<double> post_want;
        const auto want = oracle::map_exhaustive(l0, l1, priors, zeta, &post_want);
        const auto got = map_occupancy(frame_of(y), bg, sig, priors, zeta);
        EXPECT_EQ(got.r_hat, want) << "K=" << k_count << " zeta=" << zeta;
        for (std::size_t k = 0; k < k_count; ++k) EXPECT_NEAR(got.roi_posteriors[k], post_want[k], 1e-12);
        EXPECT_LE(count(got.r_hat), zeta);
        EXPECT_NEAR(got.posterior.total_probability(), 1.0, 1e-9);
      }
    }
  }
}

TEST(Map, ConstrainedPicksLargestPositive) {
  const std::vector<double> l{0.5, -1.0, 3.0, 2.0, 0.1};
  EXPECT_EQ(constrained_map(l, 2), (1u << 2) | (1u << 3));
  EXPECT_EQ(constrained_map(l, 5), (1u << 0) | (1u << 2) | (1u << 3) | (1u << 4));
  EXPECT_EQ(constrained_map(std::vector<double>{-1.0, -2.0}, 2), 0u);
}

TEST(Map, RequiresCeilingModel) {
  SignatureModel wall(wall5_layout(), {});
  BackgroundModel bg;
  bg.mu = Vector::Constant(64, 23.0);
  bg.cov = Matrix::Identity(64, 64) * 0.0064;
  EXPECT_THROW(map_occupancy(frame_of(bg.mu), bg, wall, std::vector<double>(5, 0.5), 3), UsageError);
}

TEST(Count, Examples) {
  EXPECT_EQ(count(std::vector<std::uint8_t>(12, 0)), 0u);
  std::vector<std::uint8_t> r(12, 0);
  r[2] = r[9] = 1;
  EXPECT_EQ(count(r), 2u);
  EXPECT_EQ(count(vector_to_bits(r)), 2u);
  EXPECT_EQ(count(OccupancyBits{0b111}), 3u);
}

TEST(Counter, CorridorCountsNeverExceedZeta) {
  for (std::size_t zeta : {1u, 2u, 3u}) {
    SceneOptions o;
    o.n_frames = 150;
    const Scene sc = corridor_scene(zeta, o);
    const auto bg = init_background(synth_empty_frames(sc, 200));
    SignatureModel sig(sc.layout, sc.signature);
    CeilingCounter counter(sig, OccupancyTransition::nearest_neighbour(sc.layout, {}), zeta);
    SceneRenderer r(sc);
    for (std::size_t t = 0; t < sc.n_frames; ++t) {
      const auto& res = counter.step(r.render(t).frame, bg);
      ASSERT_LE(count(res.r_hat), zeta);
      ASSERT_NEAR(res.posterior.total_probability(), 1.0, 1e-9);
    }
  }
}

TEST(Alerts, Examples) {
  const auto fp = layout_footprints(ceiling12_layout());
  std::vector<std::uint8_t> adjacent(12, 0);
  adjacent[0] = adjacent[1] = 1;  // 0.5 m apart
  auto a = distancing_alerts(std::vector<OccupancySnapshot>{snap(0, adjacent)}, fp, 1.0, 60'000);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].roi_a, 0u);
  EXPECT_EQ(a[0].roi_b, 1u);
  EXPECT_NEAR(a[0].distance_m, 0.5, 1e-12);
  EXPECT_LT(a[0].distance_m, 1.0);

  std::vector<OccupancySnapshot> singles;
  for (std::size_t k = 0; k < 12; ++k) {
    std::vector<std::uint8_t> one(12, 0);
    one[k] = 1;
    singles.push_back(snap(static_cast<std::int64_t>(k) * 300, one));
  }
  EXPECT_TRUE(distancing_alerts(singles, fp, 1.0, 60'000).empty());

  std::vector<std::uint8_t> far(12, 0);
  far[0] = far[3] = 1;  // 1.5 m apart
  EXPECT_TRUE(distancing_alerts(std::vector<OccupancySnapshot>{snap(0, far)}, fp, 1.0, 60'000).empty());
}

TEST(Alerts, DeduplicatedPerWindowAndSensor) {
  const auto fp = layout_footprints(ceiling12_layout());
  std::vector<std::uint8_t> adjacent(12, 0);
  adjacent[5] = adjacent[6] = 1;
  std::vector<OccupancySnapshot> seq;
  for (std::int64_t t = 0; t < 130'000; t += 300) seq.push_back(snap(t, adjacent));
  seq.push_back(snap(1'000, adjacent, 2));
  const auto a = distancing_alerts(seq, fp, 1.0, 60'000);
  // windows 0, 1, 2 for sensor 1 plus window 0 for sensor 2
  ASSERT_EQ(a.size(), 4u);
  EXPECT_EQ(a[0].window, 0);
  EXPECT_EQ(a[1].window, 1);
  EXPECT_EQ(a[2].window, 2);
  EXPECT_EQ(a[3].sensor_id, 2u);
  EXPECT_THROW(DistancingMonitor(fp, 1.0, 0), ConfigError);
}

TEST(Alerts, MonotoneInThreshold) {
  const auto fp = layout_footprints(ceiling12_layout());
  std::mt19937_64 rng(8);
  std::bernoulli_distribution coin(0.25);
  std::vector<OccupancySnapshot> seq;
  for (int t = 0; t < 200; ++t) {
    std::vector<std::uint8_t> occ(12);
    for (auto& v : occ) v = coin(rng);
    seq.push_back(snap(t * 300, occ));
  }
  using Key = std::tuple<std::size_t, std::size_t, std::int64_t>;
  std::set<Key> prev;
  for (double thr : {0.3, 0.6, 0.8, 1.0, 1.2, 1.6, 2.0}) {
    std::set<Key> cur;
    for (const auto& a : distancing_alerts(seq, fp, thr, 60'000)) {
      EXPECT_LT(a.distance_m, thr);
      EXPECT_NE(a.roi_a, a.roi_b);
      cur.insert({a.roi_a, a.roi_b, a.window});
    }
    for (const auto& k : prev) EXPECT_TRUE(cur.count(k));
    prev = std::move(cur);
  }
}
