#include "thermotrack/config.hpp"
#include "thermotrack/signature.hpp"
#include "thermotrack/signature_fit.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace thermotrack;

TEST(Srelu, ReferenceValues) {
  EXPECT_NEAR(srelu_mean(0.0, 4.5, 1.1), std::log1p(std::exp(4.5)), 1e-12);
  EXPECT_NEAR(srelu_mean(3.0, 4.5, 1.1), std::log1p(std::exp(1.2)), 1e-12);
  EXPECT_NEAR(srelu_mean(1.0, 4.5, 1.1), std::log1p(std::exp(3.4)), 1e-12);
  // rounded reference values
  EXPECT_NEAR(srelu_mean(0.0, 4.5, 1.1), 4.5111, 1e-4);
  EXPECT_NEAR(srelu_mean(3.0, 4.5, 1.1), 1.4633, 1e-4);
  EXPECT_NEAR(srelu_mean(1.0, 4.5, 1.1), 3.4326, 5e-4);
  EXPECT_NEAR(srelu_mean(1e6, 4.5, 1.1), 0.0, 1e-300);
  EXPECT_TRUE(std::isfinite(srelu_mean(-1e6, 4.5, 1.1)));
}

TEST(Srelu, BoundsMonotoneConvex) {
  const double s0 = 4.5, g = 1.1;
  double prev = srelu_mean(0.0, s0, g);
  for (int i = 1; i <= 2000; ++i) {
    const double d = 0.005 * i;
    const double v = srelu_mean(d, s0, g);
    EXPECT_LT(v, prev);
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, std::max(0.0, s0 - g * d) + std::log(2.0) + 1e-12);
    EXPECT_GE(v, std::max(0.0, s0 - g * d) - 1e-12);
    const double mid2 = srelu_mean(d - 0.0025, s0, g) + srelu_mean(d + 0.0025, s0, g);
    EXPECT_LE(2.0 * v, mid2 + 1e-12);
    prev = v;
  }
}

TEST(Masks, WallFiveRoisCoverAdjacentColumns) {
  const auto l = wall5_layout();
  std::vector<int> owner(8, -1);
  for (std::size_t k = 0; k < 5; ++k) {
    const auto& m = l.rois[k].mask;
    std::set<std::size_t> cols;
    for (std::size_t i : mask_support(m)) cols.insert(i % 8);
    ASSERT_FALSE(cols.empty());
    EXPECT_EQ(*cols.rbegin() - *cols.begin() + 1, cols.size()) << "columns not adjacent";
    for (std::size_t c : cols) {
      EXPECT_EQ(owner[c], -1);
      owner[c] = static_cast<int>(k);
      for (std::size_t r = 0; r < 8; ++r) EXPECT_EQ(m[r * 8 + c], 1) << "all rows selected";
    }
  }
  for (int o : owner) EXPECT_NE(o, -1);
  // ordered left to right
  EXPECT_TRUE(std::is_sorted(owner.begin(), owner.end()));
}

TEST(Masks, CeilingTwelveDisjointBlocks) {
  const auto l = ceiling12_layout();
  ASSERT_EQ(l.rois.size(), 12u);
  std::vector<int> owner(64, -1);
  for (std::size_t k = 0; k < 12; ++k) {
    const auto sup = mask_support(l.rois[k].mask);
    ASSERT_FALSE(sup.empty());
    std::size_t r0 = 8, r1 = 0, c0 = 8, c1 = 0;
    for (std::size_t i : sup) {
      EXPECT_EQ(owner[i], -1) << "masks overlap";
      owner[i] = static_cast<int>(k);
      r0 = std::min(r0, i / 8);
      r1 = std::max(r1, i / 8);
      c0 = std::min(c0, i % 8);
      c1 = std::max(c1, i % 8);
    }
    EXPECT_EQ((r1 - r0 + 1) * (c1 - c0 + 1), sup.size()) << "block is not rectangular";
  }
}

TEST(Masks, SingleRoiCoversEverything) {
  SensorLayout l;
  l.rois.push_back(RoiSpec{});
  const auto masks = build_geometric_masks(l);
  ASSERT_EQ(masks.size(), 1u);
  EXPECT_EQ(mask_support(masks[0]).size(), 64u);
}

TEST(Masks, RoiOutsideFieldOfViewIsRejected) {
  SensorLayout w;
  for (double a : {0.0, 40.0}) {
    RoiSpec r;
    r.aoa_deg = a;
    w.rois.push_back(r);
  }
  EXPECT_THROW(build_geometric_masks(w), LayoutError);
  SensorLayout c;
  c.mount = Mount::Ceiling;
  RoiSpec r;
  r.footprint_m = {3.0, 0.0};
  c.rois.push_back(r);
  EXPECT_THROW(build_geometric_masks(c), LayoutError);
}

TEST(Signature, WallAndCeilingVectors) {
  SensorLayout l;
  RoiSpec r;
  r.mask.assign(64, 0);
  r.mask[10] = 1;
  l.rois.push_back(r);
  SignatureModel wall(l, {});
  const Vector h = wall.signature(0, 1.0);
  EXPECT_NEAR(h[10], std::log1p(std::exp(3.4)), 1e-12);
  EXPECT_EQ((h.array() != 0.0).count(), 1);
  EXPECT_EQ(wall.absent(), Vector::Zero(64));
  EXPECT_THROW(wall.signature(0, std::nullopt), UsageError);
  EXPECT_THROW(wall.signature(1, 1.0), UsageError);

  SensorLayout c;
  c.mount = Mount::Ceiling;
  RoiSpec rc;
  rc.mask.assign(64, 0);
  for (std::size_t i : {3, 4, 11, 12}) rc.mask[i] = 1;
  c.rois.push_back(rc);
  SignatureModel ceil(c, {});
  const Vector hc = ceil.signature(0, std::nullopt);
  for (std::size_t i = 0; i < 64; ++i) {
    EXPECT_DOUBLE_EQ(hc[static_cast<Eigen::Index>(i)], rc.mask[i] ? 1.3 : 0.0);
  }
  EXPECT_THROW(ceil.signature(0, 1.0), UsageError);
}

TEST(Signature, SupportEqualsMaskSupport) {
  for (const auto& l : {wall5_layout(), ceiling12_layout()}) {
    SignatureModel s(l, {});
    for (std::size_t k = 0; k < l.rois.size(); ++k) {
      const std::optional<double> d = l.mount == Mount::Wall ? std::optional<double>(2.0) : std::nullopt;
      const Vector h = s.signature(k, d);
      std::vector<std::size_t> nz;
      for (Eigen::Index i = 0; i < h.size(); ++i) {
        if (h[i] != 0.0) nz.push_back(static_cast<std::size_t>(i));
      }
      EXPECT_EQ(nz, mask_support(l.rois[k].mask));
    }
  }
}

// ---------------------------------------------------------------------------
// Lasso
// ---------------------------------------------------------------------------
namespace {

struct LassoProblem {
  std::vector<TrainingSample> samples;
  Matrix h_true;
  Vector mu;
  Matrix cov;
};

LassoProblem single_occupancy_problem(std::size_t m, std::size_t k, std::size_t n, double noise,
                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  LassoProblem p;
  p.h_true = Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
  for (Eigen::Index j = 0; j < p.h_true.cols(); ++j) {
    for (Eigen::Index i = 0; i < p.h_true.rows(); ++i) p.h_true(i, j) = (i + j) % 3 == 0 ? 1.0 + 0.1 * j : 0.0;
  }
  p.mu = Vector::Constant(static_cast<Eigen::Index>(m), 22.0);
  p.cov = Matrix::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < n; ++i) {
    TrainingSample s;
    s.occupancy.assign(k, 0);
    s.occupancy[i % k] = 1;
    Vector y = p.mu + p.h_true.col(static_cast<Eigen::Index>(i % k));
    for (Eigen::Index j = 0; j < y.size(); ++j) y[j] += noise * g(rng);
    s.frame = y;
    p.samples.push_back(std::move(s));
  }
  return p;
}

}  // namespace

TEST(Lasso, HugePenaltyZeroesEverything) {
  auto p = single_occupancy_problem(8, 3, 60, 0.1, 1);
  const auto out = learn_signatures_lasso(p.samples, p.mu, p.cov, 1e9);
  EXPECT_LT(out.H.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Lasso, NoiselessSingleOccupancyReproducesGenerator) {
  auto p = single_occupancy_problem(10, 4, 40, 0.0, 2);
  const auto out = learn_signatures_lasso(p.samples, p.mu, p.cov, 0.0);
  EXPECT_TRUE(out.converged);
  EXPECT_LT((out.H - p.h_true).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Lasso, ZeroPenaltyMatchesPerColumnSampleMean) {
  auto p = single_occupancy_problem(8, 3, 3000, 0.5, 3);
  const auto out = learn_signatures_lasso(p.samples, p.mu, p.cov, 0.0);
  Matrix mean = Matrix::Zero(8, 3);
  std::vector<int> n(3, 0);
  for (const auto& s : p.samples) {
    for (std::size_t k = 0; k < 3; ++k) {
      if (s.occupancy[k]) {
        mean.col(static_cast<Eigen::Index>(k)) += s.frame - p.mu;
        ++n[k];
      }
    }
  }
  for (Eigen::Index k = 0; k < 3; ++k) mean.col(k) /= n[static_cast<std::size_t>(k)];
  EXPECT_LT((out.H - mean).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Lasso, OrthonormalDesignIsSoftThresholdedLeastSquares) {
  // One sample per ROI with r = e_k gives S_rr = I.
  const std::size_t m = 6, k = 4;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 2.0);
  std::vector<TrainingSample> samples;
  const Vector mu = Vector::Zero(m);
  Matrix ls(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
  for (std::size_t j = 0; j < k; ++j) {
    TrainingSample s;
    s.occupancy.assign(k, 0);
    s.occupancy[j] = 1;
    s.frame = Vector(static_cast<Eigen::Index>(m));
    for (Eigen::Index i = 0; i < s.frame.size(); ++i) s.frame[i] = g(rng);
    ls.col(static_cast<Eigen::Index>(j)) = s.frame;
    samples.push_back(std::move(s));
  }
  const double lambda = 1.7;
  const auto out = learn_signatures_lasso(samples, mu, Matrix::Identity(m, m), lambda);
  for (Eigen::Index j = 0; j < ls.cols(); ++j) {
    for (Eigen::Index i = 0; i < ls.rows(); ++i) {
      const double v = ls(i, j);
      const double expect = v > lambda / 2 ? v - lambda / 2 : v < -lambda / 2 ? v + lambda / 2 : 0.0;
      EXPECT_NEAR(out.H(i, j), expect, 1e-9);
    }
  }
}

TEST(Lasso, SatisfiesOptimalityWithCorrelatedNoiseAndMultiOccupancy) {
  const Eigen::Index m = 5, k = 3;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  std::bernoulli_distribution occ(0.4);
  Matrix a = Matrix::Random(m, m);
  const Matrix cov = a * a.transpose() + 0.5 * Matrix::Identity(m, m);
  const Matrix h_true = Matrix::Random(m, k) * 2.0;
  const Vector mu = Vector::Constant(m, 21.0);
  std::vector<TrainingSample> samples;
  for (int i = 0; i < 200; ++i) {
    TrainingSample s;
    s.occupancy.resize(k);
    Vector r(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      s.occupancy[static_cast<std::size_t>(j)] = occ(rng);
      r[j] = s.occupancy[static_cast<std::size_t>(j)];
    }
    Vector w(m);
    for (Eigen::Index j = 0; j < m; ++j) w[j] = g(rng);
    s.frame = mu + h_true * r + w;
    samples.push_back(std::move(s));
  }
  const double lambda = 41.0;
  const auto out = learn_signatures_lasso(samples, mu, cov, lambda, {1e-12, 100000});
  ASSERT_TRUE(out.converged);

  // Subgradient check with a gradient computed directly from the samples.
  const Matrix prec = cov.fullPivLu().inverse();
  Matrix grad = Matrix::Zero(m, k);
  for (const auto& s : samples) {
    Vector r(k);
    for (Eigen::Index j = 0; j < k; ++j) r[j] = s.occupancy[static_cast<std::size_t>(j)];
    const Vector e = s.frame - mu - out.H * r;
    grad -= 2.0 * prec * e * r.transpose();
  }
  for (Eigen::Index j = 0; j < k; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const double h = out.H(i, j);
      if (h != 0.0) {
        EXPECT_NEAR(grad(i, j) + lambda * (h > 0 ? 1.0 : -1.0), 0.0, 1e-5);
      } else {
        EXPECT_LE(std::abs(grad(i, j)), lambda + 1e-5);
      }
    }
  }
}

TEST(Lasso, ObjectiveNonIncreasingPerSweep) {
  auto p = single_occupancy_problem(12, 5, 300, 0.8, 6);
  // make the covariance non-diagonal so coordinates interact
  for (Eigen::Index i = 0; i + 1 < p.cov.rows(); ++i) p.cov(i, i + 1) = p.cov(i + 1, i) = 0.3;
  for (double lambda : {0.0, 5.0, 41.0, 400.0}) {
    const auto out = learn_signatures_lasso(p.samples, p.mu, p.cov, lambda);
    ASSERT_FALSE(out.objective_trace.empty());
    for (std::size_t i = 1; i < out.objective_trace.size(); ++i) {
      EXPECT_LE(out.objective_trace[i], out.objective_trace[i - 1] + 1e-9 * std::abs(out.objective_trace[i - 1]));
    }
  }
}

TEST(Lasso, Errors) {
  auto p = single_occupancy_problem(4, 2, 10, 0.1, 7);
  EXPECT_THROW(learn_signatures_lasso({}, p.mu, p.cov, 1.0), UsageError);
  Matrix singular = Matrix::Zero(4, 4);
  try {
    learn_signatures_lasso(p.samples, p.mu, singular, 1.0);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("ridge"), std::string::npos);
  }
}

// ---------------------------------------------------------------------------
// s-relu fit
// ---------------------------------------------------------------------------
TEST(SreluFit, NoiselessRecovery) {
  std::vector<DistanceSample> s;
  for (int i = 0; i < 14; ++i) {
    const double d = 0.25 + 0.25 * i;
    s.push_back({d, srelu_mean(d, 4.5, 1.1)});
  }
  const auto fit = fit_srelu(s);
  EXPECT_NEAR(fit.sigma0, 4.5, 1e-6);
  EXPECT_NEAR(fit.gamma, 1.1, 1e-6);
  EXPECT_LT(fit.rmse, 1e-8);
}

TEST(SreluFit, ModerateNoiseRecovery) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.25, 3.5);
  std::normal_distribution<double> g(0.0, 0.2);
  std::vector<DistanceSample> s;
  for (int i = 0; i < 400; ++i) {
    const double d = u(rng);
    s.push_back({d, srelu_mean(d, 4.5, 1.1) + g(rng)});
  }
  const auto fit = fit_srelu(s);
  EXPECT_NEAR(fit.sigma0, 4.5, 0.05 * 4.5);
  EXPECT_NEAR(fit.gamma, 1.1, 0.05 * 1.1);
}

TEST(SreluFit, DegenerateInput) {
  std::vector<DistanceSample> s(10, DistanceSample{1.0, 3.0});
  EXPECT_THROW(fit_srelu(s), FitError);
  EXPECT_THROW(fit_srelu(std::vector<DistanceSample>{}), FitError);
}
