#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gpsim/similarity.hpp"
#include "test_util.hpp"

using namespace gpsim;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Eigen::MatrixXd zeros(Eigen::Index m) { return Eigen::MatrixXd::Zero(m, m); }

}  // namespace

TEST(AffineTransform, Examples) {
  const Eigen::VectorXd mu = vec({0.0, 1.0, 4.0, 2.5});
  const AffineTransform id = fit_affine_transform(mu, mu);
  EXPECT_NEAR(id.a, 1.0, 1e-14);
  EXPECT_NEAR(id.b, 0.0, 1e-14);
  EXPECT_FALSE(id.clamped);

  const AffineTransform t = fit_affine_transform(mu, (2.0 * mu.array() + 3.0).matrix());
  EXPECT_NEAR(t.a, 2.0, 1e-14);
  EXPECT_NEAR(t.b, 3.0, 1e-14);

  const AffineTransform neg = fit_affine_transform(vec({1, 2, 3}), vec({3, 2, 1}));
  EXPECT_TRUE(neg.clamped);
  EXPECT_EQ(neg.a, 1e-8);
  EXPECT_NEAR(neg.b, 2.0, 1e-7);
  EXPECT_NEAR(neg.b, 2.0 - 2e-8, 1e-15);
}

TEST(AffineTransform, ConstantSourceIsClamped) {
  const AffineTransform t = fit_affine_transform(vec({1, 1, 1}), vec({0, 1, 2}));
  EXPECT_TRUE(t.clamped);
  EXPECT_EQ(t.a, kMinAffineSlope);
}

TEST(AffineTransform, Errors) {
  EXPECT_THROW((void)fit_affine_transform(vec({1, 2}), vec({1, 2, 3})), std::invalid_argument);
  EXPECT_THROW((void)fit_affine_transform(vec({1}), vec({1})), std::invalid_argument);
}

TEST(AffineTransform, ResidualOrthogonalToRegressor) {
  std::mt19937_64 rng(30);
  for (int t = 0; t < 50; ++t) {
    const Eigen::VectorXd f = test::random_vector(rng, 20);
    const Eigen::VectorXd g = (0.7 * f + 0.3 * test::random_vector(rng, 20)).eval();
    const AffineTransform a = fit_affine_transform(f, g);
    if (a.clamped) continue;
    const Eigen::VectorXd r = a.apply(f) - g;
    EXPECT_NEAR(r.sum(), 0.0, 1e-12);
    EXPECT_NEAR(r.dot(f), 0.0, 1e-12);
  }
}

TEST(MeanDistance, Examples) {
  EXPECT_EQ(mean_distance_d1(vec({0, 1}), vec({0, 1}), D1Variant::avg_relative_distance, 0.0), 0.0);
  EXPECT_NEAR(mean_distance_d1(vec({0, 1}), vec({0, 3}), D1Variant::p_norm, 0.0, 1.0), 2.0, 1e-15);
  EXPECT_NEAR(mean_distance_d1(vec({0, 1, 2}), vec({0, 2, 4}), D1Variant::avg_relative_distance, 0.0), 0.375,
              1e-15);
  EXPECT_NEAR(mean_distance_d1(vec({0, 1, 2}), vec({0, 2, 4}), D1Variant::fraction_differing, 0.0), 2.0 / 3.0,
              1e-15);
  EXPECT_NEAR(mean_distance_d1(vec({0, 0}), vec({3, 4}), D1Variant::p_norm, 0.0, 2.0), 5.0, 1e-15);
}

TEST(MeanDistance, DeltaMasksSmallResiduals) {
  EXPECT_NEAR(mean_distance_d1(vec({0, 1, 2}), vec({0, 2, 4}), D1Variant::avg_relative_distance, 1.0), 0.5,
              1e-15);
  EXPECT_EQ(mean_distance_d1(vec({0, 1, 2}), vec({0, 2, 4}), D1Variant::avg_relative_distance, 2.0), 0.0);
  EXPECT_EQ(mean_distance_d1(vec({0, 1, 2}), vec({0, 2, 4}), D1Variant::p_norm, 2.0, 2.0), 0.0);
}

TEST(MeanDistance, NonIncreasingInDeltaForCountingVariants) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd u = test::random_vector(rng, 15), v = test::random_vector(rng, 15);
    double prev_p = INFINITY, prev_frac = INFINITY;
    for (double delta = 0.0; delta <= 2.0; delta += 0.1) {
      const double p = mean_distance_d1(u, v, D1Variant::p_norm, delta, 2.0);
      const double frac = mean_distance_d1(u, v, D1Variant::fraction_differing, delta);
      EXPECT_LE(p, prev_p);
      EXPECT_LE(frac, prev_frac);
      prev_p = p;
      prev_frac = frac;
    }
  }
}

TEST(MeanDistance, Errors) {
  EXPECT_THROW((void)mean_distance_d1(vec({1, 1}), vec({1, 1}), D1Variant::avg_relative_distance, 0.0),
               DegenerateInputError);
  EXPECT_THROW((void)mean_distance_d1(vec({1, 2}), vec({1, 2}), D1Variant::p_norm, 0.0, 0.5), std::invalid_argument);
  EXPECT_THROW((void)mean_distance_d1(vec({1, 2}), vec({1, 2, 3}), D1Variant::p_norm, 0.0), std::invalid_argument);
}

TEST(Pearson, Examples) {
  const Eigen::VectorXd mu = vec({0.2, -1.0, 3.0, 0.5});
  EXPECT_NEAR(pearson(mu, (4.0 * mu.array() - 1.0).matrix()).rho, 1.0, 1e-15);
  EXPECT_NEAR(pearson(mu, -mu).rho, -1.0, 1e-15);
  EXPECT_NEAR(pearson(vec({1, 2, 3}), vec({1, 3, 2})).rho, 0.5, 1e-15);
}

TEST(Pearson, DegenerateInput) {
  const PearsonResult r = pearson(vec({2, 2, 2}), vec({1, 2, 3}));
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.rho, 0.0);
  EXPECT_FALSE(pearson(vec({1, 2, 3}), vec({1, 2, 4})).degenerate);
}

TEST(Pearson, AffineInvarianceAndSignFlip) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> coef(0.1, 10.0), shift(-5.0, 5.0);
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd u = test::random_vector(rng, 12), v = test::random_vector(rng, 12);
    const double rho = pearson(u, v).rho;
    EXPECT_GE(rho, -1.0);
    EXPECT_LE(rho, 1.0);
    const Eigen::VectorXd us = (coef(rng) * u.array() + shift(rng)).matrix();
    const Eigen::VectorXd vs = (coef(rng) * v.array() + shift(rng)).matrix();
    EXPECT_NEAR(pearson(us, vs).rho, rho, 1e-12);
    EXPECT_NEAR(pearson((-u).eval(), v).rho, -rho, 1e-12);
    EXPECT_NEAR(pearson(v, u).rho, rho, 1e-15);
  }
}

TEST(CovarianceDistance, Examples) {
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(3, 3);
  EXPECT_EQ(covariance_distance_d2(A, A, D2Variant::entrywise_frobenius), 0.0);
  EXPECT_EQ(covariance_distance_d2(A, A, D2Variant::entrywise_max), 0.0);
  const Eigen::MatrixXd B = 2.0 * A;
  EXPECT_EQ(covariance_distance_d2(A, B, D2Variant::entrywise_max), 1.0);
  EXPECT_NEAR(covariance_distance_d2(A, B, D2Variant::entrywise_frobenius), std::sqrt(3.0) / 3.0, 1e-15);
}

TEST(CovarianceDistance, MatchesDoubleLoop) {
  std::mt19937_64 rng(33);
  for (int t = 0; t < 50; ++t) {
    const Eigen::MatrixXd A = test::random_spd(rng, 3), B = test::random_spd(rng, 3);
    double sq = 0.0, mx = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const double d = A(i, j) - B(i, j);
        sq += d * d;
        mx = std::max(mx, std::abs(d));
      }
    EXPECT_NEAR(covariance_distance_d2(A, B, D2Variant::entrywise_frobenius), std::sqrt(sq) / 3.0, 1e-12);
    EXPECT_NEAR(covariance_distance_d2(A, B, D2Variant::entrywise_max), mx, 1e-12);
  }
}

TEST(CovarianceDistance, Errors) {
  EXPECT_THROW((void)covariance_distance_d2(zeros(2), zeros(3), D2Variant::entrywise_max), std::invalid_argument);
  EXPECT_THROW((void)covariance_distance_d2(zeros(2), zeros(2), D2Variant::none), std::invalid_argument);
}

TEST(MeasureConfig, Validation) {
  MeasureConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_DOUBLE_EQ(c.rho_weight(), 0.75);
  c.eps1 = 1.2;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.eps1 = 0.6;
  c.eps2 = 0.6;
  c.d2_variant = D2Variant::entrywise_max;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.eps2 = 0.1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.delta = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(MeasureConfig, Parsing) {
  MeasureConfig c;
  parse_d1_variant("p_norm:3", c);
  EXPECT_EQ(c.d1_variant, D1Variant::p_norm);
  EXPECT_EQ(c.p, 3.0);
  parse_d1_variant("fraction_differing", c);
  EXPECT_EQ(c.d1_variant, D1Variant::fraction_differing);
  EXPECT_THROW(parse_d1_variant("p_normal", c), std::invalid_argument);
  EXPECT_THROW(parse_d1_variant("bogus", c), std::invalid_argument);
  EXPECT_EQ(parse_d2_variant("entrywise_max"), D2Variant::entrywise_max);
  EXPECT_THROW((void)parse_d2_variant("frobenius"), std::invalid_argument);
  EXPECT_EQ(to_string(D1Variant::avg_relative_distance), "avg_relative_distance");
  EXPECT_EQ(to_string(D2Variant::entrywise_frobenius), "entrywise_frobenius");
}

TEST(WeightedSum, PublishedArithmetic) {
  MeasureConfig c;
  SimilarityReport r;
  r.d1_raw = 0.27;
  r.rho = 0.12;
  assemble_weighted_sum(r, c);
  EXPECT_NEAR(r.total, 0.7275, 1e-12);

  r.d1_raw = 0.16;
  r.rho = 0.04;
  assemble_weighted_sum(r, c);
  EXPECT_NEAR(r.total, 0.76, 1e-12);
}

TEST(Similarity, IdenticalInputsGiveZero) {
  const Eigen::VectorXd mu = vec({0.0, 2.0, -1.0, 0.5, 3.0});
  const Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(5, 5);
  const SimilarityReport r = similarity(mu, cov, mu, cov, MeasureConfig{});
  EXPECT_NEAR(r.total, 0.0, 1e-12);
  EXPECT_NEAR(r.rho, 1.0, 1e-15);
  EXPECT_FALSE(r.transform.clamped);
}

TEST(Similarity, AffineShiftedTargetsGiveZero) {
  const Eigen::VectorXd mu = vec({0.0, 2.0, -1.0, 0.5, 3.0});
  const SimilarityReport r = similarity(mu, zeros(5), (5.0 * mu.array() - 7.0).matrix(), zeros(5), MeasureConfig{});
  EXPECT_NEAR(r.total, 0.0, 1e-12);
}

TEST(Similarity, WeightedSumIdentityAndRange) {
  std::mt19937_64 rng(34);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    MeasureConfig c;
    c.eps1 = w(rng);
    c.eps2 = (1.0 - c.eps1) * w(rng);
    c.d2_variant = t % 2 ? D2Variant::entrywise_max : D2Variant::entrywise_frobenius;
    c.delta = 0.1 * w(rng);
    const Eigen::VectorXd f = test::random_vector(rng, 10), g = test::random_vector(rng, 10);
    const SimilarityReport r =
        similarity(f, test::random_spd(rng, 10), g, test::random_spd(rng, 10), c);
    EXPECT_NEAR(r.total, r.s1 + r.s2 + r.s3, 1e-12);
    EXPECT_NEAR(r.s1, c.eps1 * r.d1_raw, 1e-15);
    EXPECT_NEAR(r.s3, c.rho_weight() * (1.0 - r.rho), 1e-15);
    EXPECT_GE(r.total, 0.0);
    if (c.eps2 == 0.0 && r.rho >= 0.0) {
      EXPECT_LE(r.total, 1.0);
    }
  }
}

TEST(Similarity, DirectionalButPearsonSymmetric) {
  const Eigen::VectorXd f = vec({0.0, 1.0, 0.0, 5.0}), g = vec({1.0, 2.0, 2.5, 3.0});
  const SimilarityReport fg = similarity(f, zeros(4), g, zeros(4), MeasureConfig{});
  const SimilarityReport gf = similarity(g, zeros(4), f, zeros(4), MeasureConfig{});
  EXPECT_NEAR(fg.rho, gf.rho, 1e-15);
  EXPECT_NE(fg.d1_raw, gf.d1_raw);
}

TEST(Similarity, GridMismatchRejected) {
  PredictiveDistribution a, b;
  a.grid = Points::Zero(3, 1);
  b.grid = Points::Ones(3, 1);
  a.mean = b.mean = vec({0, 1, 2});
  a.cov = b.cov = zeros(3);
  EXPECT_THROW((void)similarity(a, b, MeasureConfig{}), std::invalid_argument);
  b.grid = a.grid;
  EXPECT_NO_THROW((void)similarity(a, b, MeasureConfig{}));
}
