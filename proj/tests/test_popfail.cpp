#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "limiam/popfail.hpp"
#include "test_support.hpp"

using namespace limiam;
using limiam::testing::uniform;

namespace {

const Cumulant4Config kExample{0.258, 0.258, 0.81};

Eigen::Matrix2d rotation(double theta) {
  Eigen::Matrix2d r;
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

Cumulant4Config random_config(Rng& rng) {
  return {uniform(rng, -2.0, 6.0), uniform(rng, -2.0, 6.0), uniform(rng, -1.0, 3.0)};
}

// E[e1^a e2^b] for independent e with the given marginal moments.
SymmetricTensor independent_moments(int d, const std::vector<double>& m1, const std::vector<double>& m2) {
  SymmetricTensor t(d, 2);
  t.for_each([&](const std::vector<int>& idx, double) {
    int ones = 0;
    for (int i : idx) ones += i == 0;
    t.set(idx, m1[static_cast<std::size_t>(ones)] * m2[static_cast<std::size_t>(d - ones)]);
  });
  return t;
}

}  // namespace

TEST(JadeObjective, ClosedFormsAtBoundaryAngles) {
  Rng rng(1);
  for (int rep = 0; rep < 100; ++rep) {
    const Cumulant4Config cfg = random_config(rng);
    EXPECT_NEAR(jade_objective(cfg, 0.0).g, cfg.k1 * cfg.k1 + cfg.k2 * cfg.k2, 1e-12);
    const double s = cfg.k1 + cfg.k2 + 6.0 * cfg.c;
    EXPECT_NEAR(jade_objective(cfg, std::numbers::pi / 4).g, s * s / 8.0, 1e-12);
  }
  EXPECT_NEAR(jade_objective(kExample, 0.0).g, 0.133128, 1e-12);
  EXPECT_NEAR(jade_objective(kExample, std::numbers::pi / 4).g, 3.612672, 1e-12);
}

TEST(JadeObjective, MatchesRotatedCumulantTensor) {
  Rng rng(2);
  for (int rep = 0; rep < 50; ++rep) {
    const Cumulant4Config cfg = random_config(rng);
    const double theta = uniform(rng, -3.0, 3.0);
    const SymmetricTensor rotated = multilinear_transform(rotation(theta), cfg.tensor());
    const JadeObjective j = jade_objective(cfg, theta);
    EXPECT_NEAR(j.kappa1, rotated({0, 0, 0, 0}), 1e-12);
    EXPECT_NEAR(j.kappa2, rotated({1, 1, 1, 1}), 1e-12);
    EXPECT_NEAR(j.g, j.kappa1 * j.kappa1 + j.kappa2 * j.kappa2, 1e-10);
  }
}

TEST(JadeObjective, PeriodicSymmetricAndMaximizedAtBoundary) {
  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    const Cumulant4Config cfg = random_config(rng);
    const double best = std::max(jade_objective(cfg, 0.0).g, jade_objective(cfg, std::numbers::pi / 4).g);
    for (int k = 0; k < 200; ++k) {
      const double theta = uniform(rng, -4.0, 4.0);
      const double g = jade_objective(cfg, theta).g;
      EXPECT_NEAR(g, jade_objective(cfg, theta + std::numbers::pi / 2).g, 1e-10);
      EXPECT_NEAR(g, jade_objective(cfg, std::numbers::pi / 2 - theta).g, 1e-10);
      EXPECT_LE(g, best + 1e-10);
    }
  }
}

TEST(JadeVerdict, ExampleReverses) {
  const JadeVerdict v = jade_reversal_verdict(kExample);
  EXPECT_EQ(v.verdict, Verdict::Reversed);
  EXPECT_NEAR(v.lhs, 28.901376, 1e-12);
  EXPECT_NEAR(v.rhs, 1.065024, 1e-12);
  ASSERT_TRUE(v.A_hat.has_value());
  ASSERT_TRUE(v.B_hat.has_value());
  Eigen::Matrix2d a;
  a << 1, 1, 0, 2;
  EXPECT_LT((*v.A_hat - a / std::sqrt(2.0)).cwiseAbs().maxCoeff(), 1e-15);
  Eigen::Matrix2d b;
  b << 0, 0.5, 0, 0;
  EXPECT_LT((*v.B_hat - b).cwiseAbs().maxCoeff(), 1e-15);
  // A_hat is the true mixing composed with the pi/4 rotation.
  EXPECT_LT((*v.A_hat - true_pair_mixing() * rotation(std::numbers::pi / 4).transpose()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(JadeVerdict, TrueOrderAndBoundary) {
  const JadeVerdict t = jade_reversal_verdict({1.0, 1.0, 0.0});
  EXPECT_EQ(t.verdict, Verdict::TrueOrder);
  EXPECT_FALSE(t.A_hat.has_value());
  for (double c : {1e-3, 0.1, 0.81, 2.0, 37.5})
    EXPECT_EQ(jade_reversal_verdict({3 * c, 3 * c, c}).verdict, Verdict::Boundary) << c;
}

TEST(JadeVerdict, AgreesWithObjectiveArgmax) {
  Rng rng(4);
  for (int rep = 0; rep < 2000; ++rep) {
    const Cumulant4Config cfg = random_config(rng);
    const double g0 = jade_objective(cfg, 0.0).g, g1 = jade_objective(cfg, std::numbers::pi / 4).g;
    const Verdict v = jade_reversal_verdict(cfg).verdict;
    if (std::abs(g0 - g1) < 1e-9 * std::max(g0, g1)) continue;
    EXPECT_EQ(v, g0 > g1 ? Verdict::TrueOrder : Verdict::Reversed);
  }
}

TEST(ResidualScores, ExampleValues) {
  const ResidualScores r = residual_dependence_scores(kExample);
  EXPECT_NEAR(r.source_score, 0.81, 1e-15);
  EXPECT_NEAR(r.reversed_score, 0.276, 1e-15);
  EXPECT_EQ(r.verdict, Verdict::Reversed);
  EXPECT_TRUE(r.sufficient_condition);
  const ResidualScores z = residual_dependence_scores({1.0, 2.0, 0.0});
  EXPECT_EQ(z.source_score, 0.0);
  EXPECT_NEAR(z.reversed_score, 0.75, 1e-15);
  EXPECT_EQ(z.verdict, Verdict::TrueOrder);
}

TEST(ResidualScores, MatchCovarianceOfSquaresFromCumulants) {
  // D(U, V) = |Cov(U^2, V^2)| = |kappa(U,U,V,V) + 2 Cov(U,V)^2| with the
  // pairs (X1, R_{2|1}) = (e1, e2) and (X2, R_{1|2}) = (e1+e2, (e1-e2)/2).
  Rng rng(5);
  for (int rep = 0; rep < 200; ++rep) {
    const Cumulant4Config cfg = random_config(rng);
    Eigen::Matrix2d m;
    m << 1.0, 1.0, 0.5, -0.5;  // rows: X2, R_{1|2}
    const SymmetricTensor k = multilinear_transform(m, cfg.tensor());
    const double cov = (m * m.transpose())(0, 1);
    EXPECT_NEAR(residual_dependence_scores(cfg).reversed_score, std::abs(k({0, 0, 1, 1}) + 2 * cov * cov), 1e-12);
  }
}

TEST(ResidualScores, SymmetricSliceFlipsWithJade) {
  for (double k : {0.3, 1.0, 4.2}) {
    const double c0 = k / 3.0;
    EXPECT_EQ(residual_dependence_scores({k, k, c0}).verdict, Verdict::Boundary);
    EXPECT_EQ(jade_reversal_verdict({k, k, c0}).verdict, Verdict::Boundary);
    EXPECT_EQ(residual_dependence_scores({k, k, c0 * 1.01}).verdict, Verdict::Reversed);
    EXPECT_EQ(jade_reversal_verdict({k, k, c0 * 1.01}).verdict, Verdict::Reversed);
    EXPECT_EQ(residual_dependence_scores({k, k, c0 * 0.99}).verdict, Verdict::TrueOrder);
    EXPECT_EQ(jade_reversal_verdict({k, k, c0 * 0.99}).verdict, Verdict::TrueOrder);
  }
}

TEST(Admissibility, Warnings) {
  EXPECT_TRUE(kExample.admissibility_warnings().empty());
  EXPECT_EQ(Cumulant4Config({-3.0, 1.0, 0.0}).admissibility_warnings().size(), 1u);
  EXPECT_EQ(Cumulant4Config({0.0, 0.0, 2.5}).admissibility_warnings().size(), 1u);
}

TEST(Genericity, DirectEqualsExpansion) {
  Rng rng(6);
  for (int d = 3; d <= 5; ++d) {
    for (int rep = 0; rep < 100; ++rep) {
      SymmetricTensor m2(2, 2), md(d, 2);
      m2.set({0, 0}, uniform(rng, 0.2, 2.0));
      m2.set({1, 1}, uniform(rng, 0.2, 2.0));
      md.for_each([&](const std::vector<int>& idx, double) { md.set(idx, uniform(rng, -2.0, 2.0)); });
      std::vector<int> zero(static_cast<std::size_t>(d), 0);
      zero.back() = 1;
      md.set(zero, 0.0);
      const double b = uniform(rng, -1.5, 1.5);
      const GenericityScore s = genericity_score_2d(m2, md, b);
      EXPECT_NEAR(s.direct, s.expanded, 1e-10 * std::max(1.0, std::abs(s.direct))) << "d=" << d;
      // Without the edge neither variable is an ancestor of the other, so
      // E[e1 e2^(d-1)] vanishes too.
      std::vector<int> one(static_cast<std::size_t>(d), 1);
      one.front() = 0;
      EXPECT_THROW(genericity_score_2d(m2, md, 0.0), ArgumentError);
      md.set(one, 0.0);
      const GenericityScore zero_b = genericity_score_2d(m2, md, 0.0);
      EXPECT_EQ(zero_b.direct, 0.0);
      EXPECT_EQ(zero_b.expanded, 0.0);
    }
  }
}

TEST(Genericity, IndependentCumulantReduction) {
  Rng rng(7);
  for (int d = 3; d <= 5; ++d) {
    SymmetricTensor k2(2, 2), kd(d, 2);
    const double k11 = uniform(rng, 0.5, 2), k22 = uniform(rng, 0.5, 2);
    const double kd1 = uniform(rng, -2, 2), kd2 = uniform(rng, -2, 2);
    k2.set({0, 0}, k11);
    k2.set({1, 1}, k22);
    kd.set(std::vector<int>(static_cast<std::size_t>(d), 0), kd1);
    kd.set(std::vector<int>(static_cast<std::size_t>(d), 1), kd2);
    const double b = 0.7;
    const GenericityScore s = genericity_score_2d(k2, kd, b);
    const double expected = -b * k11 * kd2 + std::pow(b, d - 1) * k22 * kd1;
    EXPECT_NEAR(s.expanded, expected, 1e-12);
    EXPECT_NEAR(s.direct, expected, 1e-12);
  }
}

TEST(Genericity, NonzeroForGenericMomentsAndInputChecks) {
  // d = 3, independent skewed disturbances: S = -b m11 E[e2^3] + b^2 m22 E[e1^3].
  const SymmetricTensor m2 = independent_moments(2, {1.0, 0.0, 1.0}, {1.0, 0.0, 1.0});
  const SymmetricTensor m3 = independent_moments(3, {1.0, 0.0, 1.0, 2.0}, {1.0, 0.0, 1.0, -1.0});
  EXPECT_NEAR(genericity_score_2d(m2, m3, 0.5).direct, 0.5 + 0.25 * 2.0, 1e-14);
  SymmetricTensor bad2 = m2;
  bad2.set({0, 1}, 0.3);
  EXPECT_THROW(genericity_score_2d(bad2, m3, 0.5), ArgumentError);
  SymmetricTensor bad3 = m3;
  bad3.set({0, 0, 1}, 0.2);
  EXPECT_THROW(genericity_score_2d(m2, bad3, 0.5), ArgumentError);
  EXPECT_THROW(genericity_score_2d(m2, m2, 0.5), ArgumentError);
}

TEST(JadeEmpirical, RealizabilityAndDeterminism) {
  EXPECT_THROW(jade_empirical_check({1.0, 1.0, 0.0}, 1000, 1), ArgumentError);
  EXPECT_THROW(jade_empirical_check({0.258, 0.258, 1.5}, 1000, 1), ArgumentError);
  EXPECT_NO_THROW(realize_config(kExample));
  EXPECT_NEAR(realize_config(kExample).mean_sigma4(), 1.81, 1e-12);
  const JadeEmpirical a = jade_empirical_check(kExample, 5000, 3), b = jade_empirical_check(kExample, 5000, 3);
  EXPECT_EQ(a.theta_hat, b.theta_hat);
  EXPECT_GE(a.theta_hat, 0.0);
  EXPECT_LT(a.theta_hat, std::numbers::pi / 2);
}

TEST(JadeEmpirical, ExampleReversesAndIndependentDoesNot) {
  const JadeEmpirical rev = jade_empirical_check(kExample, 100000, 11);
  EXPECT_LT(rev.distance_to_reversed, 0.05) << rev.theta_hat;
  EXPECT_NEAR(rev.sample_cumulants.c, 0.81, 0.1);
  const JadeEmpirical ind = jade_empirical_check({-1.2, -1.2, 0.0}, 100000, 12);
  EXPECT_LT(ind.distance_to_true, 0.05) << ind.theta_hat;
}
