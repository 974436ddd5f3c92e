#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "limiam/meanind.hpp"
#include "test_support.hpp"

using namespace limiam;
using limiam::testing::uniform;

namespace {

Eigen::VectorXd uniform_vector(int n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = uniform(rng, lo, hi);
  return v;
}

Eigen::VectorXd normal_vector(int n, Rng& rng) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

// R = X^2 - 1/3 with X ~ U[-1, 1]; E[R|X] = R, Var = 4/45.
ResidualPair quadratic_pair(int n, std::uint64_t seed) {
  Rng rng(seed);
  const Eigen::VectorXd x = uniform_vector(n, rng);
  return {(x.array().square() - 1.0 / 3.0).matrix(), x};
}

// Y = beta X + eta with eta independent of X: linear conditional mean.
ResidualPair linear_pair(int n, std::uint64_t seed) {
  Rng rng(seed);
  const Eigen::VectorXd x = uniform_vector(n, rng);
  const Eigen::VectorXd y = 0.6 * x + uniform_vector(n, rng);
  return ResidualPair::make(y, x);
}

std::vector<ScorerSpec> all_scorers() {
  return {KernelScorer{}, SieveScorer{}, MomentScorer{}, FiniteOrderScorer{4}};
}

}  // namespace

TEST(ResidualPair, OrthogonalToRegressor) {
  Rng rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::VectorXd xj = uniform_vector(200, rng, -3, 5);
    const Eigen::VectorXd xi = 2.0 * xj + normal_vector(200, rng) + Eigen::VectorXd::Constant(200, 7.0);
    const ResidualPair p = ResidualPair::make(xi, xj);
    const double cov = ((p.residual.array() - p.residual.mean()) * (xj.array() - xj.mean())).mean();
    EXPECT_LT(std::abs(cov), 1e-10);
  }
  EXPECT_THROW(ResidualPair::make(Eigen::VectorXd::Ones(5), Eigen::VectorXd::Ones(5)), ArgumentError);
  EXPECT_THROW(ResidualPair::make(Eigen::VectorXd::Ones(5), Eigen::VectorXd::Ones(4)), ArgumentError);
}

TEST(ScorerSpec, ValidationAndNames) {
  EXPECT_THROW(validate(KernelScorer{{0.5}, 1}), ArgumentError);
  EXPECT_THROW(validate(KernelScorer{{0.0, 1.0}, 5}), ArgumentError);
  EXPECT_THROW(validate(SieveScorer{{}, 5}), ArgumentError);
  EXPECT_THROW(validate(MomentScorer{{1}}), ArgumentError);
  EXPECT_THROW(validate(MomentScorer{{}}), ArgumentError);
  EXPECT_THROW(validate(FiniteOrderScorer{2}), ArgumentError);
  EXPECT_NO_THROW(validate(MomentScorer{}));
  EXPECT_THROW(parse_scorer("hsic"), ArgumentError);
  EXPECT_THROW(parse_scorer("finite-order", 2), ArgumentError);
  for (const auto& s : all_scorers()) EXPECT_EQ(scorer_name(parse_scorer(scorer_name(s))).data(), scorer_name(s).data());
}

TEST(Scorers, ZeroResidualScoresZero) {
  Rng rng(2);
  const Eigen::VectorXd x = uniform_vector(300, rng);
  const ResidualPair zero{Eigen::VectorXd::Zero(300), x};
  for (const auto& s : all_scorers()) EXPECT_EQ(mean_ind_score(zero, s, 1).score, 0.0) << scorer_name(s);
  const ResidualPair constant{Eigen::VectorXd::Constant(300, 2.5), x};
  EXPECT_LT(score_sieve(constant).score, 1e-20);
  EXPECT_LT(score_kernel(constant).score, 1e-20);
}

TEST(Scorers, NonnegativeOnRandomData) {
  Rng rng(3);
  for (int rep = 0; rep < 5; ++rep) {
    const Eigen::VectorXd x = normal_vector(300, rng), y = normal_vector(300, rng);
    const ResidualPair p = ResidualPair::make(y + x.array().square().matrix(), x);
    for (const auto& s : all_scorers()) EXPECT_GE(mean_ind_score(p, s, 3).score, 0.0);
  }
}

TEST(Scorers, DegenerateRegressorIsArgumentError) {
  const ResidualPair flat{Eigen::VectorXd::LinSpaced(50, 0, 1), Eigen::VectorXd::Constant(50, 1.0)};
  EXPECT_THROW(score_kernel(flat), ArgumentError);
  EXPECT_THROW(score_sieve(flat), ArgumentError);
  const ResidualPair tiny{Eigen::VectorXd::LinSpaced(8, 0, 1), Eigen::VectorXd::LinSpaced(8, 0, 1)};
  EXPECT_THROW(score_sieve(tiny), ArgumentError);  // 12 basis columns > 8 points
}

TEST(Scorers, QuadraticResidualOracle) {
  const double target = 4.0 / 45.0;
  const ResidualPair p = quadratic_pair(5000, 4);
  const ScoreResult k = score_kernel(p, {}, 1);
  const ScoreResult s = score_sieve(p, {}, 1);
  EXPECT_NEAR(k.score, target, 0.2 * target);
  EXPECT_NEAR(s.score, target, 0.2 * target);
  ASSERT_TRUE(k.diag.bandwidth.has_value());
  ASSERT_TRUE(s.diag.knots.has_value());
  // Sample moments of U[-1,1]: m2 -> 4/45, m3 -> 0.
  EXPECT_NEAR(score_moment(p).score, target * target, 0.15 * target * target);
}

TEST(Scorers, MomentClosedFormOnExactMoments) {
  // Gauss-Legendre-free check: a symmetric grid makes odd moments exactly 0.
  const int n = 2001;
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(n, -1.0, 1.0);
  const Eigen::VectorXd r = (x.array().square() - x.array().square().mean()).matrix();
  const double m2 = (r.array() * x.array().square()).mean();
  const double m3 = (r.array() * x.array().cube()).mean();
  EXPECT_LT(std::abs(m3), 1e-15);
  EXPECT_NEAR(score_moment({r, x}).score, m2 * m2 + m3 * m3, 1e-15);
  EXPECT_NEAR(m2, 4.0 / 45.0, 1e-3);
}

TEST(Scorers, MomentSignFlipInvariant) {
  Rng rng(5);
  const Eigen::VectorXd x = normal_vector(400, rng), r = normal_vector(400, rng);
  EXPECT_DOUBLE_EQ(score_moment({r, x}).score, score_moment({-r, x}).score);
}

TEST(Scorers, KernelWithinSignFlipNullWhenMeanIndependent) {
  // R = X * eta with eta symmetric: flipping the signs of R keeps its
  // conditional variance profile, so the flipped scores form an exact null.
  Rng rng(6);
  const int n = 5000, draws = 19;
  const Eigen::VectorXd x = uniform_vector(n, rng);
  const Eigen::VectorXd eta = uniform_vector(n, rng);
  const ResidualPair pair{(x.array() * eta.array()).matrix(), x};
  const double observed = score_kernel(pair, {}, 7).score;
  double largest = 0.0;
  std::bernoulli_distribution coin;
  for (int b = 0; b < draws; ++b) {
    Eigen::VectorXd flipped = pair.residual;
    for (int i = 0; i < n; ++i)
      if (coin(rng)) flipped(i) = -flipped(i);
    largest = std::max(largest, score_kernel({flipped, x}, {}, 7).score);
  }
  EXPECT_LT(observed, largest);
}

TEST(Scorers, SieveAffineInvariance) {
  const ResidualPair p = quadratic_pair(800, 8);
  const ResidualPair moved{p.residual, (3.0 * p.regressor.array() - 11.0).matrix()};
  EXPECT_NEAR(score_sieve(p, {}, 2).score, score_sieve(moved, {}, 2).score, 1e-10);
  EXPECT_EQ(score_sieve(p, {}, 2).diag.knots, score_sieve(moved, {}, 2).diag.knots);
}

TEST(Scorers, LinearConditionalMeanShrinks) {
  for (const auto& s : all_scorers()) {
    std::vector<double> small, large;
    for (std::uint64_t seed = 0; seed < 9; ++seed) {
      small.push_back(mean_ind_score(linear_pair(500, 50 + seed), s, seed).score);
      large.push_back(mean_ind_score(linear_pair(5000, 90 + seed), s, seed).score);
    }
    std::nth_element(small.begin(), small.begin() + 4, small.end());
    std::nth_element(large.begin(), large.begin() + 4, large.end());
    EXPECT_GE(small[4] / large[4], 3.0) << scorer_name(s);
  }
}

TEST(FiniteOrder, PairFormEqualsMatrixForm) {
  Rng rng(9);
  for (int d = 3; d <= 5; ++d) {
    SampleMatrix x(500, 3);
    x.col(0) = uniform_vector(500, rng);
    x.col(1) = 0.5 * x.col(0) + uniform_vector(500, rng);
    x.col(2) = x.col(1).array().square().matrix() + uniform_vector(500, rng);
    x.rowwise() -= x.colwise().mean();
    for (int j = 0; j < 3; ++j) {
      double total = 0.0;
      for (int i = 0; i < 3; ++i) {
        if (i == j) continue;
        const double pair = score_finite_order(ResidualPair::make(x.col(i), x.col(j)), FiniteOrderScorer{d}).score;
        const double entry = finite_order_entry(x.col(i), x.col(j), d);
        EXPECT_NEAR(pair, entry * entry, 1e-12 * std::max(1.0, entry * entry));
        total += pair;
      }
      EXPECT_NEAR(score_finite_order(x, j, d), total, 1e-12 * std::max(1.0, total));
    }
  }
  EXPECT_THROW(score_finite_order(SampleMatrix::Zero(5, 2), 2, 3), ArgumentError);
  EXPECT_THROW(score_finite_order(SampleMatrix::Zero(5, 2), 0, 2), ArgumentError);
}

TEST(FiniteOrder, MomentScoreIsRescaledEntry) {
  // After standardization E[X_j^2] = (n-1)/n, so S^2 = ((n-1)/n)^2 * m^2
  // where m is the moment with power d-1.
  Rng rng(10);
  const int n = 700;
  for (int d = 3; d <= 5; ++d) {
    Eigen::VectorXd xj = uniform_vector(n, rng), xi = 0.3 * xj + normal_vector(n, rng);
    xj = ((xj.array() - xj.mean()) / std::sqrt(sample_variance(xj))).matrix();
    xi = ((xi.array() - xi.mean()) / std::sqrt(sample_variance(xi))).matrix();
    const double moment = score_moment(ResidualPair::make(xi, xj), MomentScorer{{d - 1}}).score;
    const double s = finite_order_entry(xi, xj, d);
    const double factor = std::pow((n - 1.0) / n, 2);
    EXPECT_NEAR(s * s, factor * moment, 1e-12 * std::max(1e-6, s * s));
  }
}

TEST(FiniteOrder, ScalingRegressorScalesEntry) {
  Rng rng(11);
  Eigen::VectorXd xj = uniform_vector(300, rng), xi = normal_vector(300, rng) + xj.array().square().matrix();
  xj.array() -= xj.mean();
  xi.array() -= xi.mean();
  for (int d = 3; d <= 5; ++d) {
    const double lambda = 1.7;
    const Eigen::VectorXd scaled = lambda * xj;
    EXPECT_NEAR(finite_order_entry(xi, scaled, d), std::pow(lambda, d + 1) * finite_order_entry(xi, xj, d),
                1e-10 * std::abs(std::pow(lambda, d + 1) * finite_order_entry(xi, xj, d)));
  }
}

TEST(FiniteOrder, SourceHasZeroPopulationScore) {
  // Independent uniform source, X2 = 0.7 X1 + e2: centered sample moments
  // from an exactly symmetric product grid.
  const int m = 41;
  const Eigen::VectorXd g = Eigen::VectorXd::LinSpaced(m, -1.0, 1.0);
  SampleMatrix x(m * m, 2);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      x(a * m + b, 0) = g(a);
      x(a * m + b, 1) = 0.7 * g(a) + g(b);
    }
  for (int d = 3; d <= 5; ++d) {
    EXPECT_LT(score_finite_order(x, 0, d), 1e-24);
    if (d == 4) {
      EXPECT_GT(score_finite_order(x, 1, d), 1e-4);
    }
  }
}

TEST(Scorers, DeterministicGivenSeed) {
  const ResidualPair p = linear_pair(600, 12);
  EXPECT_EQ(score_kernel(p, {}, 3).score, score_kernel(p, {}, 3).score);
  EXPECT_EQ(score_sieve(p, {}, 3).score, score_sieve(p, {}, 3).score);
}
