#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "limiam/regression.hpp"
#include "test_support.hpp"

using namespace limiam;
using limiam::testing::uniform;

namespace {

Eigen::VectorXd uniform_vector(int n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = uniform(rng, lo, hi);
  return v;
}

Eigen::VectorXd normal_vector(int n, Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

// Cox-de Boor recursion straight from the definition, with 0/0 := 0.
double cox_de_boor(const std::vector<double>& t, int i, int k, double x, bool last_span_closed) {
  if (k == 0) {
    if (t[i] <= x && x < t[i + 1]) return 1.0;
    if (last_span_closed && x == t[i + 1] && t[i] < t[i + 1] && x == t.back()) return 1.0;
    return 0.0;
  }
  double out = 0.0;
  const double d1 = t[i + k] - t[i], d2 = t[i + k + 1] - t[i + 1];
  if (d1 > 0) out += (x - t[i]) / d1 * cox_de_boor(t, i, k - 1, x, last_span_closed);
  if (d2 > 0) out += (t[i + k + 1] - x) / d2 * cox_de_boor(t, i + 1, k - 1, x, last_span_closed);
  return out;
}

}  // namespace

TEST(LocalLinear, ExactOnAffineData) {
  Rng rng(1);
  const Eigen::VectorXd x = uniform_vector(300, rng, -2.0, 3.0);
  const Eigen::VectorXd y = (1.5 - 0.7 * x.array()).matrix();
  for (double h : {0.05, 0.3, 2.0, 50.0}) {
    const SmootherFit fit = local_linear_fit(x, y, h);
    EXPECT_LT((fit.fitted - y).cwiseAbs().maxCoeff(), 1e-9) << "h=" << h;
  }
}

TEST(LocalLinear, HugeBandwidthIsGlobalOls) {
  Rng rng(2);
  const Eigen::VectorXd x = uniform_vector(200, rng);
  const Eigen::VectorXd y = (x.array().square() + 0.1 * normal_vector(200, rng).array()).matrix();
  const double mx = x.mean(), my = y.mean();
  const double slope = ((x.array() - mx) * (y.array() - my)).sum() / (x.array() - mx).square().sum();
  const Eigen::VectorXd ols = (my + slope * (x.array() - mx)).matrix();
  const SmootherFit fit = local_linear_fit(x, y, 1e5);
  EXPECT_LT((fit.fitted - ols).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_EQ(fit.fallback_points, 0);
}

TEST(LocalLinear, QuadraticWithCvBandwidth) {
  Rng rng(3);
  const int n = 2000;
  const Eigen::VectorXd x = uniform_vector(n, rng);
  const Eigen::VectorXd truth = x.array().square().matrix();
  const Eigen::VectorXd y = truth + 0.3 * normal_vector(n, rng);
  const double sd = std::sqrt(sample_variance(x));
  std::vector<double> grid;
  for (double m : {0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 1.5}) grid.push_back(m * sd);
  const CvChoice cv = cv_select<double>(
      x, y, grid, 5, 11,
      [](const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& c, double h) {
        return local_linear_predict(a, b, c, h).fitted;
      });
  const SmootherFit fit = local_linear_fit(x, y, grid[cv.index]);
  EXPECT_LT((fit.fitted - truth).squaredNorm() / n, 0.01);
}

TEST(LocalLinear, FallbacksAndErrors) {
  Eigen::VectorXd x(4), y(4);
  x << 0.0, 0.0, 10.0, 11.0;
  y << 1.0, 3.0, 5.0, 7.0;
  Eigen::VectorXd at(2);
  at << 0.0, 100.0;
  // Tiny bandwidth: x = 0 only sees its tie group (singular 2x2) and the
  // far point sees nothing.
  const SmootherFit fit = local_linear_predict(x, y, at, 0.01);
  EXPECT_EQ(fit.fallback_points, 2);
  EXPECT_DOUBLE_EQ(fit.fitted(0), 2.0);
  EXPECT_DOUBLE_EQ(fit.fitted(1), 7.0);  // nearest neighbour
  EXPECT_THROW(local_linear_fit(x.head(2), y.head(2), 1.0), ArgumentError);
  EXPECT_THROW(local_linear_fit(x, y, 0.0), ArgumentError);
  EXPECT_THROW(local_linear_fit(x, y.head(3), 1.0), ArgumentError);
}

TEST(BSpline, MatchesCoxDeBoorAndSumsToOne) {
  Rng rng(4);
  for (int interior : {0, 2, 5, 8}) {
    const double lo = -1.3, hi = 2.1;
    std::vector<double> knots(4, lo);
    for (int k = 1; k <= interior; ++k) knots.push_back(lo + (hi - lo) * k / (interior + 1));
    for (int k = 0; k < 4; ++k) knots.push_back(hi);
    Eigen::VectorXd x = uniform_vector(100, rng, lo, hi);
    x(0) = lo;
    x(1) = hi;
    x(2) = knots[4 + interior / 2];
    const Eigen::MatrixXd z = bspline_design(x, lo, hi, interior);
    ASSERT_EQ(z.cols(), interior + 4);
    for (int r = 0; r < x.size(); ++r) {
      EXPECT_NEAR(z.row(r).sum(), 1.0, 1e-13);
      for (int c = 0; c < z.cols(); ++c) EXPECT_NEAR(z(r, c), cox_de_boor(knots, c, 3, x(r), true), 1e-12);
    }
  }
}

TEST(BSpline, ClampsOutsideRange) {
  Eigen::VectorXd x(2), edge(2);
  x << -5.0, 9.0;
  edge << 0.0, 1.0;
  EXPECT_LT((bspline_design(x, 0.0, 1.0, 3) - bspline_design(edge, 0.0, 1.0, 3)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(bspline_design(x, 1.0, 1.0, 3), ArgumentError);
  EXPECT_THROW(bspline_design(x, 0.0, 1.0, -1), ArgumentError);
}

TEST(BSpline, ReproducesCubicsExactly) {
  Rng rng(5);
  const Eigen::VectorXd x = uniform_vector(80, rng, 0.0, 2.0);
  const Eigen::VectorXd y = (x.array().cube() - 2.0 * x.array() + 0.5).matrix();
  const SieveFit fit = sieve_predict(x, y, x, 0.0, 2.0, 4);
  EXPECT_FALSE(fit.ridge);
  EXPECT_LT((fit.fitted - y).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(LeastSquares, MatchesSvdAndRidgesWhenSingular) {
  Rng rng(6);
  const Eigen::MatrixXd z = Eigen::MatrixXd::NullaryExpr(50, 4, [&] { return uniform(rng, -1, 1); });
  const Eigen::VectorXd y = normal_vector(50, rng);
  const LeastSquaresFit ls = least_squares(z, y);
  const Eigen::VectorXd svd = z.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(y);
  EXPECT_FALSE(ls.ridge);
  EXPECT_LT((ls.coef - svd).cwiseAbs().maxCoeff(), 1e-10);

  Eigen::MatrixXd dup(50, 3);
  dup << z.col(0), z.col(0), z.col(1);
  const LeastSquaresFit r = least_squares(dup, y);
  EXPECT_TRUE(r.ridge);
  EXPECT_TRUE(r.coef.allFinite());
  // The ridge solution still fits as well as the minimum-norm one.
  const Eigen::VectorXd mn = dup.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(y);
  EXPECT_NEAR((dup * r.coef - y).squaredNorm(), (dup * mn - y).squaredNorm(), 1e-6);
}

TEST(CrossValidation, FoldsAreBalancedAndSeeded) {
  const std::vector<int> a = cv_folds(103, 5, 9), b = cv_folds(103, 5, 9), c = cv_folds(103, 5, 10);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  std::vector<int> count(5, 0);
  for (int f : a) ++count[static_cast<std::size_t>(f)];
  for (int n : count) {
    EXPECT_GE(n, 20);
    EXPECT_LE(n, 21);
  }
  EXPECT_THROW(cv_folds(10, 1, 0), ArgumentError);
  EXPECT_THROW(cv_folds(3, 5, 0), ArgumentError);
}

TEST(CrossValidation, SingleCandidateAndTies) {
  Rng rng(7);
  const Eigen::VectorXd x = uniform_vector(30, rng), y = uniform_vector(30, rng);
  int calls = 0;
  const std::vector<double> one{0.4};
  const CvChoice single = cv_select<double>(x, y, one, 5, 1,
      [&](const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd& c, double) {
        ++calls;
        return Eigen::VectorXd(Eigen::VectorXd::Zero(c.size()));
      });
  EXPECT_EQ(single.index, 0u);
  EXPECT_EQ(calls, 0);

  const std::vector<int> same{3, 1, 2};
  const CvChoice tie = cv_select<int>(x, y, same, 5, 1,
      [](const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd& c, int) {
        return Eigen::VectorXd(Eigen::VectorXd::Zero(c.size()));
      });
  EXPECT_EQ(tie.index, 0u);
  EXPECT_TRUE(tie.tie);
}

TEST(CrossValidation, NoisePrefersMaximalSmoothing) {
  std::vector<double> mult{0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 1.5};
  std::vector<int> knot_grid{2, 4, 6, 8};
  int kernel_largest = 0, sieve_smallest = 0;
  const int seeds = 15;
  for (int s = 0; s < seeds; ++s) {
    Rng rng(100 + static_cast<std::uint64_t>(s));
    const Eigen::VectorXd x = uniform_vector(500, rng), y = normal_vector(500, rng);
    const double sd = std::sqrt(sample_variance(x));
    std::vector<double> grid;
    for (double m : mult) grid.push_back(m * sd);
    const CvChoice k = cv_select<double>(x, y, grid, 5, static_cast<std::uint64_t>(s),
        [](const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& c, double h) {
          return local_linear_predict(a, b, c, h).fitted;
        });
    const double lo = x.minCoeff(), hi = x.maxCoeff();
    const CvChoice sv = cv_select<int>(x, y, knot_grid, 5, static_cast<std::uint64_t>(s),
        [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& c, int kk) {
          return sieve_predict(a, b, c, lo, hi, kk).fitted;
        });
    kernel_largest += k.index == grid.size() - 1;
    sieve_smallest += sv.index == 0;
  }
  EXPECT_GT(kernel_largest, seeds / 2);
  EXPECT_GT(sieve_smallest, seeds / 2);
}
