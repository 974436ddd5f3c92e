#pragma once

// Nonparametric conditional-mean estimators shared by the scorers:
// Gaussian local-linear smoothing, cubic B-spline series regression, and
// k-fold cross-validation over a hyperparameter grid.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "limiam/error.hpp"
#include "limiam/rng.hpp"

namespace limiam {

inline double sample_mean(const Eigen::VectorXd& v) { return v.mean(); }

/// Unbiased (n-1) sample variance.
inline double sample_variance(const Eigen::VectorXd& v) {
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
}

struct SmootherFit {
  Eigen::VectorXd fitted;
  int fallback_points = 0;  // evaluation points that used the local-constant fallback
};

namespace detail {

// Gaussian weights beyond 8 bandwidths are below 1.3e-14 of the peak and
// are skipped.
constexpr double kKernelCutoff = 8.0;

}  // namespace detail

/// Local-linear regression of y on x with a Gaussian kernel, evaluated at
/// `at`. Where the local 2x2 system is singular or the weight mass is below
/// 1e-8 the estimate falls back to Nadaraya-Watson; with no weight at all it
/// returns the response of the nearest training point.
inline SmootherFit local_linear_predict(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                        const Eigen::VectorXd& at, double bandwidth) {
  require(x.size() == y.size(), "local_linear: x and y lengths differ");
  require(x.size() >= 1, "local_linear: empty training sample");
  require(bandwidth > 0.0 && std::isfinite(bandwidth), "local_linear: bandwidth must be > 0");

  const auto n = static_cast<std::size_t>(x.size());
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x(a) < x(b); });
  std::vector<double> xs(n), ys(n);
  for (std::size_t k = 0; k < n; ++k) xs[k] = x(idx[k]), ys[k] = y(idx[k]);

  const double inv_h = 1.0 / bandwidth;
  const double reach = detail::kKernelCutoff * bandwidth;
  SmootherFit out{Eigen::VectorXd(at.size()), 0};

  for (Eigen::Index e = 0; e < at.size(); ++e) {
    const double x0 = at(e);
    const auto lo = static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), x0 - reach) - xs.begin());
    const auto hi = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x0 + reach) - xs.begin());
    double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
    for (std::size_t k = lo; k < hi; ++k) {
      const double u = (xs[k] - x0) * inv_h;
      const double w = std::exp(-0.5 * u * u);
      s0 += w;
      s1 += w * u;
      s2 += w * u * u;
      t0 += w * ys[k];
      t1 += w * u * ys[k];
    }
    const double det = s0 * s2 - s1 * s1;
    if (s0 >= 1e-8 && det > 1e-10 * s0 * s2) {
      out.fitted(e) = (s2 * t0 - s1 * t1) / det;
      continue;
    }
    ++out.fallback_points;
    if (s0 > 0.0) {
      out.fitted(e) = t0 / s0;
    } else {
      auto it = std::lower_bound(xs.begin(), xs.end(), x0);
      std::size_t k = static_cast<std::size_t>(it - xs.begin());
      if (k == n || (k > 0 && x0 - xs[k - 1] <= xs[k] - x0)) --k;
      out.fitted(e) = ys[k];
    }
  }
  return out;
}

inline SmootherFit local_linear_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                    double bandwidth) {
  require(x.size() >= 3, "local_linear_fit: need n >= 3");
  return local_linear_predict(x, y, x, bandwidth);
}

/// Cubic B-spline basis with `interior` equispaced interior knots on
/// [lo, hi]; K + 4 columns that sum to one at every point. Points outside
/// the range are clamped to it.
inline Eigen::MatrixXd bspline_design(const Eigen::VectorXd& x, double lo, double hi, int interior) {
  require(interior >= 0, "bspline_design: interior knot count must be >= 0");
  require(hi > lo, "bspline_design: empty range");
  constexpr int deg = 3;
  const int nbasis = interior + deg + 1;
  std::vector<double> knots;
  knots.reserve(static_cast<std::size_t>(nbasis + deg + 1));
  for (int k = 0; k <= deg; ++k) knots.push_back(lo);
  for (int k = 1; k <= interior; ++k) knots.push_back(lo + (hi - lo) * k / (interior + 1));
  for (int k = 0; k <= deg; ++k) knots.push_back(hi);

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.size(), nbasis);
  for (Eigen::Index r = 0; r < x.size(); ++r) {
    const double t = std::clamp(x(r), lo, hi);
    // span s with knots[s] <= t < knots[s+1], the last span closed on the right
    int s = deg + static_cast<int>(std::min<double>(interior, std::floor((t - lo) / (hi - lo) * (interior + 1))));
    while (s > deg && t < knots[static_cast<std::size_t>(s)]) --s;
    while (s < nbasis - 1 && t >= knots[static_cast<std::size_t>(s + 1)]) ++s;
    // de Boor's triangular recurrence for the deg+1 nonzero functions.
    double basis[deg + 1] = {1.0, 0.0, 0.0, 0.0};
    double left[deg + 1], right[deg + 1];
    for (int j = 1; j <= deg; ++j) {
      left[j] = t - knots[static_cast<std::size_t>(s + 1 - j)];
      right[j] = knots[static_cast<std::size_t>(s + j)] - t;
      double saved = 0.0;
      for (int k = 0; k < j; ++k) {
        const double denom = right[k + 1] + left[j - k];
        const double temp = denom > 0.0 ? basis[k] / denom : 0.0;
        basis[k] = saved + right[k + 1] * temp;
        saved = left[j - k] * temp;
      }
      basis[j] = saved;
    }
    for (int k = 0; k <= deg; ++k) out(r, s - deg + k) = basis[k];
  }
  return out;
}

struct LeastSquaresFit {
  Eigen::VectorXd coef;
  bool ridge = false;  // design was rank deficient; 1e-8 * trace ridge added
};

/// OLS via the normal equations; rank-deficient designs get a ridge of
/// 1e-8 * trace(Z^T Z).
inline LeastSquaresFit least_squares(const Eigen::MatrixXd& z, const Eigen::VectorXd& y) {
  require(z.rows() == y.size(), "least_squares: row mismatch");
  const Eigen::MatrixXd gram = z.transpose() * z;
  const Eigen::VectorXd rhs = z.transpose() * y;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gram);
  qr.setThreshold(1e-12);
  if (qr.rank() == gram.cols()) return {qr.solve(rhs), false};
  const double lambda = 1e-8 * std::max(gram.trace(), 1e-300);
  Eigen::MatrixXd reg = gram;
  reg.diagonal().array() += lambda;
  return {reg.ldlt().solve(rhs), true};
}

struct SieveFit {
  Eigen::VectorXd fitted;
  bool ridge = false;
};

/// Series regression of y on a cubic B-spline basis of x with knots over
/// [lo, hi], evaluated at `at`.
inline SieveFit sieve_predict(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                              const Eigen::VectorXd& at, double lo, double hi, int interior) {
  const LeastSquaresFit ls = least_squares(bspline_design(x, lo, hi, interior), y);
  return {bspline_design(at, lo, hi, interior) * ls.coef, ls.ridge};
}

struct CvChoice {
  std::size_t index = 0;
  std::vector<double> cv_mse;
  bool tie = false;
};

/// Fold labels: a seeded shuffle of 0..n-1 cut into `folds` contiguous blocks.
inline std::vector<int> cv_folds(std::size_t n, int folds, std::uint64_t seed) {
  require(folds >= 2, "cv: folds must be >= 2");
  require(n >= static_cast<std::size_t>(folds), "cv: fewer samples than folds");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = make_stream(seed, {0xcf});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> label(n);
  for (int f = 0; f < folds; ++f) {
    const std::size_t lo = n * static_cast<std::size_t>(f) / static_cast<std::size_t>(folds);
    const std::size_t hi = n * static_cast<std::size_t>(f + 1) / static_cast<std::size_t>(folds);
    for (std::size_t k = lo; k < hi; ++k) label[perm[k]] = f;
  }
  return label;
}

/// K-fold CV over `candidates`. `predict(x_train, y_train, x_test, candidate)`
/// returns out-of-fold predictions. All candidates share the same folds; the
/// smallest mean squared error wins and exact ties go to the lowest index.
template <class Candidate, class Predict>
CvChoice cv_select(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                   std::span<const Candidate> candidates, int folds, std::uint64_t seed,
                   Predict&& predict) {
  require(!candidates.empty(), "cv_select: no candidates");
  require(x.size() == y.size(), "cv_select: x and y lengths differ");
  CvChoice choice;
  choice.cv_mse.assign(candidates.size(), 0.0);
  if (candidates.size() == 1) return choice;

  const auto n = static_cast<std::size_t>(x.size());
  const std::vector<int> label = cv_folds(n, folds, seed);
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> train, test;
    for (std::size_t k = 0; k < n; ++k) (label[k] == f ? test : train).push_back(static_cast<Eigen::Index>(k));
    const Eigen::VectorXd xtr = x(train), ytr = y(train), xte = x(test), yte = y(test);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const Eigen::VectorXd pred = predict(xtr, ytr, xte, candidates[c]);
      choice.cv_mse[c] += (pred - yte).squaredNorm();
    }
  }
  for (double& m : choice.cv_mse) m /= static_cast<double>(n);
  for (std::size_t c = 1; c < candidates.size(); ++c)
    if (choice.cv_mse[c] < choice.cv_mse[choice.index]) choice.index = c;
  for (std::size_t c = 0; c < candidates.size(); ++c)
    if (c != choice.index && choice.cv_mse[c] == choice.cv_mse[choice.index]) choice.tie = true;
  return choice;
}

}  // namespace limiam
