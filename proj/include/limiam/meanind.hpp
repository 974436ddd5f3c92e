#pragma once

// Mean-independence scores MeanInd(R, X): how much of the conditional mean
// E[R | X] departs from the constant E[R]. Four variants: a local-linear
// kernel fit, a cubic B-spline sieve, sample moments E[R g(X)], and the
// finite-order pair-of-moments score.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "limiam/error.hpp"
#include "limiam/regression.hpp"
#include "limiam/tensor.hpp"

namespace limiam {

struct KernelScorer {
  /// Bandwidth candidates as multiples of the regressor's sample sd.
  std::vector<double> bandwidth_grid{0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 1.5};
  int folds = 5;
};

struct SieveScorer {
  /// Interior knot counts for the cubic B-spline basis.
  std::vector<int> knot_grid{2, 4, 6, 8};
  int folds = 5;
};

struct MomentScorer {
  /// Test functions g_k(x) = x^{powers[k]}.
  std::vector<int> powers{2, 3};
};

struct FiniteOrderScorer {
  int d = 4;
};

using ScorerSpec = std::variant<KernelScorer, SieveScorer, MomentScorer, FiniteOrderScorer>;

inline void validate(const ScorerSpec& spec) {
  std::visit(
      [](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, KernelScorer>) {
          require(s.folds >= 2, "KernelScorer: folds must be >= 2");
          require(!s.bandwidth_grid.empty(), "KernelScorer: empty bandwidth grid");
          for (double b : s.bandwidth_grid) require(b > 0.0, "KernelScorer: bandwidths must be > 0");
        } else if constexpr (std::is_same_v<S, SieveScorer>) {
          require(s.folds >= 2, "SieveScorer: folds must be >= 2");
          require(!s.knot_grid.empty(), "SieveScorer: empty knot grid");
          for (int k : s.knot_grid) require(k >= 0, "SieveScorer: knot counts must be >= 0");
        } else if constexpr (std::is_same_v<S, MomentScorer>) {
          require(!s.powers.empty(), "MomentScorer: no powers");
          for (int p : s.powers) require(p >= 2, "MomentScorer: powers must be >= 2");
        } else {
          require(s.d >= 3, "FiniteOrderScorer: d must be >= 3");
        }
      },
      spec);
}

inline std::string_view scorer_name(const ScorerSpec& spec) {
  static constexpr std::string_view names[] = {"kernel", "sieve", "moment", "finite-order"};
  return names[spec.index()];
}

/// Default-parameterized scorer by name ("kernel", "sieve", "moment",
/// "finite-order"); `d` applies to finite-order only.
inline ScorerSpec parse_scorer(std::string_view name, int d = 4) {
  if (name == "kernel") return KernelScorer{};
  if (name == "sieve") return SieveScorer{};
  if (name == "moment") return MomentScorer{};
  if (name == "finite-order") {
    FiniteOrderScorer f{d};
    validate(f);
    return f;
  }
  throw ArgumentError("unknown scorer '" + std::string(name) + "'");
}

/// Residual of X_i on X_j and the regressor itself:
/// residual = X_i - (Cov(X_i, X_j) / Var(X_j)) X_j.
struct ResidualPair {
  Eigen::VectorXd residual;
  Eigen::VectorXd regressor;

  static ResidualPair make(const Eigen::VectorXd& xi, const Eigen::VectorXd& xj) {
    require(xi.size() == xj.size(), "ResidualPair: lengths differ");
    require(xi.size() >= 2, "ResidualPair: need at least 2 samples");
    const Eigen::ArrayXd cj = xj.array() - xj.mean();
    const double var = cj.square().sum();
    if (!(var > 0.0)) throw ArgumentError("ResidualPair: regressor has zero variance");
    const double beta = ((xi.array() - xi.mean()) * cj).sum() / var;
    return {xi - beta * xj, xj};
  }
};

struct ScoreDiagnostics {
  std::optional<double> bandwidth;  // kernel: chosen bandwidth (data units)
  std::optional<int> knots;         // sieve: chosen interior knot count
  int fallback_points = 0;          // kernel: local-constant fallbacks
  bool ridge = false;               // sieve: ridge-regularized solve
  bool cv_tie = false;
};

struct ScoreResult {
  double score = 0.0;
  ScoreDiagnostics diag;
};

namespace detail {

inline void check_pair(const ResidualPair& pair) {
  require(pair.residual.size() == pair.regressor.size(), "scorer: residual/regressor lengths differ");
  require(pair.residual.size() >= 3, "scorer: need at least 3 samples");
}

inline double regressor_sd(const Eigen::VectorXd& x) {
  const double sd = std::sqrt(sample_variance(x));
  if (!(sd > 0.0)) throw ArgumentError("scorer: regressor has zero variance");
  return sd;
}

inline double mean_sq_dev(const Eigen::VectorXd& fitted, double center) {
  return (fitted.array() - center).square().mean();
}

}  // namespace detail

/// (1/N) sum (m(X_v) - mean(R))^2 with m the local-linear fit at the
/// cross-validated bandwidth.
inline ScoreResult score_kernel(const ResidualPair& pair, const KernelScorer& spec = {},
                                std::uint64_t seed = 0) {
  detail::check_pair(pair);
  const double sd = detail::regressor_sd(pair.regressor);
  std::vector<double> grid;
  for (double m : spec.bandwidth_grid) grid.push_back(m * sd);
  const CvChoice cv = cv_select<double>(
      pair.regressor, pair.residual, grid, spec.folds, seed,
      [](const Eigen::VectorXd& xt, const Eigen::VectorXd& yt, const Eigen::VectorXd& xe, double h) {
        return local_linear_predict(xt, yt, xe, h).fitted;
      });
  const double h = grid[cv.index];
  const SmootherFit fit = local_linear_fit(pair.regressor, pair.residual, h);
  ScoreResult r;
  r.score = detail::mean_sq_dev(fit.fitted, pair.residual.mean());
  r.diag.bandwidth = h;
  r.diag.fallback_points = fit.fallback_points;
  r.diag.cv_tie = cv.tie;
  return r;
}

/// Same statistic with the conditional mean fitted on a cubic B-spline
/// basis whose knots span the sample range of the regressor.
inline ScoreResult score_sieve(const ResidualPair& pair, const SieveScorer& spec = {},
                               std::uint64_t seed = 0) {
  detail::check_pair(pair);
  detail::regressor_sd(pair.regressor);
  const double lo = pair.regressor.minCoeff(), hi = pair.regressor.maxCoeff();
  int largest = 0;
  for (int k : spec.knot_grid) largest = std::max(largest, k);
  require(pair.residual.size() > largest + 4, "score_sieve: n must exceed the basis dimension");
  bool ridge = false;
  const CvChoice cv = cv_select<int>(
      pair.regressor, pair.residual, spec.knot_grid, spec.folds, seed,
      [&](const Eigen::VectorXd& xt, const Eigen::VectorXd& yt, const Eigen::VectorXd& xe, int k) {
        SieveFit f = sieve_predict(xt, yt, xe, lo, hi, k);
        ridge = ridge || f.ridge;
        return f.fitted;
      });
  const int knots = spec.knot_grid[cv.index];
  const SieveFit fit = sieve_predict(pair.regressor, pair.residual, pair.regressor, lo, hi, knots);
  ScoreResult r;
  r.score = detail::mean_sq_dev(fit.fitted, pair.residual.mean());
  r.diag.knots = knots;
  r.diag.ridge = ridge || fit.ridge;
  r.diag.cv_tie = cv.tie;
  return r;
}

/// sum_k m_k^2 with m_k = (1/n) sum_v R_v X_v^{powers[k]}.
inline ScoreResult score_moment(const ResidualPair& pair, const MomentScorer& spec = {}) {
  require(pair.residual.size() == pair.regressor.size(), "score_moment: lengths differ");
  require(pair.residual.size() >= 1, "score_moment: empty sample");
  ScoreResult r;
  for (int p : spec.powers) {
    const double m = (pair.residual.array() * pair.regressor.array().pow(p)).mean();
    r.score += m * m;
  }
  return r;
}

/// S_ij^(d) = E[X_i X_j^{d-1}] E[X_j^2] - E[X_i X_j] E[X_j^d] from sample
/// moments of mean-centered columns i and j.
inline double finite_order_entry(const Eigen::VectorXd& xi, const Eigen::VectorXd& xj, int d) {
  const Eigen::ArrayXd a = xi.array(), b = xj.array();
  const Eigen::ArrayXd bd1 = b.pow(d - 1);
  return (a * bd1).mean() * b.square().mean() - (a * b).mean() * (bd1 * b).mean();
}

/// sum_{i != j} (S_ij^(d))^2 over the columns of mean-centered X.
inline double score_finite_order(const SampleMatrix& x, int j, int d) {
  require(d >= 3, "score_finite_order: d must be >= 3");
  require(j >= 0 && j < x.cols(), "score_finite_order: candidate out of range");
  double total = 0.0;
  for (int i = 0; i < x.cols(); ++i) {
    if (i == j) continue;
    const double s = finite_order_entry(x.col(i), x.col(j), d);
    total += s * s;
  }
  return total;
}

/// Pair form of the finite-order score, (E[X_j^2] E[R X_j^{d-1}])^2, which
/// equals S_ij^(d) squared when R is the residual of X_i on X_j.
inline ScoreResult score_finite_order(const ResidualPair& pair, const FiniteOrderScorer& spec) {
  require(spec.d >= 3, "score_finite_order: d must be >= 3");
  const Eigen::ArrayXd b = pair.regressor.array();
  const double s = b.square().mean() * (pair.residual.array() * b.pow(spec.d - 1)).mean();
  return {s * s, {}};
}

/// Dispatches to the scorer selected by `spec`.
inline ScoreResult mean_ind_score(const ResidualPair& pair, const ScorerSpec& spec,
                                  std::uint64_t seed = 0) {
  return std::visit(
      [&](const auto& s) -> ScoreResult {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, KernelScorer>) return score_kernel(pair, s, seed);
        else if constexpr (std::is_same_v<S, SieveScorer>) return score_sieve(pair, s, seed);
        else if constexpr (std::is_same_v<S, MomentScorer>) return score_moment(pair, s);
        else return score_finite_order(pair, s);
      },
      spec);
}

}  // namespace limiam
