#pragma once

// Structural VAR front end: OLS VAR(k) fit with standardized residuals,
// order discovery on the residuals, recovery of the structural disturbances,
// two permutation tests (ordered mean independence via centered Gaussian
// kernel quadratic forms, and joint independence via dHSIC), and residual
// bootstrap standard errors for B with the order held fixed.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "limiam/discover.hpp"
#include "limiam/error.hpp"
#include "limiam/meanind.hpp"
#include "limiam/rng.hpp"
#include "limiam/simulate.hpp"
#include "limiam/tensor.hpp"

namespace limiam {

struct VarModel {
  int p = 0;
  int k = 0;
  Eigen::VectorXd intercept;
  std::vector<Eigen::MatrixXd> phi;  // phi[l] multiplies X_{t-l-1}

  void validate() const {
    require(p >= 1 && k >= 1, "VarModel: need p >= 1 and k >= 1");
    require(intercept.size() == p && static_cast<int>(phi.size()) == k, "VarModel: shape mismatch");
    require(intercept.allFinite(), "VarModel: non-finite intercept");
    for (const auto& m : phi) {
      require(m.rows() == p && m.cols() == p, "VarModel: coefficient shape mismatch");
      require(m.allFinite(), "VarModel: non-finite coefficient");
    }
  }

  /// c + sum_l phi_l X_{t-l} for row t of `series` (t >= k).
  Eigen::VectorXd predict(const SampleMatrix& series, Eigen::Index t) const {
    Eigen::VectorXd out = intercept;
    for (int l = 0; l < k; ++l) out += phi[static_cast<std::size_t>(l)] * series.row(t - l - 1).transpose();
    return out;
  }
};

struct VarFit {
  VarModel model;
  SampleMatrix residuals;      // raw OLS residuals, (T-k) x p
  SampleMatrix standardized;   // columnwise mean 0, variance 1 (n-1)
  Eigen::RowVectorXd resid_mean;
  Eigen::RowVectorXd resid_sd;
};

/// Equation-by-equation OLS of X_t on (1, X_{t-1}, ..., X_{t-k}).
inline VarFit fit_var(const SampleMatrix& x, int k) {
  require(k >= 1, "fit_var: lag order must be >= 1");
  const int p = static_cast<int>(x.cols());
  require(p >= 1, "fit_var: no variables");
  require(x.allFinite(), "fit_var: series contains non-finite values");
  const Eigen::Index n = x.rows() - k;
  require(n > static_cast<Eigen::Index>(p) * k + 1, "fit_var: need T - k > p*k + 1");

  Eigen::MatrixXd z(n, 1 + p * k);
  z.col(0).setOnes();
  for (int l = 0; l < k; ++l) z.middleCols(1 + l * p, p) = x.middleRows(k - l - 1, n);
  const Eigen::MatrixXd y = x.bottomRows(n);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
  qr.setThreshold(1e-10);
  if (qr.rank() < z.cols()) throw DegenerateError("fit_var: lagged regressor matrix is rank deficient");
  const Eigen::MatrixXd coef = qr.solve(y);

  VarFit fit;
  fit.model.p = p;
  fit.model.k = k;
  fit.model.intercept = coef.row(0).transpose();
  for (int l = 0; l < k; ++l) fit.model.phi.push_back(coef.middleRows(1 + l * p, p).transpose());
  fit.residuals = y - z * coef;
  fit.resid_mean = fit.residuals.colwise().mean();
  const SampleMatrix centered = fit.residuals.rowwise() - fit.resid_mean;
  fit.resid_sd = (centered.colwise().squaredNorm() / static_cast<double>(n - 1)).cwiseSqrt();
  for (int j = 0; j < p; ++j)
    if (!(fit.resid_sd(j) > 0.0))
      throw DegenerateError("fit_var: residuals of " + detail::column_label(j) + " have zero variance");
  fit.standardized = centered.array().rowwise() / fit.resid_sd.array();
  return fit;
}

/// Runs X_t = c + sum phi_l X_{t-l} + u_t forward from the k initial rows;
/// returns the k initial rows followed by one row per innovation.
inline SampleMatrix var_recursion(const VarModel& model, const SampleMatrix& initial, const SampleMatrix& innovations) {
  model.validate();
  require(initial.rows() == model.k && initial.cols() == model.p, "var_recursion: need k initial rows");
  require(innovations.cols() == model.p, "var_recursion: innovation width mismatch");
  SampleMatrix out(model.k + innovations.rows(), model.p);
  out.topRows(model.k) = initial;
  for (Eigen::Index t = 0; t < innovations.rows(); ++t) {
    const Eigen::Index row = model.k + t;
    out.row(row) = (model.predict(out, row) + innovations.row(t).transpose()).transpose();
  }
  return out;
}

/// Structural VAR sample: innovations U_t = A eps_t from `dag` (eps given in
/// order coordinates), run through the recursion from zero initial rows;
/// the first `burn_in` periods are dropped.
inline SampleMatrix simulate_svar(const VarModel& model, const WeightedDag& dag, const SampleMatrix& eps,
                                  int burn_in = 100) {
  require(dag.dim == model.p, "simulate_svar: DAG size does not match the VAR");
  require(burn_in >= 0 && eps.rows() > burn_in + model.k, "simulate_svar: not enough periods after burn-in");
  const SampleMatrix u = generate_dataset(dag, eps);
  const SampleMatrix full = var_recursion(model, SampleMatrix::Zero(model.k, model.p), u);
  return full.bottomRows(full.rows() - model.k - burn_in);
}

struct SvarDiscovery {
  DiscoveryResult discovery;
  Eigen::MatrixXd A_hat;     // (I - B)^{-1}, column coordinates
  SampleMatrix eps;          // (I - B) U_t, column coordinates
  SampleMatrix eps_ordered;  // columns permuted into the estimated order
};

/// Structural disturbances (I - B) U_t implied by a discovery result on `u`.
inline SvarDiscovery recover_disturbances(const SampleMatrix& u, DiscoveryResult discovery) {
  const int p = static_cast<int>(u.cols());
  require(discovery.B.rows() == p && discovery.B.cols() == p && discovery.order.dim() == p,
          "recover_disturbances: discovery result does not match the residuals");
  SvarDiscovery out;
  out.discovery = std::move(discovery);
  const Eigen::MatrixXd ib = Eigen::MatrixXd::Identity(p, p) - out.discovery.B;
  out.A_hat = ib.inverse();
  out.eps = u * ib.transpose();
  out.eps_ordered.resize(u.rows(), p);
  for (int k = 0; k < p; ++k) out.eps_ordered.col(k) = out.eps.col(out.discovery.order.perm[static_cast<std::size_t>(k)]);
  return out;
}

/// Order discovery on standardized VAR residuals plus the implied
/// structural disturbances.
inline SvarDiscovery svar_discover(const SampleMatrix& u, const ScorerSpec& scorer, std::uint64_t seed) {
  return recover_disturbances(u, direct_limiam(u, scorer, seed));
}

struct ComponentReport {
  int index = 0;  // 1-based position in the order
  double statistic = 0.0;
  double p_value = 1.0;
};

struct TestReport {
  double statistic = 0.0;
  int permutations = 0;
  double p_value = 1.0;
  std::vector<ComponentReport> per_component;
};

/// Median pairwise Euclidean distance between rows.
inline double median_heuristic(const SampleMatrix& block) {
  const Eigen::Index n = block.rows();
  require(n >= 2, "median_heuristic: need at least 2 rows");
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = a + 1; b < n; ++b) d.push_back((block.row(a) - block.row(b)).norm());
  const auto mid = d.begin() + static_cast<long>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  double med = *mid;
  if (d.size() % 2 == 0) med = 0.5 * (med + *std::max_element(d.begin(), mid));
  if (!(med > 0.0)) throw DegenerateError("median_heuristic: median pairwise distance is zero");
  return med;
}

/// Gaussian kernel matrix exp(-|a - b|^2 / (2 h^2)) over the rows of `block`.
inline Eigen::MatrixXd gaussian_gram(const SampleMatrix& block, double bandwidth) {
  require(bandwidth > 0.0, "gaussian_gram: bandwidth must be > 0");
  const Eigen::VectorXd sq = block.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * block * block.transpose();
  d2.colwise() += sq;
  d2.rowwise() += sq.transpose();
  return (-(d2.array().max(0.0)) / (2.0 * bandwidth * bandwidth)).exp().matrix();
}

/// H K H with H = I - 11'/n.
inline Eigen::MatrixXd double_center(const Eigen::MatrixXd& k) {
  const Eigen::VectorXd row_mean = k.rowwise().mean();
  const Eigen::RowVectorXd col_mean = k.colwise().mean();
  const double grand = k.mean();
  Eigen::MatrixXd out = k;
  out.colwise() -= row_mean;
  out.rowwise() -= col_mean;
  out.array() += grand;
  return out;
}

namespace detail {

inline double permutation_p_value(int exceed, int permutations) {
  return (1.0 + exceed) / (1.0 + permutations);
}

inline void require_test_input(const SampleMatrix& e, int permutations, int min_perm) {
  require(e.cols() >= 2, "test: need at least 2 components");
  require(e.rows() >= 4, "test: need at least 4 observations");
  require(e.allFinite(), "test: non-finite input");
  require(permutations >= min_perm, "test: too few permutations (need >= " + std::to_string(min_perm) + ")");
}

}  // namespace detail

/// Tests E[e_i | e_1..e_{i-1}] = 0 for i >= 2 with columns in causal order.
/// T_i = e~_i' K~_{i-1} e~_i; the null permutes each e~_i independently
/// while holding the conditioning block fixed.
inline TestReport ordered_meanind_test(const SampleMatrix& eps_ordered, int permutations = 999,
                                       std::uint64_t seed = 0) {
  detail::require_test_input(eps_ordered, permutations, 99);
  const int p = static_cast<int>(eps_ordered.cols());
  const Eigen::Index n = eps_ordered.rows();

  std::vector<Eigen::MatrixXd> grams;
  std::vector<Eigen::VectorXd> centered;
  TestReport rep;
  rep.permutations = permutations;
  for (int i = 1; i < p; ++i) {
    const SampleMatrix block = eps_ordered.leftCols(i);
    grams.push_back(double_center(gaussian_gram(block, median_heuristic(block))));
    const Eigen::VectorXd e = eps_ordered.col(i);
    centered.push_back((e.array() - e.mean()).matrix());
    const double t = centered.back().dot(grams.back() * centered.back());
    rep.per_component.push_back({i + 1, t, 1.0});
    rep.statistic += t;
  }

  Rng rng = make_stream(seed, {0x0d});
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::vector<int> comp_exceed(static_cast<std::size_t>(p - 1), 0);
  int exceed = 0;
  Eigen::VectorXd shuffled(n);
  for (int b = 0; b < permutations; ++b) {
    double total = 0.0;
    for (int i = 0; i < p - 1; ++i) {
      std::iota(idx.begin(), idx.end(), Eigen::Index{0});
      std::shuffle(idx.begin(), idx.end(), rng);
      const Eigen::VectorXd& e = centered[static_cast<std::size_t>(i)];
      for (Eigen::Index t = 0; t < n; ++t) shuffled(t) = e(idx[static_cast<std::size_t>(t)]);
      const double stat = shuffled.dot(grams[static_cast<std::size_t>(i)] * shuffled);
      comp_exceed[static_cast<std::size_t>(i)] += stat >= rep.per_component[static_cast<std::size_t>(i)].statistic;
      total += stat;
    }
    exceed += total >= rep.statistic;
  }
  rep.p_value = detail::permutation_p_value(exceed, permutations);
  for (int i = 0; i < p - 1; ++i)
    rep.per_component[static_cast<std::size_t>(i)].p_value =
        detail::permutation_p_value(comp_exceed[static_cast<std::size_t>(i)], permutations);
  return rep;
}

namespace detail {

// dHSIC from per-coordinate Gram matrices with the coordinates j >= 1
// re-indexed by perms[j] (perms[0] unused).
inline double dhsic_statistic(const std::vector<Eigen::MatrixXd>& k, const std::vector<Eigen::VectorXd>& rowsum,
                              const std::vector<double>& total, const std::vector<std::vector<Eigen::Index>>* perms) {
  const std::size_t d = k.size();
  const Eigen::Index n = k[0].rows();
  const double nn = static_cast<double>(n);
  auto at = [&](std::size_t j, Eigen::Index a) { return (perms && j > 0) ? (*perms)[j][static_cast<std::size_t>(a)] : a; };

  double term1 = 0.0, term3 = 0.0;
  Eigen::VectorXd prod(n);
  for (Eigen::Index a = 0; a < n; ++a) {
    prod = k[0].col(a);
    for (std::size_t j = 1; j < d; ++j) {
      const Eigen::Index pa = at(j, a);
      for (Eigen::Index b = 0; b < n; ++b) prod(b) *= k[j](at(j, b), pa);
    }
    term1 += prod.sum();
    double r = 1.0;
    for (std::size_t j = 0; j < d; ++j) r *= rowsum[j](at(j, a));
    term3 += r;
  }
  double term2 = 1.0;
  for (std::size_t j = 0; j < d; ++j) term2 *= total[j] / (nn * nn);
  return term1 / (nn * nn) + term2 - 2.0 * term3 / std::pow(nn, static_cast<double>(d) + 1.0);
}

}  // namespace detail

/// dHSIC joint independence test over the columns of `eps`, Gaussian kernel
/// per coordinate with median-heuristic bandwidth; the null permutes every
/// coordinate after the first independently.
inline TestReport mutual_independence_test(const SampleMatrix& eps, int permutations = 999, std::uint64_t seed = 0) {
  detail::require_test_input(eps, permutations, 1);
  const std::size_t d = static_cast<std::size_t>(eps.cols());
  const Eigen::Index n = eps.rows();
  std::vector<Eigen::MatrixXd> k;
  std::vector<Eigen::VectorXd> rowsum;
  std::vector<double> total;
  for (std::size_t j = 0; j < d; ++j) {
    const SampleMatrix col = eps.col(static_cast<Eigen::Index>(j));
    k.push_back(gaussian_gram(col, median_heuristic(col)));
    rowsum.push_back(k.back().rowwise().sum());
    total.push_back(rowsum.back().sum());
  }
  TestReport rep;
  rep.permutations = permutations;
  rep.statistic = detail::dhsic_statistic(k, rowsum, total, nullptr);

  Rng rng = make_stream(seed, {0xd5});
  std::vector<std::vector<Eigen::Index>> perms(d, std::vector<Eigen::Index>(static_cast<std::size_t>(n)));
  int exceed = 0;
  for (int b = 0; b < permutations; ++b) {
    for (std::size_t j = 1; j < d; ++j) {
      std::iota(perms[j].begin(), perms[j].end(), Eigen::Index{0});
      std::shuffle(perms[j].begin(), perms[j].end(), rng);
    }
    exceed += detail::dhsic_statistic(k, rowsum, total, &perms) >= rep.statistic;
  }
  rep.p_value = detail::permutation_p_value(exceed, permutations);
  return rep;
}

struct BootstrapResult {
  Eigen::MatrixXd B;   // point estimate, column coordinates
  Eigen::MatrixXd se;  // per-entry standard deviation over replicates
  int replicates = 0;
};

/// Recursive-design residual bootstrap: resample centered VAR residual rows
/// i.i.d., rebuild the series from the observed initial rows through the
/// fitted recursion, refit the VAR and re-estimate B on the standardized
/// residuals with `order` held fixed.
inline BootstrapResult bootstrap_se_B(const SampleMatrix& x, int k, const CausalOrder& order, int replicates,
                                      std::uint64_t seed) {
  require(replicates >= 50, "bootstrap_se_B: need at least 50 replicates");
  const VarFit fit = fit_var(x, k);
  require(order.dim() == fit.model.p, "bootstrap_se_B: order size does not match the series");
  BootstrapResult out;
  out.B = estimate_B(fit.standardized, order);
  out.replicates = replicates;

  const SampleMatrix pool = fit.residuals.rowwise() - fit.resid_mean;
  const SampleMatrix initial = x.topRows(k);
  const int p = fit.model.p;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(p, p), sum_sq = Eigen::MatrixXd::Zero(p, p);
  std::vector<Eigen::MatrixXd> draws;
  for (int r = 0; r < replicates; ++r) {
    Rng rng = make_stream(seed, {0xb0, static_cast<std::uint64_t>(r)});
    std::uniform_int_distribution<Eigen::Index> pick(0, pool.rows() - 1);
    SampleMatrix innov(pool.rows(), p);
    for (Eigen::Index t = 0; t < pool.rows(); ++t) innov.row(t) = pool.row(pick(rng));
    const SampleMatrix series = var_recursion(fit.model, initial, innov);
    draws.push_back(estimate_B(fit_var(series, k).standardized, order));
  }
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(p, p);
  for (const auto& b : draws) mean += b;
  mean /= replicates;
  out.se = Eigen::MatrixXd::Zero(p, p);
  for (const auto& b : draws) out.se.array() += (b - mean).array().square();
  out.se = (out.se / (replicates - 1)).cwiseSqrt();
  return out;
}

}  // namespace limiam
