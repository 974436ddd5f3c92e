#pragma once

// Population failure analysis of independence-based LiNGAM for the pair
// X1 = e1, X2 = X1 + e2 with Cov(e) = I: the two-dimensional JADE contrast
// and its reversal criterion, the residual dependence scores of a
// DirectLiNGAM-type selection, the finite-order source score S^(d)_12
// evaluated two ways, and an empirical JADE check on simulated data.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "limiam/error.hpp"
#include "limiam/simulate.hpp"
#include "limiam/tensor.hpp"

namespace limiam {

/// Fourth cumulants of a unit-covariance pair; kappa_1112 = kappa_1222 = 0.
struct Cumulant4Config {
  double k1 = 0.0;  // kappa_1111
  double k2 = 0.0;  // kappa_2222
  double c = 0.0;   // kappa_1122

  /// Human-readable admissibility problems; empty when the triple can be
  /// the fourth cumulants of a unit-covariance pair.
  std::vector<std::string> admissibility_warnings() const {
    std::vector<std::string> out;
    if (k1 < -2.0) out.push_back("k1 < -2 implies Var(e1^2) < 0");
    if (k2 < -2.0) out.push_back("k2 < -2 implies Var(e2^2) < 0");
    if (k1 >= -2.0 && k2 >= -2.0 && c * c > (k1 + 2.0) * (k2 + 2.0))
      out.push_back("c^2 > (k1+2)(k2+2) violates Cauchy-Schwarz for Cov(e1^2, e2^2)");
    return out;
  }

  /// The full order-4 cumulant tensor.
  SymmetricTensor tensor() const {
    SymmetricTensor t(4, 2);
    t.set({0, 0, 0, 0}, k1);
    t.set({1, 1, 1, 1}, k2);
    t.set({0, 0, 1, 1}, c);
    return t;
  }
};

struct JadeObjective {
  double g = 0.0;       // kappa1^2 + kappa2^2
  double kappa1 = 0.0;  // fourth cumulant of the first rotated component
  double kappa2 = 0.0;
};

/// Contrast of the rotated components R(theta) e, with
/// R(theta) = [[cos, -sin], [sin, cos]].
inline JadeObjective jade_objective(const Cumulant4Config& cfg, double theta) {
  const double a = (cfg.k1 + cfg.k2 + 6.0 * cfg.c) / 4.0;
  const double b = (cfg.k1 - cfg.k2) / 2.0;
  const double q = (6.0 * cfg.c - (cfg.k1 + cfg.k2)) / 4.0;
  const double cos2 = std::cos(2.0 * theta);
  const double u = cos2 * cos2;
  JadeObjective out;
  out.g = 2.0 * (a - q * u) * (a - q * u) + 2.0 * b * b * u;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double c2 = cs * cs, s2 = sn * sn;
  out.kappa1 = cfg.k1 * c2 * c2 + cfg.k2 * s2 * s2 + 6.0 * cfg.c * c2 * s2;
  out.kappa2 = cfg.k1 * s2 * s2 + cfg.k2 * c2 * c2 + 6.0 * cfg.c * c2 * s2;
  return out;
}

enum class Verdict { TrueOrder, Reversed, Boundary };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::TrueOrder: return "true-order";
    case Verdict::Reversed: return "reversed";
    case Verdict::Boundary: return "boundary";
  }
  return "?";
}

namespace detail {

inline Verdict compare_with_boundary(double keep, double flip, double rel_tol = 1e-12) {
  // keep > flip favours the true order
  const double scale = std::max(std::abs(keep), std::abs(flip));
  if (std::abs(keep - flip) <= rel_tol * scale) return Verdict::Boundary;
  return keep > flip ? Verdict::TrueOrder : Verdict::Reversed;
}

}  // namespace detail

/// The true mixing matrix of the pair model.
inline Eigen::Matrix2d true_pair_mixing() {
  Eigen::Matrix2d a;
  a << 1.0, 0.0, 1.0, 1.0;
  return a;
}

struct JadeVerdict {
  Verdict verdict = Verdict::TrueOrder;
  double lhs = 0.0;  // (k1 + k2 + 6c)^2
  double rhs = 0.0;  // 8 (k1^2 + k2^2)
  double g_true = 0.0;      // g(0)
  double g_reversed = 0.0;  // g(pi/4)
  /// Mixing matrix and row-normalized B recovered when the order flips.
  std::optional<Eigen::Matrix2d> A_hat;
  std::optional<Eigen::Matrix2d> B_hat;
};

inline JadeVerdict jade_reversal_verdict(const Cumulant4Config& cfg) {
  JadeVerdict v;
  const double s = cfg.k1 + cfg.k2 + 6.0 * cfg.c;
  v.lhs = s * s;
  v.rhs = 8.0 * (cfg.k1 * cfg.k1 + cfg.k2 * cfg.k2);
  v.g_true = cfg.k1 * cfg.k1 + cfg.k2 * cfg.k2;
  v.g_reversed = s * s / 8.0;
  v.verdict = detail::compare_with_boundary(v.rhs, v.lhs);
  if (v.verdict == Verdict::Reversed) {
    // A R(pi/4)^T maps the rotated components back to X
    Eigen::Matrix2d a;
    a << 1.0, 1.0, 0.0, 2.0;
    v.A_hat = a / std::numbers::sqrt2;
    const Eigen::Matrix2d w = v.A_hat->inverse();
    const Eigen::Matrix2d w_scaled = w.diagonal().asDiagonal().inverse() * w;
    v.B_hat = Eigen::Matrix2d::Identity() - w_scaled;
  }
  return v;
}

struct ResidualScores {
  double source_score = 0.0;    // D(X1, R_{2|1}) = c
  double reversed_score = 0.0;  // D(X2, R_{1|2}) = |k1 + k2 - 2c| / 4
  Verdict verdict = Verdict::TrueOrder;
  bool sufficient_condition = false;  // c > (k1 + k2) / 6
};

/// Dependence scores D(U, V) = |Cov(U^2, V^2)| of each candidate source with
/// its regression residual.
inline ResidualScores residual_dependence_scores(const Cumulant4Config& cfg) {
  ResidualScores r;
  r.source_score = std::abs(cfg.c);
  r.reversed_score = 0.25 * std::abs(cfg.k1 + cfg.k2 - 2.0 * cfg.c);
  r.verdict = detail::compare_with_boundary(r.reversed_score, r.source_score);
  r.sufficient_condition = cfg.c > (cfg.k1 + cfg.k2) / 6.0;
  return r;
}

struct GenericityScore {
  double direct = 0.0;
  double expanded = 0.0;
};

/// S^(d)_12 = E[X1 X2^{d-1}] E[X2^2] - E[X1 X2] E[X2^d] for X1 = e1,
/// X2 = b21 e1 + e2, from the order-2 and order-d moment tensors of e.
/// `direct` pushes the tensors through the mixing matrix; `expanded` uses
/// the binomial expansion in the disturbance moments. Any pair of symmetric
/// tensors works (cumulants included), provided the (1,2) second-order
/// entry and the (1,...,1,2) order-d entry vanish; with b21 = 0 the
/// (1,2,...,2) entry must vanish as well.
inline GenericityScore genericity_score_2d(const SymmetricTensor& second, const SymmetricTensor& dth,
                                           double b21) {
  require(second.order() == 2 && second.dim() == 2, "genericity_score_2d: need an order-2 tensor on 2 variables");
  require(dth.dim() == 2, "genericity_score_2d: need a tensor on 2 variables");
  const int d = dth.order();
  require(d >= 3, "genericity_score_2d: order must be >= 3");
  require(std::isfinite(b21), "genericity_score_2d: coefficient must be finite");
  const double tol2 = 1e-12 * std::max(1.0, second.max_abs());
  const double told = 1e-12 * std::max(1.0, dth.max_abs());
  require(std::abs(second({0, 1})) <= tol2, "genericity_score_2d: E[e1 e2] must be 0");
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  idx.back() = 1;
  require(std::abs(dth(idx)) <= told, "genericity_score_2d: E[e1^(d-1) e2] must be 0");
  if (b21 == 0.0) {
    // no edge: neither disturbance may predict the other
    std::vector<int> rev(static_cast<std::size_t>(d), 1);
    rev.front() = 0;
    require(std::abs(dth(rev)) <= told, "genericity_score_2d: without an edge E[e1 e2^(d-1)] must be 0");
  }

  // E[e1^k e2^(d-k)]
  auto mu = [&](int k) {
    std::vector<int> at(static_cast<std::size_t>(d), 1);
    for (int q = 0; q < k; ++q) at[static_cast<std::size_t>(q)] = 0;
    return dth(at);
  };
  const double m11 = second({0, 0}), m22 = second({1, 1});

  GenericityScore out;
  {
    Eigen::Matrix2d a;
    a << 1.0, 0.0, b21, 1.0;
    const SymmetricTensor x2 = multilinear_transform(a, second);
    const SymmetricTensor xd = multilinear_transform(a, dth);
    std::vector<int> one_rest(static_cast<std::size_t>(d), 1), all_two(static_cast<std::size_t>(d), 1);
    one_rest.front() = 0;
    out.direct = xd(one_rest) * x2({1, 1}) - x2({0, 1}) * xd(all_two);
  }
  {
    auto binom = [](int n, int k) {
      if (k < 0 || k > n) return 0.0;
      double r = 1.0;
      for (int q = 1; q <= k; ++q) r = r * (n - k + q) / q;
      return r;
    };
    double s = -b21 * m11 * mu(0);
    for (int k = 1; k <= d; ++k) {
      if (k == d - 1) continue;
      s += (binom(d - 1, k - 1) * std::pow(b21, k - 1) * m22 - binom(d - 1, k) * std::pow(b21, k + 1) * m11) * mu(k);
    }
    out.expanded = s;
  }
  return out;
}

struct JadeEmpirical {
  double theta_hat = 0.0;          // in [0, pi/2)
  double distance_to_true = 0.0;   // to 0 modulo pi/2
  double distance_to_reversed = 0.0;  // to pi/4
  double contrast = 0.0;
  Cumulant4Config sample_cumulants;  // of the simulated disturbances
};

/// The scale-mixture configuration whose cumulants are `cfg`: sigma^2 takes
/// 1 -/+ sqrt(c) with equal probability and k1 = k2 = 1.8 (1 + c) - 3.
inline ScaleMixture realize_config(const Cumulant4Config& cfg) {
  require(cfg.c >= 0.0 && cfg.c <= 1.0, "jade_empirical_check: c must lie in [0, 1]");
  const double k = 1.8 * (1.0 + cfg.c) - 3.0;
  require(std::abs(cfg.k1 - k) <= 1e-6 && std::abs(cfg.k2 - k) <= 1e-6,
          "jade_empirical_check: only k1 = k2 = 1.8(1+c) - 3 is realizable by the scale mixture");
  const double r = std::sqrt(cfg.c);
  return {{1.0 - r, 1.0 + r}, {0.5, 0.5}};
}

/// Simulates X = A e from the scale mixture realizing `cfg`, whitens with the
/// sample covariance, and grid-maximizes the sample JADE contrast over
/// rotations of the whitened data measured from the source coordinates
/// (1000 points on [0, pi/2)).
inline JadeEmpirical jade_empirical_check(const Cumulant4Config& cfg, int T, std::uint64_t seed,
                                          int grid = 1000) {
  require(T >= 10, "jade_empirical_check: T must be >= 10");
  require(grid >= 4, "jade_empirical_check: grid too small");
  const ScaleMixture mix = realize_config(cfg);
  const SampleMatrix eps = scale_mixture_2d(T, mix, seed);
  const Eigen::Matrix2d a = true_pair_mixing();
  SampleMatrix x = eps * a.transpose();
  x.rowwise() -= x.colwise().mean();

  const Eigen::Matrix2d cov = x.transpose() * x / static_cast<double>(T - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  if (!(es.eigenvalues().minCoeff() > 1e-12 * std::max(1.0, es.eigenvalues().maxCoeff())))
    throw DegenerateError("jade_empirical_check: singular sample covariance");
  const Eigen::Matrix2d inv_sqrt = es.operatorInverseSqrt();

  // population whitening rotation U0 = (A A^T)^{-1/2} A
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> pop(a * a.transpose());
  const Eigen::Matrix2d u0 = pop.operatorInverseSqrt() * a;
  // w estimates e; candidate components are R(theta) w
  const SampleMatrix w = x * (u0.transpose() * inv_sqrt).transpose();
  const SymmetricTensor m2 = moments_from_samples(w, 2), m4 = moments_from_samples(w, 4);

  JadeEmpirical out;
  out.sample_cumulants = [&] {
    const SampleMatrix centered = eps.rowwise() - eps.colwise().mean();
    const Cumulants4 k = fourth_cumulants_2d(centered);
    return Cumulant4Config{k.k1, k.k2, k.c};
  }();
  out.contrast = -1.0;
  for (int g = 0; g < grid; ++g) {
    const double theta = (std::numbers::pi / 2.0) * g / grid;
    Eigen::Matrix2d r;
    r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    const SymmetricTensor r2 = multilinear_transform(r, m2), r4 = multilinear_transform(r, m4);
    double contrast = 0.0;
    for (int i = 0; i < 2; ++i) {
      const double kappa = r4({i, i, i, i}) - 3.0 * r2({i, i}) * r2({i, i});
      contrast += kappa * kappa;
    }
    if (contrast > out.contrast) {
      out.contrast = contrast;
      out.theta_hat = theta;
    }
  }
  out.distance_to_true = std::min(out.theta_hat, std::numbers::pi / 2.0 - out.theta_hat);
  out.distance_to_reversed = std::abs(out.theta_hat - std::numbers::pi / 4.0);
  return out;
}

}  // namespace limiam
