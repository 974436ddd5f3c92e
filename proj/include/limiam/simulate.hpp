#pragma once

// Data-generating processes for the synthetic benchmark: random weighted
// DAGs, symmetric auxiliary noise, and disturbance designs whose later
// coordinates are mean independent of the earlier ones.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "limiam/error.hpp"
#include "limiam/rng.hpp"
#include "limiam/tensor.hpp"

namespace limiam {

/// Linear SEM X = B X + eps written in causal-order coordinates. `perm[k]`
/// is the data column that holds the k-th variable of the order, so `perm`
/// read left to right is the true causal order over columns.
struct WeightedDag {
  int dim = 0;
  std::vector<int> perm;
  Eigen::MatrixXd B;  // strictly lower triangular, order coordinates

  UnitLowerTriangular mixing() const {
    const Eigen::MatrixXd ib = Eigen::MatrixXd::Identity(dim, dim) - B;
    return UnitLowerTriangular::from_strict_lower(
        ib.triangularView<Eigen::UnitLower>().solve(Eigen::MatrixXd::Identity(dim, dim)));
  }

  /// B in data-column coordinates: entry (perm[a], perm[b]) = B(a, b).
  Eigen::MatrixXd column_B() const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim, dim);
    for (int a = 0; a < dim; ++a)
      for (int b = 0; b < dim; ++b) out(perm[static_cast<std::size_t>(a)], perm[static_cast<std::size_t>(b)]) = B(a, b);
    return out;
  }

  void validate() const {
    require(dim >= 1 && static_cast<int>(perm.size()) == dim, "WeightedDag: perm size != dim");
    require(B.rows() == dim && B.cols() == dim, "WeightedDag: B shape != dim");
    std::vector<int> sorted = perm;
    std::sort(sorted.begin(), sorted.end());
    for (int k = 0; k < dim; ++k) require(sorted[static_cast<std::size_t>(k)] == k, "WeightedDag: perm is not a permutation");
    for (int i = 0; i < dim; ++i)
      for (int j = i; j < dim; ++j) require(B(i, j) == 0.0, "WeightedDag: B must be strictly lower triangular");
  }
};

struct DagOptions {
  double coef_low = 0.3;
  double coef_high = 0.8;
  bool random_signs = false;
  double edge_prob = 1.0;  // 1.0: every lower-triangular slot is an edge
};

inline WeightedDag sample_dag(int p, std::uint64_t seed, const DagOptions& opt = {}) {
  require(p >= 2, "sample_dag: p must be >= 2");
  require(0.0 < opt.coef_low && opt.coef_low <= opt.coef_high, "sample_dag: bad coefficient range");
  require(0.0 <= opt.edge_prob && opt.edge_prob <= 1.0, "sample_dag: edge_prob must lie in [0, 1]");
  Rng rng = make_stream(seed, {0xda6});
  WeightedDag dag;
  dag.dim = p;
  dag.perm.resize(static_cast<std::size_t>(p));
  std::iota(dag.perm.begin(), dag.perm.end(), 0);
  std::shuffle(dag.perm.begin(), dag.perm.end(), rng);
  dag.B = Eigen::MatrixXd::Zero(p, p);
  std::uniform_real_distribution<double> mag(opt.coef_low, opt.coef_high);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 1; i < p; ++i) {
    for (int j = 0; j < i; ++j) {
      // Draw every variate so sparsity/sign flags do not shift the stream.
      const double m = mag(rng);
      const double keep = unit(rng);
      const double sign = unit(rng);
      if (keep >= opt.edge_prob && opt.edge_prob < 1.0) continue;
      dag.B(i, j) = (opt.random_signs && sign < 0.5) ? -m : m;
    }
  }
  return dag;
}

enum class AuxDistribution { Uniform, UShapedBeta, ConcentratedBeta, Bimodal };

inline std::string_view to_string(AuxDistribution a) {
  switch (a) {
    case AuxDistribution::Uniform: return "uniform";
    case AuxDistribution::UShapedBeta: return "ushaped-beta";
    case AuxDistribution::ConcentratedBeta: return "concentrated-beta";
    case AuxDistribution::Bimodal: return "bimodal";
  }
  return "?";
}

inline AuxDistribution parse_aux(std::string_view s) {
  for (auto a : {AuxDistribution::Uniform, AuxDistribution::UShapedBeta,
                 AuxDistribution::ConcentratedBeta, AuxDistribution::Bimodal})
    if (s == to_string(a)) return a;
  throw ArgumentError("unknown auxiliary distribution '" + std::string(s) + "'");
}

namespace detail {

inline double beta_draw(Rng& rng, double a, double b) {
  const double x = std::gamma_distribution<double>(a, 1.0)(rng);
  const double y = std::gamma_distribution<double>(b, 1.0)(rng);
  return x / (x + y);
}

}  // namespace detail

/// One draw of the auxiliary variable; every variant is symmetric on [-1, 1].
inline double draw_aux(AuxDistribution a, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  switch (a) {
    case AuxDistribution::Uniform: return 2.0 * unit(rng) - 1.0;
    case AuxDistribution::UShapedBeta: return 2.0 * detail::beta_draw(rng, 0.5, 0.5) - 1.0;
    case AuxDistribution::ConcentratedBeta: return 2.0 * detail::beta_draw(rng, 2.0, 2.0) - 1.0;
    case AuxDistribution::Bimodal: {
      const double mag = 0.3 + 0.7 * unit(rng);
      return unit(rng) < 0.5 ? -mag : mag;
    }
  }
  return 0.0;
}

struct DependenceDesign {
  enum class Kind { Independent, LaggedHetero, Threshold, ConditionalMixture };
  Kind kind = Kind::Independent;
  double rho = 0.5;    // LaggedHetero persistence, in (0, 1)
  double gamma = 1.0;  // LaggedHetero strength, > 0

  static DependenceDesign independent() { return {Kind::Independent}; }
  static DependenceDesign lagged_hetero(double rho = 0.5, double gamma = 1.0) {
    return {Kind::LaggedHetero, rho, gamma};
  }
  static DependenceDesign threshold() { return {Kind::Threshold}; }
  static DependenceDesign conditional_mixture() { return {Kind::ConditionalMixture}; }

  void validate() const {
    if (kind == Kind::LaggedHetero) {
      require(rho > 0.0 && rho < 1.0, "LaggedHetero: rho must lie in (0, 1)");
      require(gamma > 0.0, "LaggedHetero: gamma must be > 0");
    }
  }
};

inline std::string_view to_string(DependenceDesign::Kind k) {
  switch (k) {
    case DependenceDesign::Kind::Independent: return "independent";
    case DependenceDesign::Kind::LaggedHetero: return "lagged-hetero";
    case DependenceDesign::Kind::Threshold: return "threshold";
    case DependenceDesign::Kind::ConditionalMixture: return "mixture";
  }
  return "?";
}

inline DependenceDesign parse_design(std::string_view s, double rho = 0.5, double gamma = 1.0) {
  using K = DependenceDesign::Kind;
  for (K k : {K::Independent, K::LaggedHetero, K::Threshold, K::ConditionalMixture}) {
    if (s == to_string(k)) {
      DependenceDesign d{k, rho, gamma};
      d.validate();
      return d;
    }
  }
  throw ArgumentError("unknown dependence design '" + std::string(s) + "'");
}

/// T x p disturbances in causal-order coordinates. Column j uses its own
/// stream derive_seed(seed, {j}); eps_1 = u_1 and later columns follow the
/// selected design, which keeps E[eps_j | eps_1..eps_{j-1}] = 0.
inline SampleMatrix sample_disturbances(int p, int T, AuxDistribution aux,
                                        const DependenceDesign& design, std::uint64_t seed) {
  require(p >= 1, "sample_disturbances: p must be >= 1");
  require(T >= 2, "sample_disturbances: T must be >= 2");
  design.validate();
  using K = DependenceDesign::Kind;
  SampleMatrix eps(T, p);
  Eigen::VectorXd history = Eigen::VectorXd::Zero(T);  // S_{j-1} (lagged) or running sum
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int j = 0; j < p; ++j) {
    Rng rng = make_stream(seed, {static_cast<std::uint64_t>(j)});
    if (j == 0 || design.kind == K::Independent) {
      for (int t = 0; t < T; ++t) eps(t, j) = draw_aux(aux, rng);
    } else if (design.kind == K::LaggedHetero) {
      const double mean = history.mean();
      const double sd = std::sqrt((history.array() - mean).square().sum() / (T - 1));
      require(sd > 0.0, "sample_disturbances: lagged history has zero variance");
      for (int t = 0; t < T; ++t) {
        const double sigma = std::exp(0.5 * design.gamma * history(t) / sd);
        eps(t, j) = sigma * draw_aux(aux, rng);
      }
    } else if (design.kind == K::Threshold) {
      for (int t = 0; t < T; ++t) {
        const double u = draw_aux(aux, rng);
        eps(t, j) = history(t) / j > 0.0 ? 2.0 * u : u;
      }
    } else {
      for (int t = 0; t < T; ++t) {
        const double coin = unit(rng);
        const double low = draw_aux(aux, rng);
        const double high = draw_aux(aux, rng);
        const double prob_low = 1.0 / (1.0 + std::exp(-2.0 * history(t) / j));
        eps(t, j) = coin < prob_low ? low : 2.5 * high;
      }
    }
    // S_j = rho * S_{j-1} + eps_j  or  running sum of eps_1..eps_j.
    if (design.kind == K::LaggedHetero)
      history = design.rho * history + eps.col(j);
    else
      history += eps.col(j);
  }
  return eps;
}

/// X = eps A^T in order coordinates, then column k is moved to perm[k].
inline SampleMatrix generate_dataset(const WeightedDag& dag, const SampleMatrix& eps) {
  dag.validate();
  require(eps.cols() == dag.dim, "generate_dataset: eps has the wrong number of columns");
  const SampleMatrix ordered = eps * dag.mixing().matrix().transpose();
  SampleMatrix x(ordered.rows(), ordered.cols());
  for (int k = 0; k < dag.dim; ++k) x.col(dag.perm[static_cast<std::size_t>(k)]) = ordered.col(k);
  return x;
}

/// Common-variance pair eps_i = sigma Z_i, Z_i uniform on [-sqrt3, sqrt3],
/// sigma^2 drawn from a discrete law independent of Z.
struct ScaleMixture {
  std::vector<double> sigma2{0.1, 1.9};
  std::vector<double> probs{0.5, 0.5};

  void validate() const {
    require(!sigma2.empty() && sigma2.size() == probs.size(), "ScaleMixture: sizes differ");
    double total = 0.0;
    for (std::size_t k = 0; k < sigma2.size(); ++k) {
      require(sigma2[k] >= 0.0, "ScaleMixture: negative sigma^2");
      require(probs[k] >= 0.0, "ScaleMixture: negative probability");
      total += probs[k];
    }
    require(std::abs(total - 1.0) < 1e-12, "ScaleMixture: probabilities must sum to 1");
  }

  double mean_sigma4() const {
    double m = 0.0;
    for (std::size_t k = 0; k < sigma2.size(); ++k) m += probs[k] * sigma2[k] * sigma2[k];
    return m;
  }
};

inline SampleMatrix scale_mixture_2d(int T, const ScaleMixture& mix, std::uint64_t seed) {
  require(T >= 1, "scale_mixture_2d: T must be >= 1");
  mix.validate();
  Rng scale_rng = make_stream(seed, {0x5c});
  Rng z1 = make_stream(seed, {0});
  Rng z2 = make_stream(seed, {1});
  std::discrete_distribution<int> pick(mix.probs.begin(), mix.probs.end());
  const double r3 = std::sqrt(3.0);
  std::uniform_real_distribution<double> z(-r3, r3);
  SampleMatrix eps(T, 2);
  for (int t = 0; t < T; ++t) {
    const double s = std::sqrt(mix.sigma2[static_cast<std::size_t>(pick(scale_rng))]);
    eps(t, 0) = s * z(z1);
    eps(t, 1) = s * z(z2);
  }
  return eps;
}

}  // namespace limiam
