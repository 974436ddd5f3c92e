#pragma once

// Causal-order discovery by recursive source selection. The mean-independence
// variant scores each candidate by summing MeanInd over the other active
// variables; the DirectLiNGAM baseline uses the pairwise likelihood-ratio
// measure built on a maximum-entropy approximation. Both share the
// standardize / select / residualize loop, after which the adjacency matrix
// is estimated by OLS of every variable on its predecessors.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "limiam/error.hpp"
#include "limiam/meanind.hpp"
#include "limiam/rng.hpp"
#include "limiam/tensor.hpp"

namespace limiam {

/// perm[k] is the data column placed k-th (0-based) in the order.
struct CausalOrder {
  std::vector<int> perm;

  int dim() const { return static_cast<int>(perm.size()); }

  void validate() const {
    std::vector<char> seen(perm.size(), 0);
    for (int v : perm) {
      require(v >= 0 && v < dim(), "CausalOrder: index out of range");
      require(!seen[static_cast<std::size_t>(v)], "CausalOrder: repeated index");
      seen[static_cast<std::size_t>(v)] = 1;
    }
  }

  /// position[c] = place of column c in the order.
  std::vector<int> positions() const {
    std::vector<int> pos(perm.size());
    for (std::size_t k = 0; k < perm.size(); ++k) pos[static_cast<std::size_t>(perm[k])] = static_cast<int>(k);
    return pos;
  }

  bool operator==(const CausalOrder&) const = default;
};

/// Diagnostics of one scored pair (candidate regressor, other variable).
struct PairDiagnostics {
  int target = 0;
  ScoreDiagnostics diag;
};

struct CandidateScore {
  int column = 0;
  double score = 0.0;
  std::vector<PairDiagnostics> pairs;
};

struct StageDiagnostics {
  int stage = 0;                          // 1-based
  std::vector<CandidateScore> candidates; // in increasing column order; empty for the forced step
  int selected = 0;
  bool tie = false;     // another candidate reached the same minimum
  bool forced = false;  // last remaining variable, appended without scoring
};

struct DiscoveryResult {
  CausalOrder order;
  /// B(i, j) is the coefficient of column j in the equation of column i.
  Eigen::MatrixXd B;
  Eigen::VectorXd intercept;
  std::vector<StageDiagnostics> stages;
  std::string method;

  /// B permuted into order coordinates; strictly lower triangular.
  Eigen::MatrixXd B_ordered() const {
    const int p = order.dim();
    Eigen::MatrixXd out(p, p);
    for (int a = 0; a < p; ++a)
      for (int b = 0; b < p; ++b) out(a, b) = B(order.perm[static_cast<std::size_t>(a)], order.perm[static_cast<std::size_t>(b)]);
    return out;
  }
};

namespace detail {

// From the second stage on a working column whose variance falls below this
// fraction of its previous (unit) value is treated as constant.
constexpr double kDegenerateVariance = 1e-12;

inline std::string column_label(int c) { return "x" + std::to_string(c + 1); }

}  // namespace detail

using WorkingTrace = std::vector<SampleMatrix>;

/// The shared recursion. `score_stage(z, active, stage)` returns one
/// CandidateScore per active column. When `trace` is given it receives the
/// standardized active block of every stage (columns in `active` order).
template <class ScoreStage>
CausalOrder ordered_recursion(const SampleMatrix& x, ScoreStage&& score_stage,
                              std::vector<StageDiagnostics>& stages, WorkingTrace* trace = nullptr) {
  const int p = static_cast<int>(x.cols());
  require(p >= 2, "discovery: need at least 2 variables");
  require(x.rows() > p, "discovery: need more samples than variables");
  require(x.allFinite(), "discovery: data contain non-finite values");

  SampleMatrix work = x;
  std::vector<int> active(static_cast<std::size_t>(p));
  std::iota(active.begin(), active.end(), 0);
  CausalOrder order;
  const double n = static_cast<double>(x.rows());

  // standardize with the sample mean and the (n-1) variance
  auto standardize = [&](int stage) {
    SampleMatrix z(x.rows(), static_cast<Eigen::Index>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k) {
      const Eigen::VectorXd col = work.col(active[k]);
      const double mean = col.mean();
      const double var = (col.array() - mean).square().sum() / (n - 1.0);
      if (!(var > (stage == 1 ? 0.0 : detail::kDegenerateVariance)))
        throw DegenerateError("discovery: stage " + std::to_string(stage) + ", column " +
                              detail::column_label(active[k]) + " has zero variance");
      z.col(static_cast<Eigen::Index>(k)) = (col.array() - mean) / std::sqrt(var);
    }
    return z;
  };

  for (int stage = 1; active.size() > 1; ++stage) {
    const SampleMatrix z = standardize(stage);
    if (trace) trace->push_back(z);

    StageDiagnostics sd;
    sd.stage = stage;
    sd.candidates = score_stage(z, active, stage);
    require(sd.candidates.size() == active.size(), "discovery: selector returned wrong count");
    std::size_t best = 0;
    for (std::size_t k = 1; k < active.size(); ++k)
      if (sd.candidates[k].score < sd.candidates[best].score) best = k;
    for (std::size_t k = 0; k < active.size(); ++k)
      if (k != best && sd.candidates[k].score == sd.candidates[best].score) sd.tie = true;
    const int chosen = active[best];
    sd.selected = chosen;
    stages.push_back(std::move(sd));
    order.perm.push_back(chosen);

    // residualize the remaining active columns on the chosen one
    const Eigen::VectorXd src = z.col(static_cast<Eigen::Index>(best));
    std::vector<int> next;
    for (std::size_t k = 0; k < active.size(); ++k) {
      if (k == best) continue;
      work.col(active[k]) = ResidualPair::make(z.col(static_cast<Eigen::Index>(k)), src).residual;
      next.push_back(active[k]);
    }
    active = std::move(next);
  }
  standardize(p);
  StageDiagnostics last;
  last.stage = p;
  last.selected = active.front();
  last.forced = true;
  stages.push_back(std::move(last));
  order.perm.push_back(active.front());
  return order;
}

/// OLS with intercept of every column on its predecessors in `order`, on the
/// data's own scale. Returns B in column coordinates and the intercepts.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> estimate_B_with_intercept(const SampleMatrix& x,
                                                                              const CausalOrder& order) {
  const int p = static_cast<int>(x.cols());
  require(order.dim() == p, "estimate_B: order size does not match the data");
  order.validate();
  require(x.rows() > p, "estimate_B: need more samples than variables");
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd intercept(p);
  const Eigen::Index n = x.rows();
  for (int k = 0; k < p; ++k) {
    const int target = order.perm[static_cast<std::size_t>(k)];
    Eigen::MatrixXd design(n, k + 1);
    design.col(0).setOnes();
    for (int q = 0; q < k; ++q) design.col(q + 1) = x.col(order.perm[static_cast<std::size_t>(q)]);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < k + 1)
      throw DegenerateError("estimate_B: predecessors of " + detail::column_label(target) + " are collinear");
    const Eigen::VectorXd coef = qr.solve(x.col(target));
    intercept(target) = coef(0);
    for (int q = 0; q < k; ++q) B(target, order.perm[static_cast<std::size_t>(q)]) = coef(q + 1);
  }
  return {B, intercept};
}

inline Eigen::MatrixXd estimate_B(const SampleMatrix& x, const CausalOrder& order) {
  return estimate_B_with_intercept(x, order).first;
}

/// Mean-independence discovery with the chosen scorer.
inline DiscoveryResult direct_limiam(const SampleMatrix& x, const ScorerSpec& scorer, std::uint64_t seed = 0,
                                     WorkingTrace* trace = nullptr) {
  validate(scorer);
  DiscoveryResult res;
  res.method = "limiam-" + std::string(scorer_name(scorer));
  // The CV seed depends on the stage only, so relabeling columns does not
  // change the folds.
  auto score_stage = [&](const SampleMatrix& z, const std::vector<int>& active, int stage) {
    const std::uint64_t stage_seed = derive_seed(seed, {static_cast<std::uint64_t>(stage)});
    std::vector<CandidateScore> out;
    for (std::size_t a = 0; a < active.size(); ++a) {
      CandidateScore cs;
      cs.column = active[a];
      for (std::size_t b = 0; b < active.size(); ++b) {
        if (a == b) continue;
        const ResidualPair pair = ResidualPair::make(z.col(static_cast<Eigen::Index>(b)), z.col(static_cast<Eigen::Index>(a)));
        const ScoreResult r = mean_ind_score(pair, scorer, stage_seed);
        cs.score += r.score;
        cs.pairs.push_back({active[b], r.diag});
      }
      out.push_back(std::move(cs));
    }
    return out;
  };
  res.order = ordered_recursion(x, score_stage, res.stages, trace);
  std::tie(res.B, res.intercept) = estimate_B_with_intercept(x, res.order);
  return res;
}

/// Maximum-entropy approximation of differential entropy for a unit-variance
/// sample.
inline double entropy_approx(const Eigen::VectorXd& u) {
  constexpr double k1 = 79.047, k2 = 7.4129, gamma = 0.37457;
  const double h_gauss = (1.0 + std::log(2.0 * std::numbers::pi)) / 2.0;
  // log cosh(u) = |u| + log1p(exp(-2|u|)) - log 2, stable for large |u|
  const Eigen::ArrayXd a = u.array().abs();
  const double logcosh = (a + (-2.0 * a).exp().log1p() - std::log(2.0)).mean();
  const double gauss = (u.array() * (-0.5 * u.array().square()).exp()).mean();
  return h_gauss - k1 * (logcosh - gamma) * (logcosh - gamma) - k2 * gauss * gauss;
}

namespace detail {

inline Eigen::VectorXd unit_scale(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  const double sd = std::sqrt((v.array() - mean).square().mean());
  return ((v.array() - mean) / sd).matrix();
}

}  // namespace detail

/// Pairwise likelihood-ratio measure for "candidate precedes other":
/// H(other) + H(r_{cand|other}) - H(cand) - H(r_{other|cand}), each residual
/// rescaled to unit population sd. Positive values favour the candidate as
/// the cause.
inline double pairwise_lr(const Eigen::VectorXd& cand, const Eigen::VectorXd& other) {
  const Eigen::VectorXd c = detail::unit_scale(cand), o = detail::unit_scale(other);
  const Eigen::VectorXd r_co = detail::unit_scale(ResidualPair::make(c, o).residual);
  const Eigen::VectorXd r_oc = detail::unit_scale(ResidualPair::make(o, c).residual);
  return entropy_approx(o) + entropy_approx(r_co) - entropy_approx(c) - entropy_approx(r_oc);
}

/// DirectLiNGAM with the pairwise likelihood measure: the candidate minimizing
/// sum_other min(0, measure)^2 is taken as the next source.
inline DiscoveryResult direct_lingam_baseline(const SampleMatrix& x, WorkingTrace* trace = nullptr) {
  DiscoveryResult res;
  res.method = "direct-lingam";
  auto score_stage = [](const SampleMatrix& z, const std::vector<int>& active, int) {
    std::vector<CandidateScore> out;
    for (std::size_t a = 0; a < active.size(); ++a) {
      CandidateScore cs;
      cs.column = active[a];
      for (std::size_t b = 0; b < active.size(); ++b) {
        if (a == b) continue;
        const double m = std::min(0.0, pairwise_lr(z.col(static_cast<Eigen::Index>(a)), z.col(static_cast<Eigen::Index>(b))));
        cs.score += m * m;
      }
      out.push_back(std::move(cs));
    }
    return out;
  };
  res.order = ordered_recursion(x, score_stage, res.stages, trace);
  std::tie(res.B, res.intercept) = estimate_B_with_intercept(x, res.order);
  return res;
}

/// Directed edges (from, to), 0-based column indices.
using EdgeSet = std::set<std::pair<int, int>>;

/// Edge j -> i wherever |B(i, j)| exceeds the threshold.
inline EdgeSet edges_from_B(const Eigen::MatrixXd& B, double threshold = 0.15) {
  require(threshold >= 0.0, "edges_from_B: threshold must be >= 0");
  require(B.rows() == B.cols(), "edges_from_B: B must be square");
  EdgeSet out;
  for (Eigen::Index i = 0; i < B.rows(); ++i)
    for (Eigen::Index j = 0; j < B.cols(); ++j)
      if (i != j && std::abs(B(i, j)) > threshold) out.emplace(static_cast<int>(j), static_cast<int>(i));
  return out;
}

/// Structural Hamming distance: size of the symmetric difference of the
/// directed edge sets.
inline int shd(const EdgeSet& a, const EdgeSet& b) {
  int d = 0;
  for (const auto& e : a) d += !b.contains(e);
  for (const auto& e : b) d += !a.contains(e);
  return d;
}

/// True when every edge of `truth` points forward in `order`.
inline bool order_compatible(const CausalOrder& order, const EdgeSet& truth) {
  const std::vector<int> pos = order.positions();
  for (const auto& [from, to] : truth) {
    require(from >= 0 && from < order.dim() && to >= 0 && to < order.dim(), "order_compatible: edge out of range");
    if (pos[static_cast<std::size_t>(from)] >= pos[static_cast<std::size_t>(to)]) return false;
  }
  return true;
}

}  // namespace limiam
