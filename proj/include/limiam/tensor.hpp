#pragma once

// Symmetric moment tensors over R^p, the unit-lower-triangular group action
// on them, and the higher-order LDL factorization T = L . D where D has
// vanishing (i,...,i,j) entries for i < j.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "limiam/error.hpp"

namespace limiam {

/// n x p matrix of observations, one sample per row.
using SampleMatrix = Eigen::MatrixXd;

namespace detail {

inline std::size_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::size_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline std::size_t ipow(std::size_t b, int e) {
  std::size_t r = 1;
  while (e-- > 0) r *= b;
  return r;
}

}  // namespace detail

/// Order-d symmetric tensor over R^p. Only entries with nondecreasing
/// multi-indices are stored (C(p+d-1, d) of them); lookups sort the index
/// first, so every permutation of an index sees the same value.
/// Indices are 0-based.
class SymmetricTensor {
 public:
  SymmetricTensor(int order, int dim) : order_(order), dim_(dim) {
    require(order >= 2, "SymmetricTensor: order must be >= 2");
    require(dim >= 1, "SymmetricTensor: dim must be >= 1");
    require(order <= 12 && dim <= 64, "SymmetricTensor: order/dim too large for dense storage");
    values_.assign(detail::binomial(static_cast<std::size_t>(dim + order - 1),
                                    static_cast<std::size_t>(order)),
                   0.0);
  }

  int order() const { return order_; }
  int dim() const { return dim_; }
  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }

  double operator()(std::span<const int> idx) const { return values_[offset(idx)]; }
  double operator()(std::initializer_list<int> idx) const {
    return (*this)(std::span<const int>(idx.begin(), idx.size()));
  }

  void set(std::span<const int> idx, double v) { values_[offset(idx)] = v; }
  void set(std::initializer_list<int> idx, double v) {
    set(std::span<const int>(idx.begin(), idx.size()), v);
  }

  /// Entry (i, ..., i, j) with i repeated order-1 times.
  double pattern_entry(int i, int j) const {
    std::vector<int> idx(static_cast<std::size_t>(order_), i);
    idx.back() = j;
    return (*this)(idx);
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  /// Calls f(idx, value) for every stored (nondecreasing) multi-index.
  template <class F>
  void for_each(F&& f) const {
    std::vector<int> idx(static_cast<std::size_t>(order_), 0);
    for (;;) {
      f(std::as_const(idx), values_[offset_sorted(idx)]);
      int k = order_ - 1;
      while (k >= 0 && idx[static_cast<std::size_t>(k)] == dim_ - 1) --k;
      if (k < 0) return;
      const int next = idx[static_cast<std::size_t>(k)] + 1;
      for (int m = k; m < order_; ++m) idx[static_cast<std::size_t>(m)] = next;
    }
  }

  /// Full p^d array, first index fastest.
  std::vector<double> dense() const {
    const auto p = static_cast<std::size_t>(dim_);
    std::vector<double> out(detail::ipow(p, order_));
    std::vector<int> idx(static_cast<std::size_t>(order_));
    for (std::size_t flat = 0; flat < out.size(); ++flat) {
      std::size_t r = flat;
      for (auto& i : idx) {
        i = static_cast<int>(r % p);
        r /= p;
      }
      out[flat] = (*this)(idx);
    }
    return out;
  }

  /// Reads the nondecreasing entries of a full symmetric array.
  static SymmetricTensor from_dense(int order, int dim, const std::vector<double>& full) {
    SymmetricTensor t(order, dim);
    require(full.size() == detail::ipow(static_cast<std::size_t>(dim), order),
            "SymmetricTensor::from_dense: wrong array size");
    std::vector<double> vals(t.size());
    t.for_each([&](const std::vector<int>& idx, double) {
      std::size_t flat = 0, stride = 1;
      for (int i : idx) {
        flat += static_cast<std::size_t>(i) * stride;
        stride *= static_cast<std::size_t>(dim);
      }
      vals[t.offset_sorted(idx)] = full[flat];
    });
    t.values_ = std::move(vals);
    return t;
  }

  /// Order-2 tensor from a symmetric matrix (upper triangle is ignored).
  static SymmetricTensor from_matrix(const Eigen::MatrixXd& m) {
    require(m.rows() == m.cols() && m.rows() >= 1, "SymmetricTensor::from_matrix: not square");
    SymmetricTensor t(2, static_cast<int>(m.rows()));
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j <= i; ++j) t.set({j, i}, m(i, j));
    return t;
  }

  Eigen::MatrixXd to_matrix() const {
    require(order_ == 2, "SymmetricTensor::to_matrix: order must be 2");
    Eigen::MatrixXd m(dim_, dim_);
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j) m(i, j) = (*this)({i, j});
    return m;
  }

  friend bool operator==(const SymmetricTensor&, const SymmetricTensor&) = default;

 private:
  std::size_t offset(std::span<const int> idx) const {
    require(static_cast<int>(idx.size()) == order_, "SymmetricTensor: index length != order");
    std::array<int, 12> s{};
    for (std::size_t k = 0; k < idx.size(); ++k) {
      require(idx[k] >= 0 && idx[k] < dim_, "SymmetricTensor: index out of range");
      s[k] = idx[k];
    }
    std::sort(s.begin(), s.begin() + order_);
    return offset_sorted(std::span<const int>(s.data(), idx.size()));
  }

  // Colex rank of the strictly increasing sequence c_k = i_k + k.
  std::size_t offset_sorted(std::span<const int> idx) const {
    std::size_t r = 0;
    for (std::size_t k = 0; k < idx.size(); ++k)
      r += detail::binomial(static_cast<std::size_t>(idx[k]) + k, k + 1);
    return r;
  }

  int order_;
  int dim_;
  std::vector<double> values_;
};

/// p x p lower-triangular matrix with unit diagonal.
class UnitLowerTriangular {
 public:
  explicit UnitLowerTriangular(int dim) : m_(Eigen::MatrixXd::Identity(dim, dim)) {
    require(dim >= 1, "UnitLowerTriangular: dim must be >= 1");
  }

  /// Validates that m is exactly unit lower triangular.
  explicit UnitLowerTriangular(Eigen::MatrixXd m) : m_(std::move(m)) {
    require(m_.rows() == m_.cols() && m_.rows() >= 1, "UnitLowerTriangular: not square");
    for (int i = 0; i < m_.rows(); ++i) {
      require(m_(i, i) == 1.0, "UnitLowerTriangular: diagonal must be exactly 1");
      for (int j = i + 1; j < m_.cols(); ++j)
        require(m_(i, j) == 0.0, "UnitLowerTriangular: entries above the diagonal must be 0");
    }
  }

  /// Identity plus the strictly lower part of `m`; everything else is discarded.
  static UnitLowerTriangular from_strict_lower(const Eigen::MatrixXd& m) {
    Eigen::MatrixXd u = m.triangularView<Eigen::StrictlyLower>();
    u.diagonal().setOnes();
    return UnitLowerTriangular(std::move(u));
  }

  static UnitLowerTriangular identity(int dim) { return UnitLowerTriangular(dim); }

  int dim() const { return static_cast<int>(m_.rows()); }
  double operator()(int i, int j) const { return m_(i, j); }
  const Eigen::MatrixXd& matrix() const { return m_; }

  UnitLowerTriangular inverse() const {
    Eigen::MatrixXd inv = m_.triangularView<Eigen::UnitLower>().solve(
        Eigen::MatrixXd::Identity(dim(), dim()));
    return from_strict_lower(inv);
  }

  friend UnitLowerTriangular operator*(const UnitLowerTriangular& a, const UnitLowerTriangular& b) {
    require(a.dim() == b.dim(), "UnitLowerTriangular: dimension mismatch");
    return from_strict_lower(a.m_ * b.m_);
  }

 private:
  Eigen::MatrixXd m_;
};

/// Set of ordered pairs (i, j), i < j, at which (i,...,i,j) entries must vanish.
struct TriangularPattern {
  int dim = 0;
  std::set<std::pair<int, int>> zero_pairs;

  /// Every pair i < j: the pattern produced by higher_order_ldl.
  static TriangularPattern full(int dim) {
    TriangularPattern w{dim, {}};
    for (int i = 0; i < dim; ++i)
      for (int j = i + 1; j < dim; ++j) w.zero_pairs.emplace(i, j);
    return w;
  }

  void add(int i, int j) {
    require(0 <= i && i < j && j < dim, "TriangularPattern: pair must satisfy 0 <= i < j < dim");
    zero_pairs.emplace(i, j);
  }

  /// Largest |S_{i..i j}| over the pattern's pairs.
  double max_violation(const SymmetricTensor& s) const {
    require(s.dim() == dim, "TriangularPattern: dimension mismatch");
    double m = 0.0;
    for (auto [i, j] : zero_pairs) m = std::max(m, std::abs(s.pattern_entry(i, j)));
    return m;
  }
};

/// [A . S]_{i1..id} = sum_{j} A_{i1 j1} ... A_{id jd} S_{j1..jd} for any square A.
/// Computed as d successive mode products on the dense array.
inline SymmetricTensor multilinear_transform(const Eigen::MatrixXd& a, const SymmetricTensor& s) {
  require(a.rows() == s.dim() && a.cols() == s.dim(), "tensor action: dimension mismatch");
  const auto p = static_cast<std::size_t>(s.dim());
  const int d = s.order();
  std::vector<double> cur = s.dense();
  std::vector<double> next(cur.size());
  std::size_t stride = 1;
  for (int mode = 0; mode < d; ++mode) {
    const std::size_t block = stride * p;
    for (std::size_t base = 0; base < cur.size(); base += block) {
      for (std::size_t low = 0; low < stride; ++low) {
        for (std::size_t i = 0; i < p; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < p; ++j)
            acc += a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
                   cur[base + j * stride + low];
          next[base + i * stride + low] = acc;
        }
      }
    }
    std::swap(cur, next);
    stride = block;
  }
  return SymmetricTensor::from_dense(d, s.dim(), cur);
}

/// Group action of LU(p) on Sym^d(R^p).
inline SymmetricTensor tensor_action(const UnitLowerTriangular& a, const SymmetricTensor& s) {
  require(a.dim() == s.dim(), "tensor_action: A.dim != S.dim");
  return multilinear_transform(a.matrix(), s);
}

struct LdlFactors {
  UnitLowerTriangular L;
  SymmetricTensor D;
};

/// Unique factorization T = L . D with L unit lower triangular and
/// D_{i..i j} = 0 for all i < j. Eliminates one variable per level: at
/// level k the multipliers -T_{k..k j} / T_{k..k} clear row k, then the
/// trailing subtensor is processed the same way.
///
/// Throws DegenerateError when a pivot T_{k..k} is below
/// 1e-12 * (max |entry| of the trailing subtensor at level k).
inline LdlFactors higher_order_ldl(const SymmetricTensor& t, double rel_pivot_tol = 1e-12) {
  const int p = t.dim();
  const int d = t.order();
  SymmetricTensor cur = t;
  Eigen::MatrixXd m_total = Eigen::MatrixXd::Identity(p, p);
  std::vector<int> idx(static_cast<std::size_t>(d));

  for (int k = 0; k + 1 < p; ++k) {
    double sub_max = 0.0;
    cur.for_each([&](const std::vector<int>& ix, double v) {
      if (ix.front() >= k) sub_max = std::max(sub_max, std::abs(v));
    });
    const double pivot = cur.pattern_entry(k, k);
    if (!(std::abs(pivot) >= rel_pivot_tol * sub_max) || pivot == 0.0) {
      throw DegenerateError("higher_order_ldl: vanishing pivot at recursion level " +
                            std::to_string(k + 1) + " (|pivot| = " +
                            std::to_string(std::abs(pivot)) + ")");
    }
    Eigen::MatrixXd step = Eigen::MatrixXd::Identity(p, p);
    for (int j = k + 1; j < p; ++j) step(j, k) = -cur.pattern_entry(k, j) / pivot;
    cur = multilinear_transform(step, cur);
    // Elimination leaves exact zeros in theory; store them as such.
    for (int j = k + 1; j < p; ++j) {
      std::fill(idx.begin(), idx.end(), k);
      idx.back() = j;
      cur.set(idx, 0.0);
    }
    m_total = step * m_total;
  }
  UnitLowerTriangular m = UnitLowerTriangular::from_strict_lower(m_total);
  return {m.inverse(), std::move(cur)};
}

/// One of the two coupled factorizations (M, T) = (A D A^T, A . S) in a
/// fixed variable order. `order[k]` is the original variable at position k;
/// A, D, S live in order coordinates.
struct OrderedFactorization {
  std::array<int, 2> order{0, 1};
  UnitLowerTriangular A{2};
  Eigen::Matrix2d D = Eigen::Matrix2d::Identity();
  SymmetricTensor S{3, 2};

  double coefficient() const { return A(1, 0); }

  Eigen::Matrix2d permutation() const {
    Eigen::Matrix2d perm = Eigen::Matrix2d::Zero();
    perm(order[0], 0) = 1.0;
    perm(order[1], 1) = 1.0;
    return perm;
  }

  Eigen::Matrix2d reconstruct_M() const {
    const Eigen::Matrix2d pa = permutation() * A.matrix();
    return pa * D * pa.transpose();
  }

  SymmetricTensor reconstruct_T() const {
    return multilinear_transform(permutation() * A.matrix(), S);
  }
};

struct ReversedFactorization {
  OrderedFactorization forward;   // order 1 < 2
  OrderedFactorization reversed;  // order 2 < 1
};

/// Writes a coupled pair (M, T) over R^2 in both causal orders when the
/// (1,...,1,2) zero constraint on S is dropped: both parameterizations
/// reproduce (M, T) exactly, so the order is not identifiable.
inline ReversedFactorization reversed_factorization(const Eigen::Matrix2d& m,
                                                    const SymmetricTensor& t) {
  require(t.dim() == 2, "reversed_factorization: T must have dim 2");
  require(m(0, 1) == m(1, 0), "reversed_factorization: M must be symmetric");
  require(m(0, 0) != 0.0 && m(1, 1) != 0.0, "reversed_factorization: M has a zero diagonal entry");

  auto build = [&](std::array<int, 2> order) {
    Eigen::Matrix2d perm = Eigen::Matrix2d::Zero();
    perm(order[0], 0) = 1.0;
    perm(order[1], 1) = 1.0;
    // Move (M, T) into order coordinates.
    const Eigen::Matrix2d mo = perm.transpose() * m * perm;
    const SymmetricTensor to = multilinear_transform(perm.transpose(), t);
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(2, 2);
    a(1, 0) = mo(0, 1) / mo(0, 0);
    OrderedFactorization f;
    f.order = order;
    f.A = UnitLowerTriangular(a);
    const UnitLowerTriangular a_inv = f.A.inverse();
    f.D = a_inv.matrix() * mo * a_inv.matrix().transpose();
    f.D(0, 1) = f.D(1, 0) = 0.0;
    f.S = tensor_action(a_inv, to);
    return f;
  };
  return {build({0, 1}), build({1, 0})};
}

/// Empirical moment tensor: entry (i1..id) = (1/n) sum_v X_{v,i1} ... X_{v,id}.
inline SymmetricTensor moments_from_samples(const SampleMatrix& x, int order) {
  require(x.rows() >= 1, "moments_from_samples: empty sample");
  require(x.cols() >= 1, "moments_from_samples: no columns");
  require(order >= 2, "moments_from_samples: order must be >= 2");
  SymmetricTensor out(order, static_cast<int>(x.cols()));
  Eigen::ArrayXd prod(x.rows());
  out.for_each([&](const std::vector<int>& idx, double) {
    prod.setOnes();
    for (int i : idx) prod *= x.col(i).array();
    out.set(idx, prod.mean());
  });
  return out;
}

/// Fourth-order cumulants of a mean-zero pair.
struct Cumulants4 {
  double k1 = 0.0;     // kappa_1111
  double k2 = 0.0;     // kappa_2222
  double c = 0.0;      // kappa_1122
  double k1112 = 0.0;  // kappa_1112
  double k1222 = 0.0;  // kappa_1222
};

/// Zero-mean moment-to-cumulant conversion at order 4:
/// kappa_ijkl = m_ijkl - m_ij m_kl - m_ik m_jl - m_il m_jk.
inline double cumulant4_entry(const SymmetricTensor& m2, const SymmetricTensor& m4, int i, int j,
                              int k, int l) {
  return m4({i, j, k, l}) - m2({i, j}) * m2({k, l}) - m2({i, k}) * m2({j, l}) -
         m2({i, l}) * m2({j, k});
}

inline Cumulants4 fourth_cumulants_2d(const SymmetricTensor& m2, const SymmetricTensor& m4) {
  require(m2.order() == 2 && m4.order() == 4, "fourth_cumulants_2d: need order-2 and order-4 moments");
  require(m2.dim() == 2 && m4.dim() == 2, "fourth_cumulants_2d: p must be 2");
  return {cumulant4_entry(m2, m4, 0, 0, 0, 0), cumulant4_entry(m2, m4, 1, 1, 1, 1),
          cumulant4_entry(m2, m4, 0, 0, 1, 1), cumulant4_entry(m2, m4, 0, 0, 0, 1),
          cumulant4_entry(m2, m4, 0, 1, 1, 1)};
}

/// Sample version; columns are centered first.
inline Cumulants4 fourth_cumulants_2d(const SampleMatrix& x) {
  require(x.cols() == 2, "fourth_cumulants_2d: p must be 2");
  require(x.rows() >= 1, "fourth_cumulants_2d: empty sample");
  const SampleMatrix centered = x.rowwise() - x.colwise().mean();
  return fourth_cumulants_2d(moments_from_samples(centered, 2), moments_from_samples(centered, 4));
}

}  // namespace limiam
