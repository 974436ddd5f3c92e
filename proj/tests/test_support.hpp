#pragma once

// Shared random-instance generators for the unit and acceptance suites.

#include <Eigen/Dense>

#include <random>
#include <vector>

#include "limiam/rng.hpp"
#include "limiam/tensor.hpp"

namespace limiam::testing {

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline UnitLowerTriangular random_unit_lower(int p, Rng& rng, double scale = 1.0) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(p, p);
  for (int i = 1; i < p; ++i)
    for (int j = 0; j < i; ++j) m(i, j) = uniform(rng, -scale, scale);
  return UnitLowerTriangular(m);
}

inline SymmetricTensor random_tensor(int d, int p, Rng& rng) {
  SymmetricTensor t(d, p);
  t.for_each([&](const std::vector<int>& idx, double) { t.set(idx, uniform(rng, -1.0, 1.0)); });
  return t;
}

/// Random tensor with D_{i..i j} = 0 for i < j and pivots D_{i..i} bounded
/// away from zero.
inline SymmetricTensor random_pattern_tensor(int d, int p, Rng& rng) {
  SymmetricTensor t = random_tensor(d, p, rng);
  for (int i = 0; i < p; ++i) {
    const double mag = uniform(rng, 0.5, 1.5);
    t.set(std::vector<int>(static_cast<std::size_t>(d), i), uniform(rng, 0.0, 1.0) < 0.5 ? -mag : mag);
    for (int j = i + 1; j < p; ++j) {
      std::vector<int> idx(static_cast<std::size_t>(d), i);
      idx.back() = j;
      t.set(idx, 0.0);
    }
  }
  return t;
}

/// Brute-force [A . S] by the defining p^d-term sum for every entry.
inline SymmetricTensor action_by_definition(const Eigen::MatrixXd& a, const SymmetricTensor& s) {
  const int p = s.dim();
  const int d = s.order();
  SymmetricTensor out(d, p);
  std::vector<int> j(static_cast<std::size_t>(d));
  std::size_t terms = 1;
  for (int k = 0; k < d; ++k) terms *= static_cast<std::size_t>(p);
  out.for_each([&](const std::vector<int>& i, double) {
    double acc = 0.0;
    for (std::size_t flat = 0; flat < terms; ++flat) {
      std::size_t r = flat;
      double w = 1.0;
      for (int k = 0; k < d; ++k) {
        j[static_cast<std::size_t>(k)] = static_cast<int>(r % static_cast<std::size_t>(p));
        r /= static_cast<std::size_t>(p);
        w *= a(i[static_cast<std::size_t>(k)], j[static_cast<std::size_t>(k)]);
      }
      acc += w * s(j);
    }
    out.set(i, acc);
  });
  return out;
}

inline double max_abs_diff(const SymmetricTensor& a, const SymmetricTensor& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.values().size(); ++k)
    m = std::max(m, std::abs(a.values()[k] - b.values()[k]));
  return m;
}

}  // namespace limiam::testing
