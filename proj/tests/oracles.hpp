#pragma once
// Reference implementations for tests: naive double loops in long double,
// written straight from the defining sums and sharing no code with the library.

#include <cmath>
#include <cstddef>
#include <vector>

#include "entroshape/error_set.hpp"
#include "entroshape/rng.hpp"

namespace oracle {

using Real = long double;
using Rows = std::vector<std::vector<Real>>;

inline Rows rows_of(const entroshape::ErrorSet& e) {
  Rows r(e.size(), std::vector<Real>(e.dim()));
  for (std::size_t i = 0; i < e.size(); ++i)
    for (std::size_t d = 0; d < e.dim(); ++d) r[i][d] = e.sample(i)[d];
  return r;
}

inline Real sq_dist(const std::vector<Real>& a, const std::vector<Real>& b) {
  Real s = 0;
  for (std::size_t d = 0; d < a.size(); ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return s;
}

inline Real kernel(const std::vector<Real>& a, const std::vector<Real>& b, Real sigma) {
  return std::exp(-sq_dist(a, b) / (2 * sigma * sigma));
}

inline Real potential(const Rows& e, Real sigma) {
  Real z = 0;
  for (const auto& a : e)
    for (const auto& b : e) z += kernel(a, b, sigma);
  return z;
}

inline Real tmee(const Rows& e, Real sigma) {
  const Real n = static_cast<Real>(e.size());
  return -std::log(potential(e, sigma) / (n * n));
}

inline std::vector<Real> weights(const Rows& e, Real sigma_w) {
  std::vector<Real> w(e.size());
  Real total = 0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    Real sq = 0;
    for (Real x : e[i]) sq += x * x;
    w[i] = std::exp(-sq / (2 * sigma_w * sigma_w));
    total += w[i];
  }
  for (Real& x : w) x /= total;
  return w;
}

/// -log sum_ij omega_ij k_ij with omega = w_i / N^2 (cw) or w_i w_j. Since
/// sum w = 1, S = S_max - sum omega (1 - k); the deficit form keeps losses
/// near zero accurate.
inline Real weighted(const Rows& e, Real sigma, Real sigma_w, bool cw) {
  const auto w = weights(e, sigma_w);
  const Real n = static_cast<Real>(e.size());
  Real deficit = 0;
  for (std::size_t i = 0; i < e.size(); ++i)
    for (std::size_t j = 0; j < e.size(); ++j) {
      const Real c = -std::expm1(-sq_dist(e[i], e[j]) / (2 * sigma * sigma));
      deficit += (cw ? w[i] / n : w[i] * w[j]) * c;
    }
  // cw: S = (1/N)(1 - deficit/N) with the 1/N folded out of omega above.
  return cw ? std::log(n) - std::log1p(-deficit) : -std::log1p(-deficit);
}

inline Real mse(const Rows& e) {
  Real s = 0;
  for (const auto& a : e)
    for (Real x : a) s += x * x;
  return s / static_cast<Real>(e.size());
}

/// Central differences in long double; the extra precision keeps roundoff
/// well below double-precision gradient error for O(1) losses.
template <class F>
std::vector<double> gradient(F loss, Rows e, Real h = 1e-7L) {
  std::vector<double> g;
  for (auto& row : e)
    for (Real& x : row) {
      const Real x0 = x;
      x = x0 + h;
      const Real up = loss(e);
      x = x0 - h;
      const Real down = loss(e);
      x = x0;
      g.push_back(static_cast<double>((up - down) / (2 * h)));
    }
  return g;
}

inline entroshape::ErrorSet random_set(entroshape::Rng& rng, std::size_t n, std::size_t d,
                                       double scale) {
  std::vector<double> v(n * d);
  for (double& x : v) x = rng.normal(0.0, scale);
  return entroshape::ErrorSet(d, std::move(v));
}

}  // namespace oracle
