#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "entroshape/error_set.hpp"
#include "entroshape/parallel.hpp"

namespace entroshape {

/// Symmetric N x N matrix of Gaussian similarities k_ij in (0, 1].
class KernelMatrix {
 public:
  KernelMatrix(std::size_t n, double sigma) : n_(n), sigma_(sigma), entries_(n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double sigma() const { return sigma_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return entries_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const { return {entries_.data() + i * n_, n_}; }
  const std::vector<double>& entries() const { return entries_; }

 private:
  std::size_t n_;
  double sigma_;
  std::vector<double> entries_;
};

/// Squared Euclidean distances between samples of one ErrorSet.
///
/// Low-dimensional sets use explicit differences. Above
/// `kFactorizedMinDim` dimensions the distance is assembled from cached
/// squared norms and a dot product, clamped at zero.
class PairwiseDistances {
 public:
  static constexpr std::size_t kFactorizedMinDim = 32;

  explicit PairwiseDistances(const ErrorSet& errors);
  double operator()(std::size_t i, std::size_t j) const;

 private:
  const ErrorSet& errors_;
  bool factorized_;
  std::vector<double> norms_;
};

/// Throws ConfigError unless sigma is finite and positive.
void require_bandwidth(double sigma, const char* name = "sigma");

/// k_ij = exp(-|e_i - e_j|^2 / (2 sigma^2)) for every pair, unit diagonal.
KernelMatrix pairwise_kernel(const ErrorSet& errors, double sigma,
                             const EvalOptions& options = {});

/// pairwise_kernel that also returns N^2 - Z (see potential_deficit) from the
/// same pass.
KernelMatrix pairwise_kernel(const ErrorSet& errors, double sigma, const EvalOptions& options,
                             double& deficit);

/// Z = sum_i sum_j k_ij, diagonal included, so N <= Z <= N^2.
double information_potential(const ErrorSet& errors, double sigma,
                             const EvalOptions& options = {});

/// N^2 - Z, accumulated as sum of (1 - k_ij) so that nearly collapsed sets
/// keep full relative precision.
double potential_deficit(const ErrorSet& errors, double sigma, const EvalOptions& options = {});

/// Gaussian kernel value k = exp(-x) together with its complement 1 - k,
/// each evaluated in the branch where it does not cancel.
struct KernelValue {
  double value;
  double complement;
};
KernelValue gaussian_kernel(double scaled_sq_distance);

/// Batch dimensions of an action-error tensor.
struct BatchShape {
  std::size_t trajectories = 0;  // B
  std::size_t horizon = 0;       // T
  std::size_t chunk = 0;         // K
  std::size_t dim = 0;           // D

  std::size_t samples() const { return trajectories * horizon * chunk; }
};

/// Flattens a contiguous B x T x K x D tensor in row-major (b, t, k) order,
/// recording provenance for each sample.
ErrorSet flatten_batch(std::span<const double> values, const BatchShape& shape);

/// Nested-vector overload; rejects ragged input.
ErrorSet flatten_batch(
    const std::vector<std::vector<std::vector<std::vector<double>>>>& batch_errors);

}  // namespace entroshape
