#include "entroshape/kernel.hpp"

#include <cmath>
#include <mutex>
#include <numeric>

#include "entroshape/error.hpp"

namespace entroshape {

PairwiseDistances::PairwiseDistances(const ErrorSet& errors)
    : errors_(errors), factorized_(errors.dim() >= kFactorizedMinDim) {
  if (!factorized_) return;
  norms_.resize(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) {
    const auto e = errors.sample(i);
    norms_[i] = std::inner_product(e.begin(), e.end(), e.begin(), 0.0);
  }
}

double PairwiseDistances::operator()(std::size_t i, std::size_t j) const {
  const auto a = errors_.sample(i);
  const auto b = errors_.sample(j);
  if (factorized_) {
    const double dot = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
    return std::max(0.0, norms_[i] + norms_[j] - 2.0 * dot);
  }
  double d2 = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    d2 += diff * diff;
  }
  return d2;
}

KernelValue gaussian_kernel(double x) {
  constexpr double kLn2 = 0.69314718055994530942;
  if (x < kLn2) {
    const double complement = -std::expm1(-x);
    return {1.0 - complement, complement};
  }
  const double value = std::exp(-x);
  return {value, 1.0 - value};
}

void require_bandwidth(double sigma, const char* name) {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw ConfigError(std::string(name) + " must be a positive finite bandwidth");
}

KernelMatrix pairwise_kernel(const ErrorSet& errors, double sigma, const EvalOptions& options,
                             double& deficit) {
  require_bandwidth(sigma);
  errors.require_nonempty_finite();
  const std::size_t n = errors.size();
  const double scale = 1.0 / (2.0 * sigma * sigma);
  const PairwiseDistances dist(errors);
  KernelMatrix k(n, sigma);
  std::vector<double> row_deficit(n, 0.0);
  // Each worker owns whole rows of the upper triangle; mirroring happens after
  // the join so both halves hold the identical double.
  parallel_for(n, options.threads, [&](std::size_t i) {
    k(i, i) = 1.0;
    double m = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const KernelValue kv = gaussian_kernel(dist(i, j) * scale);
      k(i, j) = kv.value;
      m += kv.complement;
    }
    row_deficit[i] = m;
  });
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) k(j, i) = k(i, j);
  deficit = 0.0;
  for (double m : row_deficit) deficit += m;
  deficit *= 2.0;
  return k;
}

KernelMatrix pairwise_kernel(const ErrorSet& errors, double sigma, const EvalOptions& options) {
  double unused = 0.0;
  return pairwise_kernel(errors, sigma, options, unused);
}

namespace {

// Sum over i < j of term(x_ij), x_ij = |e_i - e_j|^2 / (2 sigma^2).
template <typename Term>
double upper_triangle_sum(const ErrorSet& errors, double sigma, const EvalOptions& options,
                          Term term) {
  require_bandwidth(sigma);
  errors.require_nonempty_finite();
  const std::size_t n = errors.size();
  const double scale = 1.0 / (2.0 * sigma * sigma);
  const PairwiseDistances dist(errors);

  auto row_sum = [&](std::size_t i) {
    double s = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) s += term(dist(i, j) * scale);
    return s;
  };

  double total = 0.0;
  if (options.deterministic || options.threads <= 1) {
    std::vector<double> rows(n, 0.0);
    parallel_for(n, options.threads, [&](std::size_t i) { rows[i] = row_sum(i); });
    for (double r : rows) total += r;
  } else {
    std::mutex total_mutex;
    parallel_for(n, options.threads, [&](std::size_t i) {
      const double r = row_sum(i);
      std::lock_guard lock(total_mutex);
      total += r;
    });
  }
  return total;
}

}  // namespace

double information_potential(const ErrorSet& errors, double sigma, const EvalOptions& options) {
  const double off_diagonal = upper_triangle_sum(
      errors, sigma, options, [](double x) { return gaussian_kernel(x).value; });
  return static_cast<double>(errors.size()) + 2.0 * off_diagonal;
}

double potential_deficit(const ErrorSet& errors, double sigma, const EvalOptions& options) {
  return 2.0 * upper_triangle_sum(errors, sigma, options,
                                  [](double x) { return gaussian_kernel(x).complement; });
}

ErrorSet flatten_batch(std::span<const double> values, const BatchShape& shape) {
  if (shape.dim == 0) throw InputError("action dimension must be >= 1");
  if (shape.samples() == 0) throw InputError("batch must contain at least one sample");
  if (values.size() != shape.samples() * shape.dim)
    throw InputError("batch values do not match the declared B x T x K x D shape");
  std::vector<SampleIndex> provenance;
  provenance.reserve(shape.samples());
  for (std::size_t b = 0; b < shape.trajectories; ++b)
    for (std::size_t t = 0; t < shape.horizon; ++t)
      for (std::size_t k = 0; k < shape.chunk; ++k) provenance.push_back({b, t, k});
  return ErrorSet(shape.dim, std::vector<double>(values.begin(), values.end()),
                  std::move(provenance));
}

ErrorSet flatten_batch(
    const std::vector<std::vector<std::vector<std::vector<double>>>>& batch_errors) {
  BatchShape shape;
  shape.trajectories = batch_errors.size();
  if (shape.trajectories == 0) throw InputError("batch must contain at least one trajectory");
  shape.horizon = batch_errors.front().size();
  if (shape.horizon == 0) throw InputError("trajectory horizon must be >= 1");
  shape.chunk = batch_errors.front().front().size();
  if (shape.chunk == 0) throw InputError("chunk size must be >= 1");
  shape.dim = batch_errors.front().front().front().size();

  std::vector<double> values;
  values.reserve(shape.samples() * shape.dim);
  for (const auto& traj : batch_errors) {
    if (traj.size() != shape.horizon) throw InputError("ragged batch: horizon differs");
    for (const auto& step : traj) {
      if (step.size() != shape.chunk) throw InputError("ragged batch: chunk size differs");
      for (const auto& action : step) {
        if (action.size() != shape.dim) throw InputError("ragged batch: action dimension differs");
        values.insert(values.end(), action.begin(), action.end());
      }
    }
  }
  return flatten_batch(values, shape);
}

}  // namespace entroshape
