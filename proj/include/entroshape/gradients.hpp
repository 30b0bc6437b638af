#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "entroshape/error_set.hpp"
#include "entroshape/losses.hpp"
#include "entroshape/parallel.hpp"

namespace entroshape {

/// Per-sample gradients dL/de_i aligned with the source ErrorSet.
struct GradientField {
  std::size_t dim = 0;
  std::vector<double> values;  // N * dim, row-major
  double loss_value = 0.0;

  GradientField() = default;
  GradientField(std::size_t n, std::size_t d) : dim(d), values(n * d, 0.0) {}

  std::size_t size() const { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const double> at(std::size_t i) const { return {values.data() + i * dim, dim}; }
  std::span<double> at(std::size_t i) { return {values.data() + i * dim, dim}; }

  GradientField& operator*=(double s) {
    for (double& v : values) v *= s;
    loss_value *= s;
    return *this;
  }
  /// Adds `other` (same shape) scaled by `s`, loss included.
  void add_scaled(const GradientField& other, double s);
  double norm() const;
};

GradientField mse_gradient(const ErrorSet& errors);

/// dL/de_i = (2 / (sigma^2 Z)) sum_j k_ij (e_i - e_j). The negated value is
/// the pull of e_i toward every other error, weighted by similarity.
GradientField tmee_gradient(const ErrorSet& errors, double sigma,
                            const EvalOptions& options = {});

/// Exact gradient of the Cw/Ew estimators, including the dependence of the
/// importance weights w_i on e_i.
GradientField weighted_tmee_gradient(const ErrorSet& errors, const LossConfig& config,
                                     const EvalOptions& options = {});

/// Gradient of the active entropy variant (unscaled by alpha).
GradientField entropy_gradient(const ErrorSet& errors, const LossConfig& config,
                               const EvalOptions& options = {});

/// Gradient of total_loss at `step`; entropy contributes nothing during warmup.
GradientField total_gradient(const ErrorSet& errors, const LossConfig& config,
                             std::uint64_t step, std::uint64_t total_steps,
                             const EvalOptions& options = {});

using ScalarLoss = std::function<double(const ErrorSet&)>;

inline constexpr double kDefaultFiniteDifferenceStep = 1e-6;

enum class FdStencil {
  CENTRAL_2,  // (L(e + h) - L(e - h)) / 2h
  CENTRAL_4,  // (-L(e + 2h) + 8L(e + h) - 8L(e - h) + L(e - 2h)) / 12h
};

/// Finite-difference gradient, one coordinate at a time.
GradientField finite_difference_oracle(const ScalarLoss& loss, const ErrorSet& errors,
                                       double h = kDefaultFiniteDifferenceStep,
                                       FdStencil stencil = FdStencil::CENTRAL_2);

/// Frobenius-norm relative error |a - b| / max(|b|, floor).
double relative_error(std::span<const double> a, std::span<const double> b,
                      double floor = 1e-12);

/// Adds (d yhat_i / d theta)^T g_i into `param_grad` for sample i.
using SampleAdjoint =
    std::function<void(std::size_t i, std::span<const double> g_i, std::span<double> param_grad)>;

/// sum_i (d yhat_i / d theta)^T g_i. Since e_i = yhat_i - y_i the error
/// Jacobian is the identity, so the adjoint acts on g_i directly.
std::vector<double> chain_to_parameters(const GradientField& grad, std::size_t output_dim,
                                        std::size_t param_count, const SampleAdjoint& adjoint);

struct InfluencePoint {
  double c = 0.0;
  double tmee_grad_norm = 0.0;
  double mse_grad_norm = 0.0;
  double envelope = 0.0;  // c * exp(-c^2 / 2)
};

/// Tight cluster of `count` samples in a ball of radius 0.01 sigma about the origin.
ErrorSet make_influence_bulk(std::size_t dim, double sigma, std::uint64_t seed,
                             std::size_t count = 16);

/// Appends one outlier at c * sigma along the first axis from the bulk
/// centroid and reports both gradient norms at the outlier, per c.
std::vector<InfluencePoint> influence_curve(const ErrorSet& bulk,
                                            const std::vector<double>& distance_multiples,
                                            double sigma);

}  // namespace entroshape
