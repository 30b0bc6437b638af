#include "entroshape/gradients.hpp"

#include <cmath>

#include "entroshape/error.hpp"
#include "entroshape/kernel.hpp"
#include "entroshape/rng.hpp"

namespace entroshape {

void GradientField::add_scaled(const GradientField& other, double s) {
  if (other.dim != dim || other.values.size() != values.size())
    throw InputError("gradient fields have different shapes");
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += s * other.values[i];
  loss_value += s * other.loss_value;
}

double GradientField::norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

GradientField mse_gradient(const ErrorSet& errors) {
  errors.require_nonempty_finite();
  GradientField g(errors.size(), errors.dim());
  const double scale = 2.0 / static_cast<double>(errors.size());
  for (std::size_t i = 0; i < errors.values().size(); ++i)
    g.values[i] = scale * errors.values()[i];
  g.loss_value = mse_loss(errors);
  return g;
}

namespace {

// out_i = sum_j coeff(i, j) * k_ij * (e_i - e_j), one row per task, fixed j order.
template <typename Coeff>
void accumulate_pull(const ErrorSet& errors, const KernelMatrix& k, const EvalOptions& options,
                     Coeff coeff, GradientField& out) {
  const std::size_t n = errors.size();
  const std::size_t dim = errors.dim();
  parallel_for(n, options.threads, [&](std::size_t i) {
    const auto ei = errors.sample(i);
    auto gi = out.at(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double c = coeff(i, j) * k(i, j);
      if (c == 0.0) continue;
      const auto ej = errors.sample(j);
      for (std::size_t d = 0; d < dim; ++d) gi[d] += c * (ei[d] - ej[d]);
    }
  });
}

}  // namespace

GradientField tmee_gradient(const ErrorSet& errors, double sigma, const EvalOptions& options) {
  double deficit = 0.0;
  const KernelMatrix k = pairwise_kernel(errors, sigma, options, deficit);
  const double n2 = static_cast<double>(errors.size()) * static_cast<double>(errors.size());
  const double z = n2 - deficit;
  GradientField g(errors.size(), errors.dim());
  const double scale = 2.0 / (sigma * sigma * z);
  accumulate_pull(errors, k, options, [scale](std::size_t, std::size_t) { return scale; }, g);
  g.loss_value = -std::log1p(-deficit / n2);
  return g;
}

GradientField weighted_tmee_gradient(const ErrorSet& errors, const LossConfig& config,
                                     const EvalOptions& options) {
  const double loss = weighted_tmee_loss(errors, config, options);  // validates
  const auto w = chunk_weights(errors, config.sigma_w).w;
  const KernelMatrix k = pairwise_kernel(errors, config.sigma, options);
  const std::size_t n = errors.size();
  const std::size_t dim = errors.dim();
  const double nd = static_cast<double>(n);
  const double inv_s2 = 1.0 / (config.sigma * config.sigma);
  const double inv_sw2 = 1.0 / (config.sigma_w * config.sigma_w);

  // S = sum_ij omega_ij k_ij, and t_m - S where t_m is (Kw)_m for Ew and
  // r_m / N^2 for Cw. With sum w = 1 both t_m and S sit near 1 (or 1/N), so
  // t_m - S is formed from complements: with D_m = sum_j v_j (1 - k_mj),
  // t_m - S = (sum_i w_i D_i - D_m) * scale, v = w, scale = 1 for Ew and
  // v = 1, scale = 1/N^2 for Cw.
  const bool elementwise = config.variant == Variant::EW_TMEE;
  const PairwiseDistances dist(errors);
  const double inv_2s2 = 0.5 * inv_s2;
  std::vector<double> spread(n, 0.0);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = k.row(i);
    double acc = 0.0;
    double d = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = elementwise ? w[j] : 1.0;
      acc += row[j] * v;
      if (j != i) d += v * gaussian_kernel(dist(i, j) * inv_2s2).complement;
    }
    s += w[i] * (elementwise ? acc : acc / (nd * nd));
    spread[i] = d;
  }
  double mean_spread = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean_spread += w[i] * spread[i];
  std::vector<double> weight_term(n);
  const double scale = elementwise ? 1.0 : 1.0 / (nd * nd);
  for (std::size_t i = 0; i < n; ++i) weight_term[i] = (mean_spread - spread[i]) * scale;

  // dS/de_m = -(c_w w_m / sigma_w^2)(t_m - S) e_m - pull_m, where c_w = 2 for
  // Ew (w enters twice) and 1 for Cw, and pull_m is the kernel part.
  GradientField g(n, dim);
  if (elementwise) {
    accumulate_pull(errors, k, options,
                    [&](std::size_t i, std::size_t j) { return 2.0 * inv_s2 * w[i] * w[j]; }, g);
  } else {
    const double c = inv_s2 / (nd * nd);
    accumulate_pull(errors, k, options,
                    [&](std::size_t i, std::size_t j) { return c * (w[i] + w[j]); }, g);
  }
  const double weight_factor = elementwise ? 2.0 : 1.0;
  for (std::size_t m = 0; m < n; ++m) {
    const double a = weight_factor * w[m] * inv_sw2 * weight_term[m];
    const auto em = errors.sample(m);
    auto gm = g.at(m);
    // g currently holds pull_m = -(kernel part of dS/de_m); L = -log S.
    for (std::size_t d = 0; d < dim; ++d) gm[d] = (gm[d] + a * em[d]) / s;
  }
  g.loss_value = loss;
  return g;
}

GradientField entropy_gradient(const ErrorSet& errors, const LossConfig& config,
                               const EvalOptions& options) {
  if (config.variant == Variant::TMEE) return tmee_gradient(errors, config.sigma, options);
  return weighted_tmee_gradient(errors, config, options);
}

GradientField total_gradient(const ErrorSet& errors, const LossConfig& config,
                             std::uint64_t step, std::uint64_t total_steps,
                             const EvalOptions& options) {
  config.validate();
  if (total_steps == 0 || step >= total_steps) throw ConfigError("step must be < total_steps");
  GradientField g = mse_gradient(errors);
  if (config.alpha > 0.0 &&
      step >= entropy_activation_step(config.warmup_fraction, total_steps))
    g.add_scaled(entropy_gradient(errors, config, options), config.alpha);
  return g;
}

GradientField finite_difference_oracle(const ScalarLoss& loss, const ErrorSet& errors, double h,
                                       FdStencil stencil) {
  if (!(h > 0.0)) throw ConfigError("finite-difference step must be positive");
  GradientField g(errors.size(), errors.dim());
  ErrorSet probe = errors;
  for (std::size_t idx = 0; idx < probe.values().size(); ++idx) {
    const double original = probe.values()[idx];
    auto at = [&](double offset) {
      probe.values()[idx] = original + offset;
      return loss(probe);
    };
    if (stencil == FdStencil::CENTRAL_2) {
      g.values[idx] = (at(h) - at(-h)) / (2.0 * h);
    } else {
      g.values[idx] = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
    }
    probe.values()[idx] = original;
  }
  g.loss_value = loss(errors);
  return g;
}

double relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  if (a.size() != b.size()) throw InputError("relative_error: size mismatch");
  double diff = 0.0;
  double ref = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    ref += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(ref), floor);
}

std::vector<double> chain_to_parameters(const GradientField& grad, std::size_t output_dim,
                                        std::size_t param_count, const SampleAdjoint& adjoint) {
  if (grad.dim != output_dim)
    throw InputError("gradient dimension does not match the policy output dimension");
  std::vector<double> param_grad(param_count, 0.0);
  for (std::size_t i = 0; i < grad.size(); ++i) adjoint(i, grad.at(i), param_grad);
  return param_grad;
}

ErrorSet make_influence_bulk(std::size_t dim, double sigma, std::uint64_t seed,
                             std::size_t count) {
  if (dim == 0 || count == 0) throw InputError("bulk needs dim >= 1 and count >= 1");
  require_bandwidth(sigma);
  Rng rng(seed);
  std::vector<double> values(dim * count);
  for (std::size_t i = 0; i < count; ++i)
    rng.in_ball(std::span<double>(values.data() + i * dim, dim), 0.01 * sigma);
  return ErrorSet(dim, std::move(values));
}

std::vector<InfluencePoint> influence_curve(const ErrorSet& bulk,
                                            const std::vector<double>& distance_multiples,
                                            double sigma) {
  require_bandwidth(sigma);
  bulk.require_nonempty_finite();
  const std::size_t n = bulk.size();
  const std::size_t dim = bulk.dim();
  std::vector<double> centroid(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < dim; ++d) centroid[d] += bulk.sample(i)[d] / static_cast<double>(n);

  std::vector<InfluencePoint> curve;
  curve.reserve(distance_multiples.size());
  for (double c : distance_multiples) {
    if (!(c > 0.0)) throw ConfigError("outlier distance multiples must be positive");
    std::vector<double> values = bulk.values();
    std::vector<double> outlier = centroid;
    outlier[0] += c * sigma;
    values.insert(values.end(), outlier.begin(), outlier.end());
    const ErrorSet with_outlier(dim, std::move(values));

    const auto g_tmee = tmee_gradient(with_outlier, sigma);
    const auto g_mse = mse_gradient(with_outlier);
    auto norm_at = [](std::span<const double> v) {
      double s = 0.0;
      for (double x : v) s += x * x;
      return std::sqrt(s);
    };
    curve.push_back({c, norm_at(g_tmee.at(n)), norm_at(g_mse.at(n)),
                     c * std::exp(-0.5 * c * c)});
  }
  return curve;
}

}  // namespace entroshape
