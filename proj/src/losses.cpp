#include "entroshape/losses.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "entroshape/error.hpp"
#include "entroshape/kernel.hpp"

namespace entroshape {

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::TMEE: return "TMEE";
    case Variant::CW_TMEE: return "CW_TMEE";
    case Variant::EW_TMEE: return "EW_TMEE";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  std::string upper = name;
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (upper == "TMEE") return Variant::TMEE;
  if (upper == "CW_TMEE") return Variant::CW_TMEE;
  if (upper == "EW_TMEE") return Variant::EW_TMEE;
  throw ConfigError("unknown loss variant '" + name + "'");
}

void LossConfig::validate() const {
  require_bandwidth(sigma, "sigma");
  require_bandwidth(sigma_w, "sigma_w");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be >= 0");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0))
    throw ConfigError("warmup_fraction must lie in [0, 1)");
}

double mse_loss(const ErrorSet& errors) {
  errors.require_nonempty_finite();
  double sum = 0.0;
  for (double v : errors.values()) sum += v * v;
  return sum / static_cast<double>(errors.size());
}

double tmee_loss(const ErrorSet& errors, double sigma, const EvalOptions& options) {
  const double n2 = static_cast<double>(errors.size()) * static_cast<double>(errors.size());
  const double deficit = potential_deficit(errors, sigma, options);
  // -log(Z/N^2) = -log1p(-(N^2 - Z)/N^2)
  return -std::log1p(-deficit / n2);
}

WeightVector chunk_weights(const ErrorSet& errors, double sigma_w) {
  require_bandwidth(sigma_w, "sigma_w");
  errors.require_nonempty_finite();
  const std::size_t n = errors.size();
  const double scale = 1.0 / (2.0 * sigma_w * sigma_w);
  std::vector<double> logits(n);
  for (std::size_t i = 0; i < n; ++i) {
    double norm2 = 0.0;
    for (double v : errors.sample(i)) norm2 += v * v;
    logits[i] = -norm2 * scale;
  }
  const double shift = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& l : logits) {
    l = std::exp(l - shift);
    total += l;
  }
  for (double& l : logits) l /= total;
  return {std::move(logits)};
}

double weighted_tmee_loss(const ErrorSet& errors, const LossConfig& config,
                          const EvalOptions& options) {
  config.validate();
  if (config.variant == Variant::TMEE)
    throw ConfigError("weighted_tmee_loss needs CW_TMEE or EW_TMEE; use tmee_loss for TMEE");
  const auto weights = chunk_weights(errors, config.sigma_w);
  const auto& w = weights.w;
  const std::size_t n = errors.size();
  const double scale = 1.0 / (2.0 * config.sigma * config.sigma);
  const PairwiseDistances dist(errors);

  // Both schemes are written as (sum of omega) - (sum of omega * (1 - k)) so
  // the collapse limit is exact.
  std::vector<double> rows(n, 0.0);
  const bool elementwise = config.variant == Variant::EW_TMEE;
  parallel_for(n, options.threads, [&](std::size_t i) {
    double s = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double m = gaussian_kernel(dist(i, j) * scale).complement;
      s += elementwise ? 2.0 * w[i] * w[j] * m : (w[i] + w[j]) * m;
    }
    rows[i] = s;
  });
  double deficit = 0.0;
  for (double r : rows) deficit += r;

  if (elementwise) {
    // sum_ij w_i w_j = 1
    return -std::log1p(-deficit);
  }
  // sum_ij w_i / N^2 = 1/N, so -log S = log N - log1p(-deficit / N)
  const double nd = static_cast<double>(n);
  return std::log(nd) - std::log1p(-deficit / nd);
}

double entropy_loss(const ErrorSet& errors, const LossConfig& config,
                    const EvalOptions& options) {
  if (config.variant == Variant::TMEE) return tmee_loss(errors, config.sigma, options);
  return weighted_tmee_loss(errors, config, options);
}

std::uint64_t entropy_activation_step(double warmup_fraction, std::uint64_t total_steps) {
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0))
    throw ConfigError("warmup_fraction must lie in [0, 1)");
  const double boundary = warmup_fraction * static_cast<double>(total_steps);
  // 1/3 * 30000 is not exact in binary; absorb the representation error.
  return static_cast<std::uint64_t>(std::ceil(boundary - 1e-9));
}

LossBreakdown total_loss(const ErrorSet& errors, const LossConfig& config, std::uint64_t step,
                         std::uint64_t total_steps, const EvalOptions& options) {
  config.validate();
  if (total_steps == 0) throw ConfigError("total_steps must be positive");
  if (step >= total_steps) throw ConfigError("step must be < total_steps");
  LossBreakdown out;
  out.mse = mse_loss(errors);
  out.entropy_active = step >= entropy_activation_step(config.warmup_fraction, total_steps);
  if (out.entropy_active && config.alpha > 0.0) out.entropy = entropy_loss(errors, config, options);
  out.total = out.mse + (out.entropy_active ? config.alpha * out.entropy : 0.0);
  return out;
}

}  // namespace entroshape
