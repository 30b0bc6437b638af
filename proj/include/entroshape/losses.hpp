#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "entroshape/error_set.hpp"
#include "entroshape/parallel.hpp"

namespace entroshape {

/// Which entropy estimator fills the alpha-weighted slot of the objective.
enum class Variant {
  TMEE,     // unweighted trajectory-level estimator
  CW_TMEE,  // chunk-weighted: omega_ij = w_i / N^2
  EW_TMEE,  // element-weighted: omega_ij = w_i * w_j
};

std::string to_string(Variant variant);
/// Accepts "TMEE", "CW_TMEE", "EW_TMEE" (case-insensitive); throws ConfigError.
Variant parse_variant(const std::string& name);

struct LossConfig {
  double sigma = 0.5;
  double sigma_w = 0.5;
  double alpha = 0.1;
  Variant variant = Variant::TMEE;
  double warmup_fraction = 1.0 / 3.0;

  /// Throws ConfigError on any out-of-range field.
  void validate() const;
};

/// Recommended bandwidth range and alpha menu for the entropy term.
inline constexpr double kSigmaRangeLow = 0.5;
inline constexpr double kSigmaRangeHigh = 2.0;
inline constexpr double kAlphaMenu[] = {0.01, 0.1, 1.0};

/// Nonnegative importance weights summing to one.
struct WeightVector {
  std::vector<double> w;
};

/// (1/N) sum_i |e_i|^2
double mse_loss(const ErrorSet& errors);

/// -log(Z / N^2). Zero iff all samples coincide.
double tmee_loss(const ErrorSet& errors, double sigma, const EvalOptions& options = {});

/// Softmax of -|e_i|^2 / (2 sigma_w^2), max-shifted.
WeightVector chunk_weights(const ErrorSet& errors, double sigma_w);

/// Weighted estimator -log sum_ij omega_ij k_ij for CW_TMEE / EW_TMEE.
/// Ew is >= 0 and Cw is >= log N, with equality at total collapse.
double weighted_tmee_loss(const ErrorSet& errors, const LossConfig& config,
                          const EvalOptions& options = {});

/// Dispatches to tmee_loss or weighted_tmee_loss by config.variant.
double entropy_loss(const ErrorSet& errors, const LossConfig& config,
                    const EvalOptions& options = {});

/// First step at which the entropy term is switched on:
/// ceil(warmup_fraction * total_steps).
std::uint64_t entropy_activation_step(double warmup_fraction, std::uint64_t total_steps);

struct LossBreakdown {
  double total = 0.0;
  double mse = 0.0;
  double entropy = 0.0;  // unscaled entropy term; 0 while inactive
  bool entropy_active = false;
};

/// mse + alpha * entropy after warmup, mse alone before it (hard switch).
LossBreakdown total_loss(const ErrorSet& errors, const LossConfig& config, std::uint64_t step,
                         std::uint64_t total_steps, const EvalOptions& options = {});

}  // namespace entroshape
