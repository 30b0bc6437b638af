#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace entroshape {

enum class NoiseKind { NONE, CAUCHY, IMPULSE };

std::string to_string(NoiseKind kind);
NoiseKind parse_noise_kind(const std::string& name);

/// Action-level corruption model.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::NONE;
  double gamma = 0.02;            // Cauchy scale
  double p = 0.05;                // per-element impulse probability
  double impulse_std = 1.0;       // std of the zero-mean Gaussian impulse
  double truncation_bound = 1.0;  // Cauchy draws are clipped to +-bound
  std::uint64_t seed = 0;

  void validate() const;
};

/// Returns actions + noise. Deterministic in spec.seed.
///
/// Cauchy: eps = gamma * tan(pi (u - 1/2)) clipped to +-truncation_bound.
/// Impulse: each element independently gets N(0, impulse_std^2) added with
/// probability p.
std::vector<double> corrupt_actions(std::span<const double> actions, const NoiseSpec& spec);

}  // namespace entroshape
