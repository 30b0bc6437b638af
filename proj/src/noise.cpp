#include "entroshape/noise.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

#include "entroshape/error.hpp"
#include "entroshape/rng.hpp"

namespace entroshape {

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::NONE: return "NONE";
    case NoiseKind::CAUCHY: return "CAUCHY";
    case NoiseKind::IMPULSE: return "IMPULSE";
  }
  return "unknown";
}

NoiseKind parse_noise_kind(const std::string& name) {
  std::string upper = name;
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (upper == "NONE") return NoiseKind::NONE;
  if (upper == "CAUCHY") return NoiseKind::CAUCHY;
  if (upper == "IMPULSE") return NoiseKind::IMPULSE;
  throw ConfigError("unknown noise kind '" + name + "'");
}

void NoiseSpec::validate() const {
  if (!(truncation_bound > 0.0)) throw ConfigError("truncation_bound must be positive");
  if (kind == NoiseKind::CAUCHY && !(gamma > 0.0 && std::isfinite(gamma)))
    throw ConfigError("Cauchy gamma must be positive");
  if (kind == NoiseKind::IMPULSE) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("impulse probability must lie in [0, 1]");
    if (!(impulse_std >= 0.0 && std::isfinite(impulse_std)))
      throw ConfigError("impulse_std must be >= 0");
  }
}

std::vector<double> corrupt_actions(std::span<const double> actions, const NoiseSpec& spec) {
  spec.validate();
  for (double a : actions)
    if (!std::isfinite(a)) throw InputError("actions must be finite");
  std::vector<double> out(actions.begin(), actions.end());
  Rng rng(spec.seed);
  switch (spec.kind) {
    case NoiseKind::NONE:
      break;
    case NoiseKind::CAUCHY:
      for (double& a : out) {
        const double eps = spec.gamma * std::tan(std::numbers::pi * (rng.uniform_open() - 0.5));
        a += std::clamp(eps, -spec.truncation_bound, spec.truncation_bound);
      }
      break;
    case NoiseKind::IMPULSE:
      for (double& a : out) {
        // Draw the mask for every element so the stream layout is independent of p.
        const bool hit = rng.bernoulli(spec.p);
        const double delta = rng.normal(0.0, spec.impulse_std);
        if (hit) a += delta;
      }
      break;
  }
  return out;
}

}  // namespace entroshape
