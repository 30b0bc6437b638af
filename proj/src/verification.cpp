#include "entroshape/verification.hpp"

#include <algorithm>

#include "entroshape/error.hpp"
#include "entroshape/rng.hpp"

namespace entroshape {

GradCheckReport run_grad_check(const GradCheckSettings& settings, std::uint64_t seed) {
  if (settings.instances == 0 || settings.sigmas.empty() || settings.variants.empty())
    throw ConfigError("gradient check grid is empty");
  if (settings.max_samples < 2 || settings.weighted_max_samples < 2 || settings.max_dim < 1)
    throw ConfigError("gradient check needs at least two samples and one dimension");

  Rng rng(seed);
  GradCheckReport report;
  for (const Variant variant : settings.variants) {
    const bool weighted = variant != Variant::TMEE;
    const std::size_t max_n = weighted ? settings.weighted_max_samples : settings.max_samples;
    for (std::size_t inst = 0; inst < settings.instances; ++inst) {
      const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(max_n - 1));
      const std::size_t d = 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(settings.max_dim));
      LossConfig config;
      config.variant = variant;
      config.sigma = settings.sigmas[inst % settings.sigmas.size()];
      const double spread = config.sigma * rng.uniform(0.25, 1.0);
      std::vector<double> values(n * d);
      for (double& v : values) v = rng.normal(0.0, spread);
      ErrorSet errors(d, std::move(values));

      GradientField analytic = entropy_gradient(errors, config);
      if (settings.inject_sign_error) analytic *= -1.0;
      const GradientField fd = finite_difference_oracle(
          [&](const ErrorSet& e) { return entropy_loss(e, config); }, errors,
          weighted ? settings.weighted_h : settings.h,
          weighted ? FdStencil::CENTRAL_4 : FdStencil::CENTRAL_2);

      GradCheckCase c;
      c.variant = variant;
      c.instance = inst;
      c.sigma = config.sigma;
      c.relative_error = relative_error(analytic.values, fd.values);
      c.tolerance = weighted ? settings.weighted_tolerance : settings.tolerance;
      c.passed = c.relative_error <= c.tolerance;
      c.errors = std::move(errors);
      report.all_passed = report.all_passed && c.passed;
      report.max_relative_error = std::max(report.max_relative_error, c.relative_error);
      report.cases.push_back(std::move(c));
    }
  }
  return report;
}

}  // namespace entroshape
