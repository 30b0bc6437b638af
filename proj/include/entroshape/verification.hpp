#pragma once

#include <cstdint>
#include <vector>

#include "entroshape/error_set.hpp"
#include "entroshape/gradients.hpp"
#include "entroshape/losses.hpp"

namespace entroshape {

/// Grid for the analytic-vs-finite-difference gradient suite.
struct GradCheckSettings {
  std::size_t instances = 100;  // per variant
  std::size_t max_samples = 64;
  std::size_t max_dim = 8;
  std::vector<double> sigmas = {0.5, 1.0, 2.0};
  std::vector<Variant> variants = {Variant::TMEE, Variant::CW_TMEE, Variant::EW_TMEE};
  double h = kDefaultFiniteDifferenceStep;
  double tolerance = 1e-6;           // plain estimator
  double weighted_tolerance = 1e-5;  // Cw / Ew
  /// Cw / Ew use a 4th-order stencil with this step; the weights make
  /// saturated instances common and a 2-point stencil at h = 1e-6 cannot
  /// resolve their gradients against an O(1) loss.
  double weighted_h = 1e-3;
  std::size_t weighted_max_samples = 16;
  /// Test fixture: flips the analytic gradient sign to exercise the failure path.
  bool inject_sign_error = false;
};

struct GradCheckCase {
  Variant variant = Variant::TMEE;
  std::size_t instance = 0;
  double sigma = 0.0;
  double relative_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  ErrorSet errors;
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;
  bool all_passed = true;
  double max_relative_error = 0.0;
};

/// Random instances: N in [2, max], D in [1, max_dim], sigma cycling through
/// `sigmas`, entries ~ N(0, s^2) with s drawn in [0.25, 1] * sigma.
/// Throws ConfigError on an empty grid.
GradCheckReport run_grad_check(const GradCheckSettings& settings, std::uint64_t seed);

}  // namespace entroshape
