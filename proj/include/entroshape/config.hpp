#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "entroshape/losses.hpp"
#include "entroshape/noise.hpp"
#include "entroshape/trainer.hpp"
#include "entroshape/verification.hpp"

namespace entroshape {

using json = nlohmann::json;

// Strict JSON mapping: every object rejects keys it does not know, and
// missing keys take the documented defaults. All throw ConfigError.

json to_json(const LossConfig& config);
LossConfig loss_config_from_json(const json& j);

json to_json(const NoiseSpec& spec);
NoiseSpec noise_spec_from_json(const json& j);

json to_json(const TaskRecipe& recipe);
TaskRecipe task_recipe_from_json(const json& j);

struct InfluenceSettings {
  double c_min = 0.1;
  double c_max = 10.0;
  std::size_t points = 100;
  std::size_t dim = 2;
  std::size_t bulk_size = 16;
};

struct PcaSettings {
  std::size_t components = 2;
  std::string input;  // error-set CSV or run directory (last snapshot)
  bool per_task = false;
};

/// Everything one CLI invocation needs; sections unused by a command keep
/// their defaults but are still validated.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir;
  LossConfig loss;
  TaskRecipe task;
  Architecture architecture = Architecture::LINEAR;
  std::size_t hidden = Policy::kDefaultHidden;
  TrainConfig train;  // train.loss / train.noise / train.seed mirror the fields above
  std::optional<double> learning_rate;  // unset = architecture default
  NoiseSpec noise;
  std::vector<double> noise_bench_alphas = {0.01, 0.1, 1.0};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::vector<std::size_t> imbalance_ratios = {4, 10, 40};
  std::vector<double> imbalance_deltas = {1.0, 100.0};
  GradCheckSettings grad_check;
  InfluenceSettings influence;
  PcaSettings pca;
  std::string run_dir;  // entropy-curve input

  void validate() const;
};

ExperimentConfig experiment_config_from_json(const json& j);
/// Fully resolved config, defaults included; the manifest hash is taken over this.
json to_json(const ExperimentConfig& config);

}  // namespace entroshape
