#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "entroshape/analysis.hpp"
#include "entroshape/error_set.hpp"
#include "entroshape/gradients.hpp"
#include "entroshape/kernel.hpp"
#include "entroshape/losses.hpp"
#include "entroshape/noise.hpp"
#include "entroshape/parallel.hpp"

namespace entroshape {

/// Synthetic expert demonstrations.
///
/// observations: B x T x obs_dim; target_actions: B x T x K x D (clean);
/// task_labels: one per trajectory.
struct TrajectoryBatch {
  BatchShape shape;
  std::size_t obs_dim = 0;
  std::vector<double> observations;
  std::vector<double> target_actions;
  std::vector<Task> task_labels;

  std::size_t steps() const { return shape.trajectories * shape.horizon; }
  std::span<const double> observation(std::size_t bt) const {
    return {observations.data() + bt * obs_dim, obs_dim};
  }
  /// Throws InputError on inconsistent shapes or non-finite values.
  void validate() const;
};

enum class GeneratorKind {
  SINUSOID,    // actions track a smooth function of the observed phase
  REACH_HOLD,  // move toward a per-trajectory goal, then hold it
  PAIRED,      // tasks A/B, A = B + delta_task * (unrepresentable 2nd harmonic)
};

std::string to_string(GeneratorKind kind);
GeneratorKind parse_generator(const std::string& name);

struct TaskRecipe {
  GeneratorKind generator = GeneratorKind::SINUSOID;
  std::size_t trajectories = 8;    // SINUSOID / REACH_HOLD
  std::size_t trajectories_a = 4;  // PAIRED majority
  std::size_t trajectories_b = 4;  // PAIRED minority
  std::size_t horizon = 16;
  std::size_t chunk = 4;
  std::size_t action_dim = 2;
  double delta_task = 0.0;

  void validate() const;
};

/// Deterministic in `seed`.
TrajectoryBatch generate_tasks(const TaskRecipe& recipe, std::uint64_t seed);

enum class Architecture { LINEAR, MLP2 };

std::string to_string(Architecture arch);
Architecture parse_architecture(const std::string& name);

/// Chunked action policy x -> yhat in R^{K*D}.
///
/// LINEAR: yhat = W x + b. MLP2: yhat = W2 tanh(W1 x + b1) + b2 with one
/// hidden layer of `hidden` units.
class Policy {
 public:
  static constexpr std::size_t kDefaultHidden = 32;

  Policy(Architecture arch, std::size_t input_dim, std::size_t output_dim,
         std::size_t hidden = kDefaultHidden);

  /// Zeros for LINEAR; scaled Gaussian first layer and zero output layer for MLP2.
  static Policy initialized(Architecture arch, std::size_t input_dim, std::size_t output_dim,
                            std::uint64_t seed, std::size_t hidden = kDefaultHidden);

  Architecture architecture() const { return arch_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return output_dim_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t parameter_count() const { return params_.size(); }
  static std::size_t parameter_count(Architecture arch, std::size_t input_dim,
                                     std::size_t output_dim, std::size_t hidden);

  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters() { return params_; }

  void predict(std::span<const double> x, std::span<double> y) const;

  /// param_grad += (d yhat / d theta)^T g_out at input x.
  void accumulate_adjoint(std::span<const double> x, std::span<const double> g_out,
                          std::span<double> param_grad) const;

 private:
  Architecture arch_;
  std::size_t input_dim_;
  std::size_t output_dim_;
  std::size_t hidden_;
  std::vector<double> params_;
};

struct TrainConfig {
  LossConfig loss;
  std::uint64_t steps = 5000;
  double learning_rate = 1e-2;
  std::size_t batch_size = 0;  // trajectories per step; 0 = full batch
  std::uint64_t seed = 0;
  NoiseSpec noise;             // applied to training targets only
  std::uint64_t snapshot_every = 250;
  std::uint64_t metrics_every = 1;
  std::uint64_t verify_every = 0;  // parameter-gradient FD spot checks; 0 = off
  EvalOptions eval;

  void validate() const;
};

/// Plain gradient-descent step size used when a config does not set one.
double default_learning_rate(Architecture arch);

struct MetricRow {
  std::uint64_t step = 0;
  double total = 0.0;
  double mse = 0.0;
  double entropy = 0.0;  // Renyi entropy of the current errors at loss.sigma
  double grad_norm = 0.0;
};

struct GradientCheck {
  std::uint64_t step = 0;
  double relative_error = 0.0;
};

struct ExperimentReport {
  std::vector<MetricRow> metrics;
  std::vector<Snapshot> snapshots;  // errors against training targets
  std::vector<GradientCheck> gradient_checks;
  std::uint64_t entropy_activation_step = 0;
  double clean_mse = 0.0;           // final MSE against clean targets
  double clean_mse_task_a = 0.0;
  double clean_mse_task_b = 0.0;
  bool diverged = false;
  std::string diagnostic;
};

struct TrainResult {
  Policy policy;
  ExperimentReport report;
};

/// Full errors of `policy` against the given targets, in (b, t, k) order.
ErrorSet compute_errors(const Policy& policy, const TrajectoryBatch& batch,
                        std::span<const double> targets);

/// Parameter gradient of the objective at `step` for the given errors.
std::vector<double> parameter_gradient(const Policy& policy, const TrajectoryBatch& batch,
                                       const ErrorSet& errors, const LossConfig& loss,
                                       std::uint64_t step, std::uint64_t total_steps,
                                       const EvalOptions& eval, double* loss_value = nullptr);

/// Gradient descent on the combined objective. Deterministic given config.
TrainResult train(const TrajectoryBatch& batch, Policy policy, const TrainConfig& config);

/// Per-task clean MSE (samples of one task only); NaN if the task is absent.
double task_mse(const ErrorSet& errors, const TrajectoryBatch& batch, Task task);

/// Sample-level partition built from per-trajectory labels.
TaskPartition sample_partition(const TrajectoryBatch& batch);

// ---------------------------------------------------------------------------
// Experiments

struct NoiseBenchConfig {
  TaskRecipe recipe;
  Architecture architecture = Architecture::LINEAR;
  TrainConfig train;  // loss.alpha is overridden per arm
  NoiseSpec noise;
  std::vector<double> alphas = {0.01, 0.1, 1.0};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
};

struct NoiseBenchRow {
  std::uint64_t seed = 0;
  double alpha = 0.0;  // 0 = MSE-only arm
  double clean_mse = 0.0;
  double final_entropy = 0.0;
};

struct NoiseBenchReport {
  std::vector<NoiseBenchRow> rows;
  double median_mse_only = 0.0;
  std::vector<double> median_with_entropy;  // aligned with config alphas
  bool any_alpha_improves = false;
};

NoiseBenchReport run_noise_bench(const NoiseBenchConfig& config);

struct ImbalanceConfig {
  TaskRecipe recipe;  // PAIRED; trajectories_b fixed, trajectories_a = ratio * b
  Architecture architecture = Architecture::LINEAR;
  TrainConfig train;
  std::vector<std::size_t> ratios = {4, 10, 40};
  std::vector<double> deltas = {1.0, 100.0};  // error-space overlap levels
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
};

struct ImbalanceSeedResult {
  std::uint64_t seed = 0;
  double minority_mse = 0.0;
  double balanced_minority_mse = 0.0;
  double coupling_ratio = 0.0;  // R_B on the mid-training snapshot
  double k_bar_ab = 0.0;
  double k_bar_bb = 0.0;
};

struct ImbalanceCell {
  std::size_t ratio = 1;
  double delta_task = 0.0;
  std::vector<ImbalanceSeedResult> seeds;
  double mean_coupling_ratio = 0.0;
  double mean_minority_mse = 0.0;
  double mean_balanced_minority_mse = 0.0;
  double minority_signal_power = 0.0;  // mean |a|^2 over minority targets
  double mean_delta = 0.0;  // minority - balanced, paired
  double t_statistic = 0.0;
  bool significant_degradation = false;
};

/// Paired degradation test: mean delta > 0, t beyond the two-sided 95%
/// critical value for n-1 degrees of freedom, and the mean delta larger than
/// `min_relative_effect * reference_scale` (a practical-significance floor;
/// the sweep uses the minority task's mean squared target).
struct PairedTest {
  double mean = 0.0;
  double stddev = 0.0;
  double t = 0.0;
  bool significant = false;
};
PairedTest paired_degradation_test(const std::vector<double>& deltas, double reference_scale,
                                   double min_relative_effect = 1e-3);

std::vector<ImbalanceCell> run_imbalance_sweep(const ImbalanceConfig& config);

}  // namespace entroshape
