#include "entroshape/trainer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>

#include "entroshape/error.hpp"
#include "entroshape/rng.hpp"

namespace entroshape {

namespace {

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace

// ---------------------------------------------------------------------------
// Data

void TrajectoryBatch::validate() const {
  if (shape.dim == 0 || shape.samples() == 0 || obs_dim == 0)
    throw InputError("trajectory batch has an empty dimension");
  if (observations.size() != steps() * obs_dim)
    throw InputError("observation count does not match B x T x obs_dim");
  if (target_actions.size() != shape.samples() * shape.dim)
    throw InputError("target count does not match B x T x K x D");
  if (task_labels.size() != shape.trajectories)
    throw InputError("need one task label per trajectory");
  for (double v : observations)
    if (!std::isfinite(v)) throw InputError("observations must be finite");
  for (double v : target_actions)
    if (!std::isfinite(v)) throw InputError("target actions must be finite");
}

std::string to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::SINUSOID: return "SINUSOID";
    case GeneratorKind::REACH_HOLD: return "REACH_HOLD";
    case GeneratorKind::PAIRED: return "PAIRED";
  }
  return "unknown";
}

GeneratorKind parse_generator(const std::string& name) {
  const auto u = upper(name);
  if (u == "SINUSOID") return GeneratorKind::SINUSOID;
  if (u == "REACH_HOLD") return GeneratorKind::REACH_HOLD;
  if (u == "PAIRED") return GeneratorKind::PAIRED;
  throw ConfigError("unknown task generator '" + name + "'");
}

void TaskRecipe::validate() const {
  if (horizon == 0 || chunk == 0 || action_dim == 0)
    throw ConfigError("horizon, chunk and action_dim must be >= 1");
  if (generator == GeneratorKind::PAIRED) {
    if (trajectories_a == 0 || trajectories_b == 0)
      throw ConfigError("paired tasks need trajectories in both groups");
    // The harmonic offset is orthogonal to the phase features only on a grid
    // of at least four phases per trajectory.
    if (horizon < 4) throw ConfigError("paired tasks need horizon >= 4");
    if (!std::isfinite(delta_task) || delta_task < 0.0)
      throw ConfigError("delta_task must be finite and >= 0");
  } else if (trajectories == 0) {
    throw ConfigError("trajectories must be >= 1");
  }
}

namespace {

struct SinusoidBase {
  std::vector<double> amplitude, phase, offset;

  SinusoidBase(std::size_t dim, Rng& rng) {
    for (std::size_t d = 0; d < dim; ++d) {
      amplitude.push_back(rng.uniform(0.5, 1.0));
      phase.push_back(rng.uniform(0.0, kTwoPi));
      offset.push_back(rng.uniform(-0.2, 0.2));
    }
  }
  double operator()(std::size_t d, double theta) const {
    return offset[d] + amplitude[d] * std::sin(theta + phase[d]);
  }
};

}  // namespace

TrajectoryBatch generate_tasks(const TaskRecipe& recipe, std::uint64_t seed) {
  recipe.validate();
  Rng rng(seed);
  TrajectoryBatch batch;
  const std::size_t T = recipe.horizon;
  const std::size_t K = recipe.chunk;
  const std::size_t D = recipe.action_dim;
  batch.shape = {0, T, K, D};

  switch (recipe.generator) {
    case GeneratorKind::SINUSOID: {
      const std::size_t B = recipe.trajectories;
      batch.shape.trajectories = B;
      batch.obs_dim = 2;
      const SinusoidBase base(D, rng);
      for (std::size_t b = 0; b < B; ++b) {
        const double phi0 = rng.uniform(0.0, kTwoPi);
        for (std::size_t t = 0; t < T; ++t) {
          const double phi = phi0 + kTwoPi * static_cast<double>(t) / static_cast<double>(T);
          batch.observations.push_back(std::sin(phi));
          batch.observations.push_back(std::cos(phi));
          for (std::size_t k = 0; k < K; ++k) {
            const double theta = phi + kTwoPi * static_cast<double>(k) / static_cast<double>(T);
            for (std::size_t d = 0; d < D; ++d) batch.target_actions.push_back(base(d, theta));
          }
        }
        batch.task_labels.push_back(Task::A);
      }
      break;
    }
    case GeneratorKind::REACH_HOLD: {
      const std::size_t B = recipe.trajectories;
      batch.shape.trajectories = B;
      batch.obs_dim = D + 1;
      const double reach_steps = std::max(1.0, static_cast<double>(T) / 2.0);
      for (std::size_t b = 0; b < B; ++b) {
        std::vector<double> goal(D);
        for (double& g : goal) g = rng.uniform(-1.0, 1.0);
        for (std::size_t t = 0; t < T; ++t) {
          batch.observations.push_back(static_cast<double>(t) / static_cast<double>(T));
          batch.observations.insert(batch.observations.end(), goal.begin(), goal.end());
          for (std::size_t k = 0; k < K; ++k) {
            const double progress =
                std::min(1.0, static_cast<double>(t + k + 1) / reach_steps);
            for (std::size_t d = 0; d < D; ++d) batch.target_actions.push_back(goal[d] * progress);
          }
        }
        batch.task_labels.push_back(Task::A);
      }
      break;
    }
    case GeneratorKind::PAIRED: {
      const std::size_t B = recipe.trajectories_a + recipe.trajectories_b;
      batch.shape.trajectories = B;
      batch.obs_dim = 6;
      const SinusoidBase base(D, rng);
      for (std::size_t b = 0; b < B; ++b) {
        const Task task = b < recipe.trajectories_a ? Task::A : Task::B;
        const double phi0 = rng.uniform(0.0, kTwoPi);
        for (std::size_t t = 0; t < T; ++t) {
          const double phi = phi0 + kTwoPi * static_cast<double>(t) / static_cast<double>(T);
          // Task-gated phase features: each task gets its own linear read-out.
          const double gate_a = task == Task::A ? 1.0 : 0.0;
          const double gate_b = 1.0 - gate_a;
          for (double gate : {gate_a, gate_b}) {
            batch.observations.push_back(gate * std::sin(phi));
            batch.observations.push_back(gate * std::cos(phi));
            batch.observations.push_back(gate);
          }
          for (std::size_t k = 0; k < K; ++k) {
            const double theta = phi + kTwoPi * static_cast<double>(k) / static_cast<double>(T);
            for (std::size_t d = 0; d < D; ++d) {
              double a = base(d, theta);
              if (task == Task::A) {
                // Second harmonic: a unit ring in (d0, d1) that no linear
                // function of (sin, cos, 1) can reproduce.
                if (d == 0) a += recipe.delta_task * std::cos(2.0 * theta);
                if (d == 1) a += recipe.delta_task * std::sin(2.0 * theta);
              }
              batch.target_actions.push_back(a);
            }
          }
        }
        batch.task_labels.push_back(task);
      }
      break;
    }
  }
  batch.validate();
  return batch;
}

// ---------------------------------------------------------------------------
// Policy

std::string to_string(Architecture arch) {
  return arch == Architecture::LINEAR ? "LINEAR" : "MLP2";
}

Architecture parse_architecture(const std::string& name) {
  const auto u = upper(name);
  if (u == "LINEAR") return Architecture::LINEAR;
  if (u == "MLP2") return Architecture::MLP2;
  throw ConfigError("unknown policy architecture '" + name + "'");
}

std::size_t Policy::parameter_count(Architecture arch, std::size_t in, std::size_t out,
                                    std::size_t hidden) {
  if (arch == Architecture::LINEAR) return out * in + out;
  return hidden * in + hidden + out * hidden + out;
}

Policy::Policy(Architecture arch, std::size_t input_dim, std::size_t output_dim,
               std::size_t hidden)
    : arch_(arch),
      input_dim_(input_dim),
      output_dim_(output_dim),
      hidden_(arch == Architecture::LINEAR ? 0 : hidden),
      params_(parameter_count(arch, input_dim, output_dim, hidden), 0.0) {
  if (input_dim == 0 || output_dim == 0) throw ConfigError("policy dimensions must be >= 1");
  if (arch == Architecture::MLP2 && hidden == 0) throw ConfigError("MLP2 needs hidden >= 1");
}

Policy Policy::initialized(Architecture arch, std::size_t input_dim, std::size_t output_dim,
                           std::uint64_t seed, std::size_t hidden) {
  Policy p(arch, input_dim, output_dim, hidden);
  if (arch == Architecture::MLP2) {
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
    for (std::size_t i = 0; i < hidden * input_dim; ++i) p.params_[i] = rng.normal(0.0, scale);
  }
  return p;
}

void Policy::predict(std::span<const double> x, std::span<double> y) const {
  const double* w = params_.data();
  if (arch_ == Architecture::LINEAR) {
    const double* bias = w + output_dim_ * input_dim_;
    for (std::size_t o = 0; o < output_dim_; ++o) {
      double acc = bias[o];
      for (std::size_t i = 0; i < input_dim_; ++i) acc += w[o * input_dim_ + i] * x[i];
      y[o] = acc;
    }
    return;
  }
  const double* b1 = w + hidden_ * input_dim_;
  const double* w2 = b1 + hidden_;
  const double* b2 = w2 + output_dim_ * hidden_;
  std::vector<double> h(hidden_);
  for (std::size_t j = 0; j < hidden_; ++j) {
    double acc = b1[j];
    for (std::size_t i = 0; i < input_dim_; ++i) acc += w[j * input_dim_ + i] * x[i];
    h[j] = std::tanh(acc);
  }
  for (std::size_t o = 0; o < output_dim_; ++o) {
    double acc = b2[o];
    for (std::size_t j = 0; j < hidden_; ++j) acc += w2[o * hidden_ + j] * h[j];
    y[o] = acc;
  }
}

void Policy::accumulate_adjoint(std::span<const double> x, std::span<const double> g_out,
                                std::span<double> param_grad) const {
  if (param_grad.size() != params_.size() || g_out.size() != output_dim_ ||
      x.size() != input_dim_)
    throw InputError("policy adjoint received mismatched shapes");
  double* gw = param_grad.data();
  if (arch_ == Architecture::LINEAR) {
    double* gb = gw + output_dim_ * input_dim_;
    for (std::size_t o = 0; o < output_dim_; ++o) {
      for (std::size_t i = 0; i < input_dim_; ++i) gw[o * input_dim_ + i] += g_out[o] * x[i];
      gb[o] += g_out[o];
    }
    return;
  }
  const double* w = params_.data();
  const double* b1 = w + hidden_ * input_dim_;
  const double* w2 = b1 + hidden_;
  double* gb1 = gw + hidden_ * input_dim_;
  double* gw2 = gb1 + hidden_;
  double* gb2 = gw2 + output_dim_ * hidden_;
  std::vector<double> h(hidden_);
  for (std::size_t j = 0; j < hidden_; ++j) {
    double acc = b1[j];
    for (std::size_t i = 0; i < input_dim_; ++i) acc += w[j * input_dim_ + i] * x[i];
    h[j] = std::tanh(acc);
  }
  std::vector<double> gh(hidden_, 0.0);
  for (std::size_t o = 0; o < output_dim_; ++o) {
    gb2[o] += g_out[o];
    for (std::size_t j = 0; j < hidden_; ++j) {
      gw2[o * hidden_ + j] += g_out[o] * h[j];
      gh[j] += g_out[o] * w2[o * hidden_ + j];
    }
  }
  for (std::size_t j = 0; j < hidden_; ++j) {
    const double pre = gh[j] * (1.0 - h[j] * h[j]);
    gb1[j] += pre;
    for (std::size_t i = 0; i < input_dim_; ++i) gw[j * input_dim_ + i] += pre * x[i];
  }
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
  loss.validate();
  noise.validate();
  if (steps == 0) throw ConfigError("steps must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning rate must be positive");
  if (snapshot_every == 0) throw ConfigError("snapshot_every must be positive");
  if (metrics_every == 0) throw ConfigError("metrics_every must be positive");
  if (eval.threads == 0) throw ConfigError("threads must be >= 1");
}

double default_learning_rate(Architecture arch) {
  return arch == Architecture::LINEAR ? 1e-2 : 1e-3;
}

namespace {

// Errors for a subset of trajectories, provenance carrying original indices.
ErrorSet errors_for(const Policy& policy, const TrajectoryBatch& batch,
                    std::span<const double> targets, const std::vector<std::size_t>& trajs) {
  const std::size_t T = batch.shape.horizon;
  const std::size_t out = batch.shape.chunk * batch.shape.dim;
  std::vector<double> values(trajs.size() * T * out);
  std::vector<SampleIndex> provenance;
  provenance.reserve(trajs.size() * T * batch.shape.chunk);
  for (std::size_t r = 0; r < trajs.size(); ++r) {
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t bt = trajs[r] * T + t;
      std::span<double> y(values.data() + (r * T + t) * out, out);
      policy.predict(batch.observation(bt), y);
      for (std::size_t o = 0; o < out; ++o) y[o] -= targets[bt * out + o];
      for (std::size_t k = 0; k < batch.shape.chunk; ++k) provenance.push_back({trajs[r], t, k});
    }
  }
  return ErrorSet(batch.shape.dim, std::move(values), std::move(provenance));
}

std::vector<std::size_t> all_trajectories(const TrajectoryBatch& batch) {
  std::vector<std::size_t> idx(batch.shape.trajectories);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

// Objective gradient w.r.t. parameters for errors built from `trajs`.
std::vector<double> chain_rows(const Policy& policy, const TrajectoryBatch& batch,
                               const GradientField& g, const std::vector<std::size_t>& trajs) {
  // One policy evaluation produces K*D outputs, i.e. K consecutive samples,
  // so the field is re-read with one row per evaluation.
  GradientField per_eval;
  per_eval.dim = batch.shape.chunk * batch.shape.dim;
  per_eval.values = g.values;
  const std::size_t T = batch.shape.horizon;
  return chain_to_parameters(
      per_eval, policy.output_dim(), policy.parameter_count(),
      [&](std::size_t row, std::span<const double> g_row, std::span<double> acc) {
        const std::size_t bt = trajs[row / T] * T + row % T;
        policy.accumulate_adjoint(batch.observation(bt), g_row, acc);
      });
}

struct StepGradient {
  std::vector<double> params;
  double total = 0.0;
  double mse = 0.0;
  double entropy = 0.0;
  bool entropy_active = false;
};

StepGradient step_gradient(const Policy& policy, const TrajectoryBatch& batch,
                           const ErrorSet& errors, const std::vector<std::size_t>& trajs,
                           const LossConfig& loss, bool entropy_active,
                           const EvalOptions& eval) {
  StepGradient out;
  GradientField g = mse_gradient(errors);
  out.mse = g.loss_value;
  out.entropy_active = entropy_active && loss.alpha > 0.0;
  if (out.entropy_active) {
    const GradientField ge = entropy_gradient(errors, loss, eval);
    out.entropy = ge.loss_value;
    g.add_scaled(ge, loss.alpha);
  }
  out.total = g.loss_value;
  out.params = chain_rows(policy, batch, g, trajs);
  return out;
}

double l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

ErrorSet compute_errors(const Policy& policy, const TrajectoryBatch& batch,
                        std::span<const double> targets) {
  if (targets.size() != batch.target_actions.size())
    throw InputError("target tensor does not match the batch shape");
  if (policy.input_dim() != batch.obs_dim ||
      policy.output_dim() != batch.shape.chunk * batch.shape.dim)
    throw InputError("policy dimensions do not match the batch");
  return errors_for(policy, batch, targets, all_trajectories(batch));
}

std::vector<double> parameter_gradient(const Policy& policy, const TrajectoryBatch& batch,
                                       const ErrorSet& errors, const LossConfig& loss,
                                       std::uint64_t step, std::uint64_t total_steps,
                                       const EvalOptions& eval, double* loss_value) {
  const bool active = step >= entropy_activation_step(loss.warmup_fraction, total_steps);
  auto g = step_gradient(policy, batch, errors, all_trajectories(batch), loss, active, eval);
  if (loss_value) *loss_value = g.total;
  return std::move(g.params);
}

double task_mse(const ErrorSet& errors, const TrajectoryBatch& batch, Task task) {
  double sum = 0.0;
  std::size_t count = 0;
  const auto& prov = errors.provenance();
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (batch.task_labels[prov[i].b] != task) continue;
    for (double v : errors.sample(i)) sum += v * v;
    ++count;
  }
  return count == 0 ? std::nan("") : sum / static_cast<double>(count);
}

TaskPartition sample_partition(const TrajectoryBatch& batch) {
  std::vector<Task> labels;
  labels.reserve(batch.shape.samples());
  for (std::size_t b = 0; b < batch.shape.trajectories; ++b)
    labels.insert(labels.end(), batch.shape.horizon * batch.shape.chunk, batch.task_labels[b]);
  return TaskPartition(std::move(labels));
}

TrainResult train(const TrajectoryBatch& batch, Policy policy, const TrainConfig& config) {
  batch.validate();
  config.validate();
  if (policy.input_dim() != batch.obs_dim ||
      policy.output_dim() != batch.shape.chunk * batch.shape.dim)
    throw InputError("policy dimensions do not match the batch");

  const std::vector<double> targets =
      config.noise.kind == NoiseKind::NONE
          ? batch.target_actions
          : corrupt_actions(batch.target_actions, config.noise);

  ExperimentReport report;
  report.entropy_activation_step =
      entropy_activation_step(config.loss.warmup_fraction, config.steps);
  const auto everything = all_trajectories(batch);
  const bool minibatch = config.batch_size > 0 && config.batch_size < batch.shape.trajectories;
  Rng sampler(Rng::derive_seed(config.seed, 0x5eed));

  auto renyi = [&](const ErrorSet& e) {
    return renyi_entropy_estimate(e, config.loss.sigma, config.eval);
  };

  for (std::uint64_t step = 0; step <= config.steps; ++step) {
    const bool final_eval = step == config.steps;
    const bool log_row = final_eval || step % config.metrics_every == 0 ||
                         step % config.snapshot_every == 0;
    const bool snapshot = final_eval || step % config.snapshot_every == 0;
    const bool active = step >= report.entropy_activation_step;

    std::vector<std::size_t> trajs = everything;
    if (minibatch && !final_eval) {
      // Partial Fisher-Yates: the first batch_size entries form the sample.
      for (std::size_t i = 0; i < config.batch_size; ++i) {
        const auto j = i + static_cast<std::size_t>(sampler.uniform() *
                                                    static_cast<double>(trajs.size() - i));
        std::swap(trajs[i], trajs[std::min(j, trajs.size() - 1)]);
      }
      trajs.resize(config.batch_size);
      std::sort(trajs.begin(), trajs.end());
    }

    const ErrorSet errors = errors_for(policy, batch, targets, trajs);
    const StepGradient g =
        step_gradient(policy, batch, errors, trajs, config.loss, active, config.eval);

    if (!std::isfinite(g.total) || !std::isfinite(l2(g.params))) {
      report.diverged = true;
      std::ostringstream msg;
      msg << "non-finite loss at step " << step << " (mse=" << g.mse
          << ", entropy=" << g.entropy << ")";
      report.diagnostic = msg.str();
      return {std::move(policy), std::move(report)};
    }

    if (snapshot) {
      report.snapshots.push_back(
          {step, minibatch ? errors_for(policy, batch, targets, everything) : errors});
    }
    if (log_row) {
      MetricRow row{step, g.total, g.mse, 0.0, l2(g.params)};
      // Snapshot rows log the entropy of the stored snapshot so the curve can
      // be recomputed from disk; the plain estimator's value is reused when
      // it was just evaluated on the same errors.
      if (!minibatch && g.entropy_active && config.loss.variant == Variant::TMEE)
        row.entropy = g.entropy;
      else
        row.entropy = renyi(snapshot ? report.snapshots.back().errors : errors);
      report.metrics.push_back(row);
    }

    if (config.verify_every > 0 && !final_eval && step % config.verify_every == 0) {
      Policy probe = policy;
      auto objective = [&](const ErrorSet&) {
        const ErrorSet e = errors_for(probe, batch, targets, trajs);
        double value = mse_loss(e);
        if (active && config.loss.alpha > 0.0)
          value += config.loss.alpha * entropy_loss(e, config.loss, config.eval);
        return value;
      };
      // FD over parameters: reuse the oracle by viewing theta as a 1-D error set.
      const ErrorSet theta(1, std::vector<double>(policy.parameters().begin(),
                                                  policy.parameters().end()));
      const GradientField fd = finite_difference_oracle(
          [&](const ErrorSet& th) {
            std::copy(th.values().begin(), th.values().end(), probe.parameters().begin());
            return objective(th);
          },
          theta);
      report.gradient_checks.push_back({step, relative_error(g.params, fd.values)});
    }

    if (final_eval) break;
    auto theta = policy.parameters();
    for (std::size_t p = 0; p < theta.size(); ++p) theta[p] -= config.learning_rate * g.params[p];
  }

  const ErrorSet clean = compute_errors(policy, batch, batch.target_actions);
  report.clean_mse = mse_loss(clean);
  report.clean_mse_task_a = task_mse(clean, batch, Task::A);
  report.clean_mse_task_b = task_mse(clean, batch, Task::B);
  return {std::move(policy), std::move(report)};
}

}  // namespace entroshape
