#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "entroshape/error.hpp"
#include "entroshape/rng.hpp"
#include "entroshape/trainer.hpp"

namespace entroshape {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

TrainResult run_one(const TrajectoryBatch& batch, Architecture arch, TrainConfig config) {
  Policy policy = Policy::initialized(arch, batch.obs_dim, batch.shape.chunk * batch.shape.dim,
                                      Rng::derive_seed(config.seed, 0x9011c7));
  auto result = train(batch, std::move(policy), config);
  if (result.report.diverged) throw DivergenceError(result.report.diagnostic);
  return result;
}

}  // namespace

NoiseBenchReport run_noise_bench(const NoiseBenchConfig& config) {
  if (config.seeds.empty()) throw ConfigError("noise bench needs at least one seed");
  if (config.alphas.empty()) throw ConfigError("noise bench needs at least one alpha");
  for (double a : config.alphas)
    if (!(a > 0.0)) throw ConfigError("noise bench alphas must be positive");
  config.noise.validate();

  // Arm 0 is MSE-only, arm j >= 1 uses alphas[j - 1].
  const std::size_t arms = config.alphas.size() + 1;
  const std::size_t jobs = config.seeds.size() * arms;
  std::vector<NoiseBenchRow> rows(jobs);
  parallel_for(jobs, config.train.eval.threads, [&](std::size_t job) {
    const std::uint64_t seed = config.seeds[job / arms];
    const std::size_t arm = job % arms;
    const TrajectoryBatch batch = generate_tasks(config.recipe, seed);
    TrainConfig tc = config.train;
    tc.eval.threads = 1;
    tc.seed = seed;
    tc.noise = config.noise;
    tc.noise.seed = Rng::derive_seed(seed, 0xc0ff);
    tc.loss.alpha = arm == 0 ? 0.0 : config.alphas[arm - 1];
    const auto result = run_one(batch, config.architecture, tc);
    rows[job] = {seed, tc.loss.alpha, result.report.clean_mse,
                 result.report.metrics.back().entropy};
  });

  NoiseBenchReport report;
  report.rows = rows;
  std::vector<std::vector<double>> per_arm(arms);
  for (std::size_t job = 0; job < jobs; ++job) per_arm[job % arms].push_back(rows[job].clean_mse);
  report.median_mse_only = median(per_arm[0]);
  for (std::size_t a = 1; a < arms; ++a) {
    report.median_with_entropy.push_back(median(per_arm[a]));
    if (report.median_with_entropy.back() < report.median_mse_only)
      report.any_alpha_improves = true;
  }
  return report;
}

PairedTest paired_degradation_test(const std::vector<double>& deltas, double reference_scale,
                                   double min_relative_effect) {
  PairedTest out;
  const std::size_t n = deltas.size();
  if (n == 0) return out;
  out.mean = mean(deltas);
  if (n < 2) return out;
  double ss = 0.0;
  for (double d : deltas) ss += (d - out.mean) * (d - out.mean);
  out.stddev = std::sqrt(ss / static_cast<double>(n - 1));
  const double se = out.stddev / std::sqrt(static_cast<double>(n));
  out.t = se > 0.0 ? out.mean / se : (out.mean > 0.0 ? INFINITY : 0.0);
  const boost::math::students_t dist(static_cast<double>(n - 1));
  const double critical = boost::math::quantile(boost::math::complement(dist, 0.025));
  out.significant = out.mean > 0.0 && out.t > critical &&
                    out.mean > min_relative_effect * std::abs(reference_scale);
  return out;
}

std::vector<ImbalanceCell> run_imbalance_sweep(const ImbalanceConfig& config) {
  if (config.recipe.generator != GeneratorKind::PAIRED)
    throw ConfigError("imbalance sweep needs the PAIRED generator");
  if (config.ratios.empty() || config.deltas.empty() || config.seeds.empty())
    throw ConfigError("imbalance sweep grid must be nonempty");
  for (auto r : config.ratios)
    if (r < 1) throw ConfigError("imbalance ratios must be >= 1");

  // Jobs: (delta, seed, ratio) for every ratio plus the balanced ratio 1.
  std::vector<std::size_t> ratios = config.ratios;
  if (std::find(ratios.begin(), ratios.end(), std::size_t{1}) == ratios.end())
    ratios.insert(ratios.begin(), 1);
  const std::size_t nr = ratios.size();
  const std::size_t ns = config.seeds.size();
  const std::size_t jobs = config.deltas.size() * ns * nr;

  struct JobOut {
    double minority_mse = 0.0;
    double minority_power = 0.0;
    CouplingReport coupling;
  };
  std::vector<JobOut> out(jobs);
  parallel_for(jobs, config.train.eval.threads, [&](std::size_t job) {
    const double delta = config.deltas[job / (ns * nr)];
    const std::uint64_t seed = config.seeds[(job / nr) % ns];
    const std::size_t ratio = ratios[job % nr];
    TaskRecipe recipe = config.recipe;
    recipe.delta_task = delta;
    recipe.trajectories_a = ratio * recipe.trajectories_b;
    const TrajectoryBatch batch = generate_tasks(recipe, seed);
    TrainConfig tc = config.train;
    tc.eval.threads = 1;
    tc.seed = seed;
    const auto result = run_one(batch, config.architecture, tc);

    // Mid-training snapshot: the one closest to steps / 2.
    const auto& snaps = result.report.snapshots;
    const auto mid = std::min_element(snaps.begin(), snaps.end(), [&](const auto& a, const auto& b) {
      const auto da = std::llabs(static_cast<long long>(a.step) - static_cast<long long>(tc.steps / 2));
      const auto db = std::llabs(static_cast<long long>(b.step) - static_cast<long long>(tc.steps / 2));
      return da < db;
    });
    // Zero policy output gives errors = -targets, so this is the target power.
    const Policy zero(Architecture::LINEAR, batch.obs_dim, batch.shape.chunk * batch.shape.dim);
    const double power = task_mse(compute_errors(zero, batch, batch.target_actions), batch, Task::B);
    out[job] = {result.report.clean_mse_task_b, power,
                coupling_ratio(mid->errors, sample_partition(batch), tc.loss.sigma)};
  });

  std::vector<ImbalanceCell> cells;
  for (std::size_t di = 0; di < config.deltas.size(); ++di) {
    for (std::size_t ri = 0; ri < nr; ++ri) {
      if (std::find(config.ratios.begin(), config.ratios.end(), ratios[ri]) ==
          config.ratios.end())
        continue;
      ImbalanceCell cell;
      cell.ratio = ratios[ri];
      cell.delta_task = config.deltas[di];
      const std::size_t balanced_ri =
          static_cast<std::size_t>(std::find(ratios.begin(), ratios.end(), 1) - ratios.begin());
      std::vector<double> deltas, rb, minority, balanced, power;
      for (std::size_t si = 0; si < ns; ++si) {
        const auto& run = out[(di * ns + si) * nr + ri];
        const auto& base = out[(di * ns + si) * nr + balanced_ri];
        cell.seeds.push_back({config.seeds[si], run.minority_mse, base.minority_mse,
                              run.coupling.coupling_ratio, run.coupling.k_bar_ab,
                              run.coupling.k_bar_bb});
        deltas.push_back(run.minority_mse - base.minority_mse);
        rb.push_back(run.coupling.coupling_ratio);
        minority.push_back(run.minority_mse);
        balanced.push_back(base.minority_mse);
        power.push_back(run.minority_power);
      }
      cell.mean_coupling_ratio = mean(rb);
      cell.mean_minority_mse = mean(minority);
      cell.mean_balanced_minority_mse = mean(balanced);
      cell.minority_signal_power = mean(power);
      const auto test = paired_degradation_test(deltas, cell.minority_signal_power);
      cell.mean_delta = test.mean;
      cell.t_statistic = test.t;
      cell.significant_degradation = test.significant;
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

}  // namespace entroshape
