#include "entroshape/cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "entroshape/analysis.hpp"
#include "entroshape/csv.hpp"
#include "entroshape/error.hpp"
#include "entroshape/gradients.hpp"
#include "entroshape/rng.hpp"
#include "entroshape/verification.hpp"

namespace fs = std::filesystem;

namespace entroshape::cli {

namespace {

/// Signals a failed verification (exit code 2).
class VerificationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw InputError("failed writing " + path.string());
}

json nan_to_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

fs::path prepare_out_dir(const CommandContext& ctx) {
  const fs::path dir(ctx.out_dir);
  fs::create_directories(dir);
  // Probe writability up front so failures surface as IO errors, not midway.
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream p(probe);
    if (!p) throw InputError("output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe);
  return dir;
}

std::ostream& log_of(const CommandContext& ctx) { return ctx.log ? *ctx.log : std::cout; }

}  // namespace

// ---------------------------------------------------------------------------
// Hashing and manifest

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i)
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return hex.str();
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

void write_manifest(const std::string& dir, const CommandContext& ctx) {
  std::map<std::string, std::string> outputs;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir).generic_string();
    if (rel == "manifest.json") continue;
    outputs[rel] = sha256_file(entry.path().string());
  }
  std::string combined;
  for (const auto& [name, hash] : outputs) combined += name + ':' + hash + '\n';
  // output_dir is where the run was written, not what was computed.
  json resolved = to_json(ctx.config);
  resolved.erase("output_dir");
  const json manifest = {{"tool", "entroshape"},
                         {"version", kToolVersion},
                         {"command", ctx.command},
                         {"seed", ctx.config.seed},
                         {"config_hash", sha256_hex(resolved.dump())},
                         {"outputs", outputs},
                         {"outputs_hash", sha256_hex(combined)}};
  write_json(fs::path(dir) / "manifest.json", manifest);
}

// ---------------------------------------------------------------------------
// Run directories

void write_run_directory(const std::string& dir, const TrajectoryBatch& batch,
                         const ExperimentReport& report) {
  const fs::path root(dir);
  fs::create_directories(root / "snapshots");
  {
    auto out = open_out(root / "metrics.csv");
    out << "step,total,mse,entropy,grad_norm\n";
    for (const auto& m : report.metrics)
      out << m.step << ',' << csv::format(m.total) << ',' << csv::format(m.mse) << ','
          << csv::format(m.entropy) << ',' << csv::format(m.grad_norm) << '\n';
  }
  for (const auto& s : report.snapshots) {
    char name[32];
    std::snprintf(name, sizeof(name), "step_%08llu.csv", static_cast<unsigned long long>(s.step));
    write_error_set_csv((root / "snapshots" / name).string(), s.errors);
  }
  json labels = json::array();
  for (Task t : batch.task_labels) labels.push_back(t == Task::A ? "A" : "B");
  json checks = json::array();
  for (const auto& c : report.gradient_checks)
    checks.push_back({{"step", c.step}, {"relative_error", c.relative_error}});
  write_json(root / "summary.json",
             {{"entropy_activation_step", report.entropy_activation_step},
              {"clean_mse", nan_to_null(report.clean_mse)},
              {"clean_mse_task_a", nan_to_null(report.clean_mse_task_a)},
              {"clean_mse_task_b", nan_to_null(report.clean_mse_task_b)},
              {"final_entropy", report.metrics.empty() ? json(nullptr)
                                                       : nan_to_null(report.metrics.back().entropy)},
              {"diverged", report.diverged},
              {"diagnostic", report.diagnostic},
              {"gradient_checks", checks},
              {"task_labels", labels},
              {"shape",
               {{"trajectories", batch.shape.trajectories},
                {"horizon", batch.shape.horizon},
                {"chunk", batch.shape.chunk},
                {"dim", batch.shape.dim}}}});
}

std::vector<MetricRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::string line;
  std::getline(in, line);
  if (line != "step,total,mse,entropy,grad_norm") throw InputError("unexpected metrics header");
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 5) throw InputError("ragged metrics row");
    rows.push_back({csv::parse_uint(f[0]), csv::parse_double(f[1]), csv::parse_double(f[2]),
                    csv::parse_double(f[3]), csv::parse_double(f[4])});
  }
  return rows;
}

std::vector<Snapshot> read_snapshots(const std::string& run_dir) {
  const fs::path dir = fs::path(run_dir) / "snapshots";
  if (!fs::is_directory(dir)) throw InputError(run_dir + " has no snapshots directory");
  std::vector<Snapshot> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("step_", 0) != 0 || entry.path().extension() != ".csv") continue;
    const std::string digits = name.substr(5, name.size() - 9);
    out.push_back({csv::parse_uint(digits), read_error_set_csv(entry.path().string())});
  }
  if (out.empty()) throw InputError(run_dir + " contains no snapshots");
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.step < b.step; });
  return out;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_grad_check(const CommandContext& ctx) {
  const auto dir = prepare_out_dir(ctx);
  const auto report = run_grad_check(ctx.config.grad_check, ctx.config.seed);
  {
    auto out = open_out(dir / "grad_check.csv");
    out << "variant,instance,n,dim,sigma,relative_error,tolerance,passed\n";
    for (const auto& c : report.cases)
      out << to_string(c.variant) << ',' << c.instance << ',' << c.errors.size() << ','
          << c.errors.dim() << ',' << csv::format(c.sigma) << ',' << csv::format(c.relative_error)
          << ',' << csv::format(c.tolerance) << ',' << (c.passed ? 1 : 0) << '\n';
  }
  std::size_t failures = 0;
  for (const auto& c : report.cases) {
    if (c.passed) continue;
    if (failures++ == 0) fs::create_directories(dir / "failures");
    const std::string name = to_string(c.variant) + "_" + std::to_string(c.instance) + ".csv";
    write_error_set_csv((dir / "failures" / name).string(), c.errors);
    log_of(ctx) << "FAIL " << to_string(c.variant) << " instance " << c.instance
                << " (N=" << c.errors.size() << ", D=" << c.errors.dim() << ", sigma=" << c.sigma
                << "): relative error " << c.relative_error << " > " << c.tolerance
                << "; dumped to failures/" << name << '\n';
  }
  write_json(dir / "summary.json", {{"cases", report.cases.size()},
                                    {"failures", failures},
                                    {"max_relative_error", report.max_relative_error},
                                    {"passed", report.all_passed}});
  write_manifest(dir.string(), ctx);
  log_of(ctx) << "grad-check: " << report.cases.size() - failures << "/" << report.cases.size()
              << " instances within tolerance (max relative error " << report.max_relative_error
              << ")\n";
  if (!report.all_passed) throw VerificationFailure("gradient check failed");
  return kSuccess;
}

int cmd_train(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  const auto dir = prepare_out_dir(ctx);
  const TrajectoryBatch batch = generate_tasks(cfg.task, cfg.seed);
  Policy policy = Policy::initialized(cfg.architecture, batch.obs_dim,
                                      batch.shape.chunk * batch.shape.dim,
                                      Rng::derive_seed(cfg.seed, 0x9011c7), cfg.hidden);
  const auto result = train(batch, std::move(policy), cfg.train);
  write_run_directory(dir.string(), batch, result.report);
  json resolved = to_json(cfg);
  resolved.erase("output_dir");  // keeps reruns into other directories byte-identical
  write_json(dir / "config.json", resolved);
  write_manifest(dir.string(), ctx);
  if (result.report.diverged) throw DivergenceError(result.report.diagnostic);
  log_of(ctx) << "train: final mse " << result.report.metrics.back().mse << ", entropy "
              << result.report.metrics.back().entropy << ", clean mse " << result.report.clean_mse
              << '\n';
  for (const auto& c : result.report.gradient_checks)
    if (!(c.relative_error <= 1e-5))
      throw VerificationFailure("parameter gradient check failed at step " +
                                std::to_string(c.step));
  return kSuccess;
}

int cmd_noise_bench(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  const auto dir = prepare_out_dir(ctx);
  NoiseBenchConfig bench;
  bench.recipe = cfg.task;
  bench.architecture = cfg.architecture;
  bench.train = cfg.train;
  bench.noise = cfg.noise;
  bench.alphas = cfg.noise_bench_alphas;
  bench.seeds = cfg.seeds;
  const auto report = run_noise_bench(bench);
  {
    auto out = open_out(dir / "noise_bench.csv");
    out << "seed,alpha,clean_mse,final_entropy\n";
    for (const auto& r : report.rows)
      out << r.seed << ',' << csv::format(r.alpha) << ',' << csv::format(r.clean_mse) << ','
          << csv::format(r.final_entropy) << '\n';
  }
  json arms = json::array();
  for (std::size_t i = 0; i < bench.alphas.size(); ++i)
    arms.push_back({{"alpha", bench.alphas[i]}, {"median_clean_mse", report.median_with_entropy[i]}});
  constexpr double kReferenceCauchyGamma = 0.02;
  json summary = {{"noise", to_json(cfg.noise)},
                  {"median_clean_mse_mse_only", report.median_mse_only},
                  {"with_entropy", arms},
                  {"any_alpha_improves", report.any_alpha_improves}};
  if (cfg.noise.kind == NoiseKind::CAUCHY && cfg.noise.gamma != kReferenceCauchyGamma)
    summary["gamma_note"] = "Cauchy scale " + csv::format(cfg.noise.gamma) +
                            " differs from the reference 0.02";
  write_json(dir / "summary.json", summary);
  write_manifest(dir.string(), ctx);
  log_of(ctx) << "noise-bench: median clean mse (mse only) " << report.median_mse_only;
  for (std::size_t i = 0; i < bench.alphas.size(); ++i)
    log_of(ctx) << ", alpha " << bench.alphas[i] << ": " << report.median_with_entropy[i];
  log_of(ctx) << '\n';
  return kSuccess;
}

int cmd_imbalance(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  const auto dir = prepare_out_dir(ctx);
  ImbalanceConfig sweep;
  sweep.recipe = cfg.task;
  sweep.architecture = cfg.architecture;
  sweep.train = cfg.train;
  sweep.ratios = cfg.imbalance_ratios;
  sweep.deltas = cfg.imbalance_deltas;
  sweep.seeds = cfg.seeds;
  const auto cells = run_imbalance_sweep(sweep);
  json summary = json::array();
  {
    auto out = open_out(dir / "imbalance.csv");
    out << "ratio,delta_task,seed,minority_mse,balanced_minority_mse,coupling_ratio,k_bar_ab,"
           "k_bar_bb\n";
    for (const auto& cell : cells) {
      for (const auto& s : cell.seeds)
        out << cell.ratio << ',' << csv::format(cell.delta_task) << ',' << s.seed << ','
            << csv::format(s.minority_mse) << ',' << csv::format(s.balanced_minority_mse) << ','
            << csv::format(s.coupling_ratio) << ',' << csv::format(s.k_bar_ab) << ','
            << csv::format(s.k_bar_bb) << '\n';
      summary.push_back({{"ratio", cell.ratio},
                         {"delta_task", cell.delta_task},
                         {"mean_coupling_ratio", cell.mean_coupling_ratio},
                         {"mean_minority_mse", cell.mean_minority_mse},
                         {"mean_balanced_minority_mse", cell.mean_balanced_minority_mse},
                         {"mean_delta", cell.mean_delta},
                         {"t_statistic", nan_to_null(cell.t_statistic)},
                         {"significant_degradation", cell.significant_degradation}});
      log_of(ctx) << "imbalance: ratio " << cell.ratio << " delta " << cell.delta_task
                  << " R_B " << cell.mean_coupling_ratio << " minority delta " << cell.mean_delta
                  << (cell.significant_degradation ? " (significant)" : "") << '\n';
    }
  }
  write_json(dir / "summary.json", {{"cells", summary}});
  write_manifest(dir.string(), ctx);
  return kSuccess;
}

int cmd_influence(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  const auto dir = prepare_out_dir(ctx);
  const auto& s = cfg.influence;
  std::vector<double> cs(s.points);
  for (std::size_t i = 0; i < s.points; ++i)
    cs[i] = s.c_min + (s.c_max - s.c_min) * static_cast<double>(i) / static_cast<double>(s.points - 1);
  const ErrorSet bulk = make_influence_bulk(s.dim, cfg.loss.sigma, cfg.seed, s.bulk_size);
  const auto curve = influence_curve(bulk, cs, cfg.loss.sigma);
  {
    auto out = open_out(dir / "influence.csv");
    out << "c,tmee_grad_norm,mse_grad_norm,envelope\n";
    for (const auto& p : curve)
      out << csv::format(p.c) << ',' << csv::format(p.tmee_grad_norm) << ','
          << csv::format(p.mse_grad_norm) << ',' << csv::format(p.envelope) << '\n';
  }
  const auto peak = std::max_element(curve.begin(), curve.end(), [](const auto& a, const auto& b) {
    return a.tmee_grad_norm < b.tmee_grad_norm;
  });
  write_json(dir / "summary.json", {{"peak_c", peak->c},
                                    {"peak_tmee_grad_norm", peak->tmee_grad_norm},
                                    {"sigma", cfg.loss.sigma},
                                    {"bulk_size", s.bulk_size}});
  write_manifest(dir.string(), ctx);
  log_of(ctx) << "influence: T-MEE gradient norm peaks at c = " << peak->c << '\n';
  return kSuccess;
}

int cmd_entropy_curve(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  if (cfg.run_dir.empty()) throw ConfigError("entropy-curve needs run_dir in the config");
  const auto snapshots = read_snapshots(cfg.run_dir);
  const auto logged = read_metrics_csv((fs::path(cfg.run_dir) / "metrics.csv").string());
  EvalOptions eval = cfg.train.eval;
  const auto curve = entropy_curve(snapshots, cfg.loss.sigma, eval);
  const auto dir = prepare_out_dir(ctx);
  double worst = 0.0;
  {
    auto out = open_out(dir / "entropy_curve.csv");
    out << "step,entropy,logged_entropy,abs_diff\n";
    for (const auto& p : curve) {
      const auto row = std::find_if(logged.begin(), logged.end(),
                                    [&](const MetricRow& m) { return m.step == p.step; });
      const double ref = row == logged.end() ? std::nan("") : row->entropy;
      const double diff = std::abs(p.entropy - ref);
      worst = std::isnan(diff) ? INFINITY : std::max(worst, diff);
      out << p.step << ',' << csv::format(p.entropy) << ',' << csv::format(ref) << ','
          << csv::format(diff) << '\n';
    }
  }
  constexpr double kRoundTripTolerance = 1e-12;
  write_json(dir / "summary.json", {{"points", curve.size()},
                                    {"max_abs_diff", nan_to_null(worst)},
                                    {"matches_metrics", worst <= kRoundTripTolerance}});
  write_manifest(dir.string(), ctx);
  log_of(ctx) << "entropy-curve: " << curve.size() << " snapshots, max deviation from metrics.csv "
              << worst << '\n';
  if (!(worst <= kRoundTripTolerance))
    throw VerificationFailure("recomputed entropy curve does not match metrics.csv");
  return kSuccess;
}

int cmd_pca(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  if (cfg.pca.input.empty()) throw ConfigError("pca needs pca.input (error CSV or run directory)");
  ErrorSet errors;
  std::vector<Task> labels_by_traj;
  if (fs::is_directory(cfg.pca.input)) {
    errors = read_snapshots(cfg.pca.input).back().errors;
    std::ifstream in(fs::path(cfg.pca.input) / "summary.json");
    if (in) {
      const json summary = json::parse(in);
      for (const auto& l : summary.at("task_labels"))
        labels_by_traj.push_back(l.get<std::string>() == "A" ? Task::A : Task::B);
    }
  } else {
    errors = read_error_set_csv(cfg.pca.input);
  }
  if (cfg.pca.components > errors.dim())
    throw ConfigError("pca.components (" + std::to_string(cfg.pca.components) +
                      ") exceeds the error dimension (" + std::to_string(errors.dim()) + ")");
  const auto dir = prepare_out_dir(ctx);

  auto task_of = [&](std::size_t i) -> std::string {
    const auto b = errors.provenance()[i].b;
    if (b >= labels_by_traj.size()) return "A";
    return labels_by_traj[b] == Task::A ? "A" : "B";
  };

  // Groups: pooled, or one fit per task.
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < errors.size(); ++i)
    groups[cfg.pca.per_task ? task_of(i) : "pooled"].push_back(i);

  const std::size_t comps = cfg.pca.components;
  auto out = open_out(dir / "pca.csv");
  out << "b,t,k,task,group";
  for (std::size_t c = 0; c < comps; ++c) out << ",pc_" << c;
  out << '\n';
  json summary = json::object();
  for (const auto& [group, idx] : groups) {
    std::vector<double> values;
    for (auto i : idx) values.insert(values.end(), errors.sample(i).begin(), errors.sample(i).end());
    const ErrorSet subset(errors.dim(), std::move(values));
    const auto proj = pca_project(subset, comps);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto p = errors.provenance()[idx[r]];
      out << p.b << ',' << p.t << ',' << p.k << ',' << task_of(idx[r]) << ',' << group;
      for (std::size_t c = 0; c < comps; ++c) out << ',' << csv::format(proj.coordinates[r * comps + c]);
      out << '\n';
    }
    summary[group] = {{"explained_fraction", proj.explained_fraction}, {"axes", proj.axes}};
  }
  out.close();
  write_json(dir / "summary.json", summary);
  write_manifest(dir.string(), ctx);
  log_of(ctx) << "pca: wrote " << errors.size() << " projected samples\n";
  return kSuccess;
}

// ---------------------------------------------------------------------------
// Entry point

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Trajectory-level minimum error entropy: losses, checks and experiments"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool deterministic = true;
  std::optional<unsigned> threads;
  app.add_option("--config", config_path, "Experiment JSON config");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--seed", seed, "Override the config seed");
  app.add_flag("--deterministic,!--no-deterministic", deterministic,
               "Fixed-order reductions (default on)");
  app.add_option("--threads", threads, "Worker threads (fallback: ENTROSHAPE_THREADS)");

  const std::map<std::string, int (*)(const CommandContext&)> commands = {
      {"grad-check", cmd_grad_check},   {"train", cmd_train},
      {"noise-bench", cmd_noise_bench}, {"imbalance", cmd_imbalance},
      {"influence", cmd_influence},     {"entropy-curve", cmd_entropy_curve},
      {"pca", cmd_pca}};
  const std::map<std::string, std::string> help = {
      {"grad-check", "Analytic vs finite-difference gradient suite"},
      {"train", "Train a policy and write a run directory"},
      {"noise-bench", "MSE-only vs MSE+T-MEE under corrupted targets"},
      {"imbalance", "Two-task imbalance / overlap sweep"},
      {"influence", "Outlier gradient-norm curve"},
      {"entropy-curve", "Recompute a run's entropy curve from its snapshots"},
      {"pca", "PCA projection of an error set"}};
  for (const auto& [name, _] : commands) app.add_subcommand(name, help.at(name))->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kConfigOrIoError;
  }

  CommandContext ctx;
  ctx.log = &out;
  try {
    ctx.command = app.get_subcommands().front()->get_name();
    json j = json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw InputError("cannot read config " + config_path);
      j = json::parse(in);
    }
    if (seed) j["seed"] = *seed;
    if (!out_dir.empty()) j["output_dir"] = out_dir;
    ctx.config = experiment_config_from_json(j);
    if (!threads) {
      if (const char* env = std::getenv("ENTROSHAPE_THREADS")) {
        try {
          threads = static_cast<unsigned>(std::stoul(env));
        } catch (const std::exception&) {
          throw ConfigError("ENTROSHAPE_THREADS must be a positive integer");
        }
      }
    }
    ctx.config.train.eval.threads = threads.value_or(1);
    ctx.config.train.eval.deterministic = deterministic;
    if (ctx.config.train.eval.threads == 0) throw ConfigError("--threads must be >= 1");
    ctx.out_dir = ctx.config.output_dir.empty() ? "entroshape-" + ctx.command
                                                : ctx.config.output_dir;
    return commands.at(ctx.command)(ctx);
  } catch (const VerificationFailure& e) {
    err << "verification failure: " << e.what() << '\n';
    return kVerificationFailure;
  } catch (const DivergenceError& e) {
    err << "numerical divergence: " << e.what() << '\n';
    return kDivergence;
  } catch (const json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigOrIoError;
  } catch (const fs::filesystem_error& e) {
    err << "io error: " << e.what() << '\n';
    return kConfigOrIoError;
  } catch (const std::invalid_argument& e) {  // ConfigError, InputError
    err << "error: " << e.what() << '\n';
    return kConfigOrIoError;
  }
}

}  // namespace entroshape::cli
