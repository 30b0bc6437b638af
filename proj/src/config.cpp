#include "entroshape/config.hpp"

#include <set>
#include <type_traits>

#include "entroshape/error.hpp"

namespace entroshape {

namespace {

// Reads keys off a JSON object and rejects anything left unread.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!j_.at(key).is_number_unsigned())
        throw ConfigError(where_ + "." + key + " must be a nonnegative integer");
    }
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  template <typename T, typename Parse>
  void get_parsed(const char* key, T& out, Parse parse) {
    std::string text;
    get(key, text);
    if (j_.contains(key)) out = parse(text);
  }

  const json* section(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown key '" + where_ + "." + it.key() + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace

json to_json(const LossConfig& c) {
  return {{"sigma", c.sigma},
          {"sigma_w", c.sigma_w},
          {"alpha", c.alpha},
          {"variant", to_string(c.variant)},
          {"warmup_fraction", c.warmup_fraction}};
}

LossConfig loss_config_from_json(const json& j) {
  LossConfig c;
  Reader r(j, "loss");
  r.get("sigma", c.sigma);
  r.get("sigma_w", c.sigma_w);
  r.get("alpha", c.alpha);
  r.get_parsed("variant", c.variant, parse_variant);
  r.get("warmup_fraction", c.warmup_fraction);
  r.finish();
  c.validate();
  return c;
}

json to_json(const NoiseSpec& s) {
  return {{"kind", to_string(s.kind)},         {"gamma", s.gamma},
          {"p", s.p},                          {"impulse_std", s.impulse_std},
          {"truncation_bound", s.truncation_bound}, {"seed", s.seed}};
}

NoiseSpec noise_spec_from_json(const json& j) {
  NoiseSpec s;
  Reader r(j, "noise");
  r.get_parsed("kind", s.kind, parse_noise_kind);
  r.get("gamma", s.gamma);
  r.get("p", s.p);
  r.get("impulse_std", s.impulse_std);
  r.get("truncation_bound", s.truncation_bound);
  r.get("seed", s.seed);
  r.finish();
  s.validate();
  return s;
}

json to_json(const TaskRecipe& t) {
  return {{"generator", to_string(t.generator)},
          {"trajectories", t.trajectories},
          {"trajectories_a", t.trajectories_a},
          {"trajectories_b", t.trajectories_b},
          {"horizon", t.horizon},
          {"chunk", t.chunk},
          {"action_dim", t.action_dim},
          {"delta_task", t.delta_task}};
}

TaskRecipe task_recipe_from_json(const json& j) {
  TaskRecipe t;
  Reader r(j, "task");
  r.get_parsed("generator", t.generator, parse_generator);
  r.get("trajectories", t.trajectories);
  r.get("trajectories_a", t.trajectories_a);
  r.get("trajectories_b", t.trajectories_b);
  r.get("horizon", t.horizon);
  r.get("chunk", t.chunk);
  r.get("action_dim", t.action_dim);
  r.get("delta_task", t.delta_task);
  r.finish();
  t.validate();
  return t;
}

void ExperimentConfig::validate() const {
  loss.validate();
  task.validate();
  noise.validate();
  train.validate();
  if (learning_rate && !(*learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (architecture == Architecture::MLP2 && hidden == 0) throw ConfigError("hidden must be >= 1");
  for (double a : noise_bench_alphas)
    if (!(a > 0.0)) throw ConfigError("noise_bench.alphas must be positive");
  for (auto r : imbalance_ratios)
    if (r < 1) throw ConfigError("imbalance.ratios must be >= 1");
  for (double d : imbalance_deltas)
    if (!(d >= 0.0)) throw ConfigError("imbalance.deltas must be >= 0");
  for (double s : grad_check.sigmas) require_bandwidth(s, "grad_check.sigmas");
  if (!(grad_check.h > 0.0) || !(grad_check.weighted_h > 0.0))
    throw ConfigError("grad_check.h and grad_check.weighted_h must be positive");
  if (!(grad_check.tolerance > 0.0) || !(grad_check.weighted_tolerance > 0.0))
    throw ConfigError("grad_check tolerances must be positive");
  if (grad_check.max_samples < 2 || grad_check.weighted_max_samples < 2 || grad_check.max_dim < 1)
    throw ConfigError("grad_check needs max_samples >= 2 and max_dim >= 1");
  if (!(influence.c_min > 0.0) || !(influence.c_max > influence.c_min) || influence.points < 2)
    throw ConfigError("influence needs 0 < c_min < c_max and points >= 2");
  if (influence.dim == 0 || influence.bulk_size == 0)
    throw ConfigError("influence needs dim >= 1 and bulk_size >= 1");
  if (pca.components == 0) throw ConfigError("pca.components must be >= 1");
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  Reader top(j, "config");
  top.get("seed", c.seed);
  top.get("output_dir", c.output_dir);
  top.get("run_dir", c.run_dir);
  if (const json* s = top.section("loss")) c.loss = loss_config_from_json(*s);
  if (const json* s = top.section("task")) c.task = task_recipe_from_json(*s);
  if (const json* s = top.section("noise")) c.noise = noise_spec_from_json(*s);

  if (const json* s = top.section("train")) {
    Reader r(*s, "train");
    r.get("steps", c.train.steps);
    double lr = 0.0;
    r.get("learning_rate", lr);
    if (s->contains("learning_rate")) c.learning_rate = lr;
    r.get("batch_size", c.train.batch_size);
    r.get("snapshot_every", c.train.snapshot_every);
    r.get("metrics_every", c.train.metrics_every);
    r.get("verify_every", c.train.verify_every);
    r.get_parsed("architecture", c.architecture, parse_architecture);
    r.get("hidden", c.hidden);
    r.finish();
  }
  if (const json* s = top.section("noise_bench")) {
    Reader r(*s, "noise_bench");
    r.get("alphas", c.noise_bench_alphas);
    r.finish();
  }
  top.get("seeds", c.seeds);
  if (const json* s = top.section("imbalance")) {
    Reader r(*s, "imbalance");
    r.get("ratios", c.imbalance_ratios);
    r.get("deltas", c.imbalance_deltas);
    r.finish();
  }
  if (const json* s = top.section("grad_check")) {
    Reader r(*s, "grad_check");
    auto& g = c.grad_check;
    r.get("instances", g.instances);
    r.get("max_samples", g.max_samples);
    r.get("max_dim", g.max_dim);
    r.get("sigmas", g.sigmas);
    std::vector<std::string> variants;
    r.get("variants", variants);
    if (s->contains("variants")) {
      g.variants.clear();
      for (const auto& v : variants) g.variants.push_back(parse_variant(v));
    }
    r.get("h", g.h);
    r.get("weighted_h", g.weighted_h);
    r.get("tolerance", g.tolerance);
    r.get("weighted_tolerance", g.weighted_tolerance);
    r.get("weighted_max_samples", g.weighted_max_samples);
    r.get("inject_sign_error", g.inject_sign_error);
    r.finish();
  }
  if (const json* s = top.section("influence")) {
    Reader r(*s, "influence");
    r.get("c_min", c.influence.c_min);
    r.get("c_max", c.influence.c_max);
    r.get("points", c.influence.points);
    r.get("dim", c.influence.dim);
    r.get("bulk_size", c.influence.bulk_size);
    r.finish();
  }
  if (const json* s = top.section("pca")) {
    Reader r(*s, "pca");
    r.get("components", c.pca.components);
    r.get("input", c.pca.input);
    r.get("per_task", c.pca.per_task);
    r.finish();
  }
  top.finish();

  c.train.loss = c.loss;
  c.train.noise = c.noise;
  c.train.seed = c.seed;
  c.train.learning_rate = c.learning_rate.value_or(default_learning_rate(c.architecture));
  c.validate();
  return c;
}

json to_json(const ExperimentConfig& c) {
  json variants = json::array();
  for (auto v : c.grad_check.variants) variants.push_back(to_string(v));
  return {
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"run_dir", c.run_dir},
      {"loss", to_json(c.loss)},
      {"task", to_json(c.task)},
      {"noise", to_json(c.noise)},
      {"train",
       {{"steps", c.train.steps},
        {"learning_rate", c.train.learning_rate},
        {"batch_size", c.train.batch_size},
        {"snapshot_every", c.train.snapshot_every},
        {"metrics_every", c.train.metrics_every},
        {"verify_every", c.train.verify_every},
        {"architecture", to_string(c.architecture)},
        {"hidden", c.hidden}}},
      {"noise_bench", {{"alphas", c.noise_bench_alphas}}},
      {"seeds", c.seeds},
      {"imbalance", {{"ratios", c.imbalance_ratios}, {"deltas", c.imbalance_deltas}}},
      {"grad_check",
       {{"instances", c.grad_check.instances},
        {"max_samples", c.grad_check.max_samples},
        {"max_dim", c.grad_check.max_dim},
        {"sigmas", c.grad_check.sigmas},
        {"variants", variants},
        {"h", c.grad_check.h},
        {"weighted_h", c.grad_check.weighted_h},
        {"tolerance", c.grad_check.tolerance},
        {"weighted_tolerance", c.grad_check.weighted_tolerance},
        {"weighted_max_samples", c.grad_check.weighted_max_samples},
        {"inject_sign_error", c.grad_check.inject_sign_error}}},
      {"influence",
       {{"c_min", c.influence.c_min},
        {"c_max", c.influence.c_max},
        {"points", c.influence.points},
        {"dim", c.influence.dim},
        {"bulk_size", c.influence.bulk_size}}},
      {"pca",
       {{"components", c.pca.components},
        {"input", c.pca.input},
        {"per_task", c.pca.per_task}}},
  };
}

}  // namespace entroshape
