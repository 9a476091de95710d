#include "ctxsel/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "ctxsel/errors.hpp"

namespace ctxsel {

using nlohmann::json;

Strategy strategy_from_string(const std::string& name) {
  if (name == "policy") return Strategy::policy;
  if (name == "vanilla") return Strategy::vanilla;
  if (name == "random-per-token") return Strategy::random_per_token;
  if (name == "random-per-frame") return Strategy::random_per_frame;
  if (name == "sliding-window") return Strategy::sliding_window;
  if (name == "global-local") return Strategy::global_local;
  if (name == "random-global-local") return Strategy::random_global_local;
  throw ConfigError("unknown selection strategy '" + name + "'");
}

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::policy: return "policy";
    case Strategy::vanilla: return "vanilla";
    case Strategy::random_per_token: return "random-per-token";
    case Strategy::random_per_frame: return "random-per-frame";
    case Strategy::sliding_window: return "sliding-window";
    case Strategy::global_local: return "global-local";
    case Strategy::random_global_local: return "random-global-local";
  }
  throw ConfigError("unknown strategy id");
}

void RunConfig::validate() const {
  env.validate();
  grpo.validate();
  if (policy.dim != env.geometry.dim) {
    throw ConfigError("policy dim must match environment dim");
  }
  if (budget_k < 1 || budget_k > env.geometry.tokens_per_segment()) {
    throw ConfigError("selection budget must lie in [1, tokens per segment]");
  }
  if (rewards.content_keyframes < 1 || rewards.content_keyframes > env.geometry.frames_per_segment) {
    throw ConfigError("content keyframe count must lie in [1, frames per segment]");
  }
  if (rewards.clip_frames < 1) throw ConfigError("clip frame count must be >= 1");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (output_dir.empty()) throw ConfigError("output directory must be set");
}

namespace {

void check_keys(const json& obj, const std::string& scope, const std::set<std::string>& known) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!known.count(key)) {
      throw ConfigError("unknown config key '" + (scope.empty() ? key : scope + "." + key) + "'");
    }
  }
}

template <typename T>
void load_field(const json& obj, const std::string& key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for config key '" + key + "': " + e.what());
  }
}

}  // namespace

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be an object");

  RunConfig cfg;
  check_keys(root, "", {"env", "geometry", "schedule", "grpo", "rewards", "policy", "selection",
                        "run"});

  if (root.contains("geometry")) {
    const json& g = root["geometry"];
    check_keys(g, "geometry", {"frames_per_segment", "h", "w", "scenes", "dim"});
    load_field(g, "frames_per_segment", cfg.env.geometry.frames_per_segment);
    load_field(g, "h", cfg.env.geometry.frame_h);
    load_field(g, "w", cfg.env.geometry.frame_w);
    load_field(g, "scenes", cfg.env.geometry.segments);
    load_field(g, "dim", cfg.env.geometry.dim);
  }
  if (root.contains("env")) {
    const json& e = root["env"];
    check_keys(e, "env",
               {"seed", "identity_dim", "semantic_dim", "scene0_roles", "distractor_norm",
                "distractor_sem_norm", "jitter"});
    load_field(e, "seed", cfg.env.seed);
    load_field(e, "identity_dim", cfg.env.identity_dim);
    load_field(e, "semantic_dim", cfg.env.semantic_dim);
    load_field(e, "scene0_roles", cfg.env.scene0_roles);
    load_field(e, "distractor_norm", cfg.env.distractor_norm);
    load_field(e, "distractor_sem_norm", cfg.env.distractor_sem_norm);
    load_field(e, "jitter", cfg.env.jitter);
  }
  if (root.contains("schedule")) {
    const json& s = root["schedule"];
    check_keys(s, "schedule", {"alpha", "sigma"});
    load_field(s, "alpha", cfg.env.schedule.alpha);
    load_field(s, "sigma", cfg.env.schedule.sigma);
  }
  if (root.contains("grpo")) {
    const json& g = root["grpo"];
    check_keys(g, "grpo",
               {"group_size", "clip", "learning_rate", "iterations", "inner_epochs", "std_floor",
                "beta1", "beta2", "weight_decay", "adam_eps"});
    load_field(g, "group_size", cfg.grpo.group_size);
    load_field(g, "clip", cfg.grpo.clip);
    load_field(g, "learning_rate", cfg.grpo.learning_rate);
    load_field(g, "iterations", cfg.grpo.iterations);
    load_field(g, "inner_epochs", cfg.grpo.inner_epochs);
    load_field(g, "std_floor", cfg.grpo.std_floor);
    load_field(g, "beta1", cfg.grpo.beta1);
    load_field(g, "beta2", cfg.grpo.beta2);
    load_field(g, "weight_decay", cfg.grpo.weight_decay);
    load_field(g, "adam_eps", cfg.grpo.adam_eps);
  }
  if (root.contains("rewards")) {
    const json& r = root["rewards"];
    check_keys(r, "rewards", {"content_keyframes", "clip_frames", "artifact_threshold"});
    load_field(r, "content_keyframes", cfg.rewards.content_keyframes);
    load_field(r, "clip_frames", cfg.rewards.clip_frames);
    load_field(r, "artifact_threshold", cfg.rewards.artifact_threshold);
  }
  if (root.contains("policy")) {
    const json& p = root["policy"];
    check_keys(p, "policy", {"dim", "cross_attention_blocks", "linear_layers"});
    load_field(p, "dim", cfg.policy.dim);
    load_field(p, "cross_attention_blocks", cfg.policy.cross_attention_blocks);
    load_field(p, "linear_layers", cfg.policy.linear_layers);
  }

  // Geometry may have changed the token count; recompute dependent defaults
  // before selection overrides them.
  cfg.policy.dim = root.contains("policy") && root["policy"].contains("dim")
                       ? cfg.policy.dim
                       : cfg.env.geometry.dim;
  bool budget_set = false;
  if (root.contains("selection")) {
    const json& s = root["selection"];
    check_keys(s, "selection", {"budget", "strategy", "global_frames", "local_frames"});
    if (s.contains("budget")) {
      load_field(s, "budget", cfg.budget_k);
      budget_set = true;
    }
    if (s.contains("strategy")) {
      std::string name;
      load_field(s, "strategy", name);
      cfg.strategy = strategy_from_string(name);
    }
    load_field(s, "global_frames", cfg.global_frames);
    load_field(s, "local_frames", cfg.local_frames);
  }
  if (!budget_set) {
    cfg.budget_k = 6 * cfg.env.geometry.tokens_per_frame();  // the paper-default budget
    cfg.budget_k = std::min(cfg.budget_k, cfg.env.geometry.tokens_per_segment());
  }
  if (root.contains("run")) {
    const json& r = root["run"];
    check_keys(r, "run", {"seed", "output_dir", "jobs", "reset_policy_per_scene"});
    load_field(r, "seed", cfg.seed);
    load_field(r, "output_dir", cfg.output_dir);
    load_field(r, "jobs", cfg.jobs);
    load_field(r, "reset_policy_per_scene", cfg.reset_policy_per_scene);
  }

  cfg.validate();
  return cfg;
}

void write_config(const RunConfig& cfg, const std::string& path) {
  json root;
  root["geometry"] = {{"frames_per_segment", cfg.env.geometry.frames_per_segment},
                      {"h", cfg.env.geometry.frame_h},
                      {"w", cfg.env.geometry.frame_w},
                      {"scenes", cfg.env.geometry.segments},
                      {"dim", cfg.env.geometry.dim}};
  root["env"] = {{"seed", cfg.env.seed},
                 {"identity_dim", cfg.env.identity_dim},
                 {"semantic_dim", cfg.env.semantic_dim},
                 {"scene0_roles", cfg.env.scene0_roles},
                 {"distractor_norm", cfg.env.distractor_norm},
                 {"distractor_sem_norm", cfg.env.distractor_sem_norm},
                 {"jitter", cfg.env.jitter}};
  root["schedule"] = {{"alpha", cfg.env.schedule.alpha}, {"sigma", cfg.env.schedule.sigma}};
  root["grpo"] = {{"group_size", cfg.grpo.group_size},
                  {"clip", cfg.grpo.clip},
                  {"learning_rate", cfg.grpo.learning_rate},
                  {"iterations", cfg.grpo.iterations},
                  {"inner_epochs", cfg.grpo.inner_epochs},
                  {"std_floor", cfg.grpo.std_floor},
                  {"beta1", cfg.grpo.beta1},
                  {"beta2", cfg.grpo.beta2},
                  {"weight_decay", cfg.grpo.weight_decay},
                  {"adam_eps", cfg.grpo.adam_eps}};
  root["rewards"] = {{"content_keyframes", cfg.rewards.content_keyframes},
                     {"clip_frames", cfg.rewards.clip_frames},
                     {"artifact_threshold", cfg.rewards.artifact_threshold}};
  root["policy"] = {{"dim", cfg.policy.dim},
                    {"cross_attention_blocks", cfg.policy.cross_attention_blocks},
                    {"linear_layers", cfg.policy.linear_layers}};
  root["selection"] = {{"budget", cfg.budget_k},
                       {"strategy", strategy_name(cfg.strategy)},
                       {"global_frames", cfg.global_frames},
                       {"local_frames", cfg.local_frames}};
  root["run"] = {{"seed", cfg.seed},
                 {"output_dir", cfg.output_dir},
                 {"jobs", cfg.jobs},
                 {"reset_policy_per_scene", cfg.reset_policy_per_scene}};

  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << root.dump(2) << "\n";
}

}  // namespace ctxsel
