#pragma once

#include <cstdint>
#include <string>

#include "ctxsel/grpo.hpp"
#include "ctxsel/policynet.hpp"
#include "ctxsel/rewards.hpp"
#include "ctxsel/synthenv.hpp"

namespace ctxsel {

enum class Strategy {
  policy,
  vanilla,
  random_per_token,
  random_per_frame,
  sliding_window,
  global_local,
  random_global_local,
};

Strategy strategy_from_string(const std::string& name);
std::string strategy_name(Strategy s);

// Everything a run needs; defaults describe the canonical eight-token
// environment. Loaded from a JSON file where every field is addressable and
// unknown keys are rejected.
struct RunConfig {
  EnvConfig env;
  GrpoConfig grpo;
  RewardConfig rewards;
  PolicyConfig policy;
  std::size_t budget_k = 3;
  Strategy strategy = Strategy::policy;
  // Global-local window split, in frames.
  std::size_t global_frames = 1;
  std::size_t local_frames = 1;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::size_t jobs = 1;
  bool reset_policy_per_scene = false;

  void validate() const;
};

RunConfig load_config(const std::string& path);
void write_config(const RunConfig& config, const std::string& path);

}  // namespace ctxsel
