#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "ctxsel/argen.hpp"
#include "ctxsel/policynet.hpp"
#include "ctxsel/rewards.hpp"

namespace ctxsel {

struct GrpoConfig {
  std::size_t group_size = 10;  // G
  double clip = 0.2;            // delta
  double learning_rate = 0.001;
  std::size_t iterations = 20;  // I, per scene
  std::size_t inner_epochs = 1;
  double std_floor = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.0;
  double adam_eps = 1e-8;

  void validate() const;
};

// (r_i - mean) / max(population std, eps); all zeros when the group is
// (near-)degenerate so saturated reward groups skip the update instead of
// blowing up.
std::vector<double> compute_advantages(const std::vector<double>& rewards, double eps);

// Clipped surrogate without a KL term:
// mean_i min(rho_i A_i, clip(rho_i, 1-delta, 1+delta) A_i),
// rho_i = exp(logprob_new_i - logprob_old_i).
double grpo_objective(const std::vector<double>& logprob_new,
                      const std::vector<double>& logprob_old,
                      const std::vector<double>& advantages, double delta);

struct AdamWState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::size_t step = 0;

  static AdamWState like(const std::vector<const Matrix*>& params);
};

// Decoupled-weight-decay Adam descent step (pass the negated objective
// gradient to ascend).
void adamw_step(std::vector<Matrix*> params, const std::vector<Matrix>& grads, AdamWState& state,
                const GrpoConfig& config);

// One training-trace row; wall-clock is reported separately from the
// deterministic columns.
struct IterationStats {
  std::size_t scene = 0;
  std::size_t iteration = 0;
  double reward_mean = 0.0;
  double reward_max = 0.0;
  double reward_min = 0.0;
  double content_mean = 0.0;
  double clip_mean = 0.0;
  double artifact_mean = 0.0;
  double advantage_std = 0.0;
  // Greedy-selection overlap with the oracle-best set; -1 when no oracle.
  int oracle_overlap = -1;
  double wall_ms = 0.0;
};

struct TrainSceneConfig {
  GrpoConfig grpo;
  std::size_t budget_k = 6;
  NoiseSchedule schedule = NoiseSchedule::default3();
  std::uint64_t base_seed = 0;
  std::size_t scene_index = 0;
  std::size_t jobs = 1;
};

struct TrainSceneResult {
  RankingSelection greedy;
  RewardBreakdown committed_reward;
  std::vector<IterationStats> trace;
};

// Channel tags for derived RNG streams that must not collide with the
// per-(iteration, rollout) training streams.
inline constexpr std::uint64_t kCommitChannel = 0xffffffffull;
inline constexpr std::uint64_t kSelectChannel = 0xfffffffeull;

// Greedy top-k by score, descending, ties to the lower index.
RankingSelection greedy_topk(const ScoreVector& scores, std::size_t k);

// Inference-time GRPO for one scene: for each iteration snapshot the policy,
// sample a group of selections, denoise candidate segments against the
// frozen history, score them, normalize advantages inside the group and
// ascend the clipped objective. Afterwards the greedy selection generates
// the committed segment, which is appended to the state. Rollouts whose
// segment or rewards are invalid score zero instead of aborting the group.
TrainSceneResult train_scene(GenerationState& state, const PromptEmbedding& prompt,
                             std::size_t prompt_id, PolicyParams& policy, AdamWState& opt,
                             const ToyGenerator& gen, const RewardSuite& rewards,
                             const TrainSceneConfig& cfg,
                             const std::optional<std::vector<std::size_t>>& oracle_set = {});

}  // namespace ctxsel
