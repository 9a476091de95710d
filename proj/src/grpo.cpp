#include "ctxsel/grpo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "ctxsel/errors.hpp"

namespace ctxsel {

void GrpoConfig::validate() const {
  if (group_size < 2) throw GroupSizeError("group size must be >= 2");
  if (!(clip > 0.0 && clip < 1.0)) throw ConfigError("clip delta must lie in (0,1)");
  if (inner_epochs < 1) throw ConfigError("inner epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
}

std::vector<double> compute_advantages(const std::vector<double>& rewards, double eps) {
  const std::size_t g = rewards.size();
  if (g < 2) throw GroupSizeError("advantage normalization needs a group of >= 2");
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(g);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(g);  // population variance
  const double std = std::sqrt(var);

  std::vector<double> adv(g, 0.0);
  if (std < eps) return adv;  // degenerate group: no update signal
  for (std::size_t i = 0; i < g; ++i) adv[i] = (rewards[i] - mean) / std;
  return adv;
}

double grpo_objective(const std::vector<double>& logprob_new,
                      const std::vector<double>& logprob_old,
                      const std::vector<double>& advantages, double delta) {
  const std::size_t g = logprob_new.size();
  if (logprob_old.size() != g || advantages.size() != g) {
    throw ShapeError("grpo objective inputs must have equal length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    const double rho = std::exp(logprob_new[i] - logprob_old[i]);
    if (!std::isfinite(rho)) throw NumericError("non-finite importance ratio");
    const double clipped = std::clamp(rho, 1.0 - delta, 1.0 + delta);
    total += std::min(rho * advantages[i], clipped * advantages[i]);
  }
  return total / static_cast<double>(g);
}

AdamWState AdamWState::like(const std::vector<const Matrix*>& params) {
  AdamWState s;
  for (const Matrix* p : params) {
    s.m.emplace_back(p->rows(), p->cols());
    s.v.emplace_back(p->rows(), p->cols());
  }
  return s;
}

void adamw_step(std::vector<Matrix*> params, const std::vector<Matrix>& grads, AdamWState& state,
                const GrpoConfig& config) {
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.v.size()) {
    throw ShapeError("optimizer state does not match parameter list");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));

  for (std::size_t t = 0; t < params.size(); ++t) {
    Matrix& p = *params[t];
    const Matrix& g = grads[t];
    if (!p.same_shape(g)) throw ShapeError("gradient shape does not match parameter");
    Matrix& m = state.m[t];
    Matrix& v = state.v[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g.storage()[i];
      m.storage()[i] = config.beta1 * m.storage()[i] + (1.0 - config.beta1) * gi;
      v.storage()[i] = config.beta2 * v.storage()[i] + (1.0 - config.beta2) * gi * gi;
      const double mhat = m.storage()[i] / bc1;
      const double vhat = v.storage()[i] / bc2;
      double& x = p.storage()[i];
      x -= config.learning_rate * (mhat / (std::sqrt(vhat) + config.adam_eps) +
                                   config.weight_decay * x);
    }
  }
}

RankingSelection greedy_topk(const ScoreVector& scores, std::size_t k) {
  if (k < 1 || k > scores.size()) throw BudgetError("greedy budget outside [1, L]");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  RankingSelection sel;
  sel.total_candidates = scores.size();
  sel.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  sel.logprob = pl_logprob(scores, sel.indices);
  return sel;
}

namespace {

struct Rollout {
  RankingSelection selection;
  RewardBreakdown reward;
  bool valid = true;
};

Rollout run_rollout(const GenerationState& state, const PromptEmbedding& prompt,
                    const ScoreVector& scores, const ToyGenerator& gen, const RewardSuite& rewards,
                    const TrainSceneConfig& cfg, std::size_t iteration, std::size_t index) {
  Rng rng = Rng::derive(cfg.base_seed, cfg.scene_index, iteration, index);
  Rollout r;
  r.selection = sample_topk(scores, cfg.budget_k, rng);
  try {
    const SegmentState seg = denoise_segment(state, r.selection, prompt, cfg.schedule, gen, rng);
    r.reward.artifact = reward_artifact(seg, rewards.detector);
    r.reward.content = reward_content(seg, state, rewards.phi, rewards.config.content_keyframes);
    r.reward.clip = reward_clip(prompt, seg, rewards.psi, rewards.config.clip_frames);
    r.reward.total = r.reward.content + r.reward.clip + static_cast<double>(r.reward.artifact);
  } catch (const NumericError&) {
    // Invalid or degenerate rollout: keep the group statistics defined.
    r.reward = RewardBreakdown{};
    r.valid = false;
  }
  return r;
}

}  // namespace

TrainSceneResult train_scene(GenerationState& state, const PromptEmbedding& prompt,
                             std::size_t prompt_id, PolicyParams& policy, AdamWState& opt,
                             const ToyGenerator& gen, const RewardSuite& rewards,
                             const TrainSceneConfig& cfg,
                             const std::optional<std::vector<std::size_t>>& oracle_set) {
  cfg.grpo.validate();
  if (state.segments().empty()) {
    throw SequencingError("scene training requires at least one committed segment");
  }
  const std::size_t g = cfg.grpo.group_size;
  const Matrix& features = state.cache().policy_features();
  if (cfg.budget_k > state.history_tokens()) {
    throw BudgetError("selection budget exceeds history length");
  }

  TrainSceneResult result;

  for (std::size_t it = 0; it < cfg.grpo.iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();

    // Old-policy snapshot for this iteration; all rollouts sample under it.
    const ScoreVector scores_old = score_context(policy, features, prompt);

    std::vector<Rollout> rollouts(g);
    if (cfg.jobs <= 1) {
      for (std::size_t i = 0; i < g; ++i) {
        rollouts[i] = run_rollout(state, prompt, scores_old, gen, rewards, cfg, it, i);
      }
    } else {
      const std::size_t workers = std::min(cfg.jobs, g);
      std::vector<std::thread> threads;
      threads.reserve(workers);
      for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w]() {
          for (std::size_t i = w; i < g; i += workers) {
            rollouts[i] = run_rollout(state, prompt, scores_old, gen, rewards, cfg, it, i);
          }
        });
      }
      for (std::thread& th : threads) th.join();
    }

    std::vector<double> totals(g);
    for (std::size_t i = 0; i < g; ++i) totals[i] = rollouts[i].reward.total;
    const std::vector<double> advantages = compute_advantages(totals, cfg.grpo.std_floor);

    for (std::size_t epoch = 0; epoch < cfg.grpo.inner_epochs; ++epoch) {
      const ScoreVector scores_new = score_context(policy, features, prompt);
      ScoreVector upstream(scores_new.size(), 0.0);
      for (std::size_t i = 0; i < g; ++i) {
        if (advantages[i] == 0.0) continue;
        const double lp_new = pl_logprob(scores_new, rollouts[i].selection.indices);
        const double rho = std::exp(lp_new - rollouts[i].selection.logprob);
        if (!std::isfinite(rho)) throw NumericError("non-finite importance ratio");
        // The clipped min has zero gradient once the ratio leaves the trust
        // region on the favourable side.
        const bool active = advantages[i] > 0.0 ? rho <= 1.0 + cfg.grpo.clip
                                                : rho >= 1.0 - cfg.grpo.clip;
        if (!active) continue;
        const double w = rho * advantages[i] / static_cast<double>(g);
        const ScoreVector gsel = pl_logprob_grad(scores_new, rollouts[i].selection.indices);
        for (std::size_t j = 0; j < upstream.size(); ++j) upstream[j] += w * gsel[j];
      }
      PolicyGrads grads = score_context_backward(policy, features, prompt, upstream);
      for (Matrix& m : grads)
        for (double& x : m.storage()) x = -x;  // ascent
      adamw_step(policy.tensors(), grads, opt, cfg.grpo);
    }

    IterationStats row;
    row.scene = cfg.scene_index;
    row.iteration = it;
    row.reward_mean = std::accumulate(totals.begin(), totals.end(), 0.0) / static_cast<double>(g);
    row.reward_max = *std::max_element(totals.begin(), totals.end());
    row.reward_min = *std::min_element(totals.begin(), totals.end());
    for (std::size_t i = 0; i < g; ++i) {
      row.content_mean += rollouts[i].reward.content;
      row.clip_mean += rollouts[i].reward.clip;
      row.artifact_mean += static_cast<double>(rollouts[i].reward.artifact);
    }
    row.content_mean /= static_cast<double>(g);
    row.clip_mean /= static_cast<double>(g);
    row.artifact_mean /= static_cast<double>(g);
    double adv_var = 0.0;
    for (double a : advantages) adv_var += a * a;
    row.advantage_std = std::sqrt(adv_var / static_cast<double>(g));
    if (oracle_set) {
      const ScoreVector s = score_context(policy, features, prompt);
      const RankingSelection greedy = greedy_topk(s, cfg.budget_k);
      int overlap = 0;
      for (std::size_t idx : greedy.indices) {
        if (std::find(oracle_set->begin(), oracle_set->end(), idx) != oracle_set->end()) ++overlap;
      }
      row.oracle_overlap = overlap;
    }
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                      .count();
    result.trace.push_back(row);
  }

  // Commit: deterministic greedy selection under the trained scores.
  const ScoreVector final_scores = score_context(policy, features, prompt);
  result.greedy = greedy_topk(final_scores, cfg.budget_k);
  Rng commit_rng = Rng::derive(cfg.base_seed, cfg.scene_index, kCommitChannel, 0);
  SegmentState committed =
      denoise_segment(state, result.greedy, prompt, cfg.schedule, gen, commit_rng);
  committed.prompt_id = prompt_id;
  result.committed_reward.artifact = reward_artifact(committed, rewards.detector);
  result.committed_reward.content =
      reward_content(committed, state, rewards.phi, rewards.config.content_keyframes);
  result.committed_reward.clip =
      reward_clip(prompt, committed, rewards.psi, rewards.config.clip_frames);
  result.committed_reward.total = result.committed_reward.content + result.committed_reward.clip +
                                  static_cast<double>(result.committed_reward.artifact);
  state.append(std::move(committed));
  return result;
}

}  // namespace ctxsel
