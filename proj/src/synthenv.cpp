#include "ctxsel/synthenv.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "ctxsel/errors.hpp"

namespace ctxsel {

void EnvConfig::validate() const {
  if (geometry.dim < 2 * (identity_dim + semantic_dim)) {
    throw ConfigError("model dim too small for the requested subspaces");
  }
  if (scene0_roles.size() != geometry.tokens_per_segment()) {
    throw ConfigError("scene-0 role string length must equal tokens per segment");
  }
  std::size_t subjects = 0;
  for (char c : scene0_roles) {
    if (c != 'S' && c != 'B' && c != 'D') throw ConfigError("scene-0 roles must be S, B or D");
    if (c == 'S') ++subjects;
  }
  if (subjects == 0) throw ConfigError("scene-0 must contain at least one subject token");
  schedule.validate();
}

namespace {

// Orthonormal columns via modified Gram-Schmidt over seeded Gaussian draws.
Matrix orthonormal_columns(std::size_t dim, std::size_t count, Rng& rng) {
  Matrix basis(dim, count);
  for (std::size_t c = 0; c < count; ++c) {
    Vector v(dim);
    for (double& x : v) x = rng.normal();
    for (std::size_t prev = 0; prev < c; ++prev) {
      double proj = 0.0;
      for (std::size_t i = 0; i < dim; ++i) proj += v[i] * basis(i, prev);
      for (std::size_t i = 0; i < dim; ++i) v[i] -= proj * basis(i, prev);
    }
    const double n = norm(v);
    if (n < 1e-9) throw NumericError("degenerate basis draw");
    for (std::size_t i = 0; i < dim; ++i) basis(i, c) = v[i] / n;
  }
  return basis;
}

Vector column(const Matrix& m, std::size_t c) {
  Vector v(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) v[i] = m(i, c);
  return v;
}

// Unit vector inside the span of the given columns.
Vector subspace_unit(const Matrix& basis, Rng& rng) {
  Vector coords(basis.cols());
  for (double& x : coords) x = rng.normal();
  Vector v(basis.rows(), 0.0);
  for (std::size_t c = 0; c < basis.cols(); ++c)
    for (std::size_t i = 0; i < basis.rows(); ++i) v[i] += coords[c] * basis(i, c);
  const double n = norm(v);
  for (double& x : v) x /= n;
  return v;
}

Vector project_coords(const Matrix& basis, const Vector& v) {
  Vector out(basis.cols(), 0.0);
  for (std::size_t c = 0; c < basis.cols(); ++c)
    for (std::size_t i = 0; i < basis.rows(); ++i) out[c] += basis(i, c) * v[i];
  return out;
}

}  // namespace

SynthEnv SynthEnv::build(const EnvConfig& config) {
  config.validate();
  const std::size_t dim = config.geometry.dim;

  SynthEnv env;
  env.config_ = config;

  for (char c : config.scene0_roles) {
    env.roles_.push_back(c == 'S'   ? TokenRole::subject
                         : c == 'B' ? TokenRole::scene_bg
                                    : TokenRole::distractor);
  }
  const std::size_t n_distractors = static_cast<std::size_t>(
      std::count(env.roles_.begin(), env.roles_.end(), TokenRole::distractor));

  Rng basis_rng = Rng::derive(config.seed, 0xba515, 0, 0);
  const std::size_t extra = std::max<std::size_t>(n_distractors, 1);
  Matrix all = orthonormal_columns(dim, config.identity_dim + config.semantic_dim + extra,
                                   basis_rng);
  env.identity_basis_ = Matrix(dim, config.identity_dim);
  env.semantic_basis_ = Matrix(dim, config.semantic_dim);
  env.distractor_dirs_ = Matrix(dim, extra);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t c = 0; c < config.identity_dim; ++c) env.identity_basis_(i, c) = all(i, c);
    for (std::size_t c = 0; c < config.semantic_dim; ++c)
      env.semantic_basis_(i, c) = all(i, config.identity_dim + c);
    for (std::size_t c = 0; c < extra; ++c)
      env.distractor_dirs_(i, c) = all(i, config.identity_dim + config.semantic_dim + c);
  }

  Rng content_rng = Rng::derive(config.seed, 0xc037e37, 0, 0);
  env.identity_vector_ = subspace_unit(env.identity_basis_, content_rng);
  for (std::size_t l = 0; l < config.geometry.segments; ++l) {
    env.scene_action_.push_back(subspace_unit(env.semantic_basis_, content_rng));
    env.scene_background_.push_back(subspace_unit(env.semantic_basis_, content_rng));
  }
  const Vector clutter_dir = subspace_unit(env.semantic_basis_, content_rng);

  // Scene-0 content per role. Jitter streams are keyed by (role, occurrence)
  // so permuting the role layout permutes token content exactly. Jitter is
  // projected off the identity vector: otherwise the scale-free cosine turns
  // subject-free frames into arbitrary-direction identity readings.
  const std::size_t tokens = config.geometry.tokens_per_segment();
  Matrix content(tokens, dim);
  std::size_t seen_subject = 0, seen_bg = 0, seen_distractor = 0;
  for (std::size_t i = 0; i < tokens; ++i) {
    Vector tok(dim, 0.0);
    std::uint64_t role_tag = 0;
    std::size_t occurrence = 0;
    switch (env.roles_[i]) {
      case TokenRole::subject:
        role_tag = 1;
        occurrence = seen_subject++;
        tok = env.identity_vector_;
        break;
      case TokenRole::scene_bg:
        role_tag = 2;
        occurrence = seen_bg++;
        tok = env.scene_background_[0];
        break;
      case TokenRole::distractor: {
        role_tag = 3;
        occurrence = seen_distractor++;
        const Vector d = column(env.distractor_dirs_, occurrence % env.distractor_dirs_.cols());
        for (std::size_t j = 0; j < dim; ++j) {
          tok[j] = config.distractor_norm * d[j] + config.distractor_sem_norm * clutter_dir[j];
        }
        break;
      }
    }
    Rng jitter_rng = Rng::derive(config.seed, 0x717 + role_tag, occurrence, 0);
    Vector jit(dim);
    for (double& x : jit) x = config.jitter * jitter_rng.normal();
    double along_u = 0.0;
    for (std::size_t j = 0; j < dim; ++j) along_u += jit[j] * env.identity_vector_[j];
    for (std::size_t j = 0; j < dim; ++j) tok[j] += jit[j] - along_u * env.identity_vector_[j];
    content.set_row(i, tok);
  }

  // The constructed segment is treated as already denoised; cached states at
  // noisier timesteps get the forward-noise profile of the schedule.
  SegmentState seg;
  seg.segment_index = 0;
  seg.prompt_id = 0;
  seg.frames = config.geometry.frames_per_segment;
  seg.tokens_per_frame = config.geometry.tokens_per_frame();
  seg.tokens = content;
  const std::size_t timesteps = config.schedule.steps();
  for (std::size_t t = 1; t <= timesteps; ++t) {
    const double noise_scale = config.schedule.sigma[timesteps - t];
    Matrix layer = content;
    if (noise_scale > 0.0) {
      Rng layer_rng = Rng::derive(config.seed, 0x5ce7e0, t, 0);
      for (double& x : layer.storage()) x += noise_scale * layer_rng.normal();
    }
    seg.timestep_states.push_back(std::move(layer));
  }
  env.scene0_ = std::move(seg);

  GenWeights weights = GenWeights::seeded(config.seed, dim, timesteps);
  // Project the prompt term onto the semantic subspace so generated frames
  // carry the current prompt's semantics and nothing else from the prompt.
  Matrix proj(dim, dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < config.semantic_dim; ++c)
        s += env.semantic_basis_(i, c) * env.semantic_basis_(j, c);
      proj(i, j) = s;
    }
  weights.prompt_proj = std::move(proj);
  env.generator_ = ToyGenerator(std::move(weights));

  const Matrix id_basis = env.identity_basis_;
  env.phi_ = EmbeddingProvider{
      "identity-subspace", config.identity_dim, [id_basis](const Matrix& frame) {
        Vector mean(frame.cols(), 0.0);
        for (std::size_t i = 0; i < frame.rows(); ++i)
          for (std::size_t j = 0; j < frame.cols(); ++j) mean[j] += frame(i, j);
        for (double& x : mean) x /= static_cast<double>(frame.rows());
        return project_coords(id_basis, mean);
      }};
  const Matrix sem_basis = env.semantic_basis_;
  env.psi_ = EmbeddingProvider{
      "semantic-subspace", config.semantic_dim, [sem_basis](const Matrix& frame) {
        Vector mean(frame.cols(), 0.0);
        for (std::size_t i = 0; i < frame.rows(); ++i)
          for (std::size_t j = 0; j < frame.cols(); ++j) mean[j] += frame(i, j);
        for (double& x : mean) x /= static_cast<double>(frame.rows());
        return project_coords(sem_basis, mean);
      }};

  return env;
}

RewardSuite SynthEnv::reward_suite(const RewardConfig& rc) const {
  RewardSuite suite;
  suite.phi = phi_;
  suite.psi = psi_;
  suite.detector = consecutive_frame_detector(rc.artifact_threshold);
  suite.config = rc;
  return suite;
}

GenerationState SynthEnv::initial_state() const {
  GenerationState state(config_.geometry, config_.schedule.steps());
  state.append(scene0_);
  return state;
}

PromptEmbedding SynthEnv::prompt(std::size_t scene) const {
  if (scene >= config_.geometry.segments) throw ConfigError("prompt scene index out of range");
  Matrix tokens(3, config_.geometry.dim);
  tokens.set_row(0, identity_vector_);
  tokens.set_row(1, scene_action_[scene]);
  tokens.set_row(2, scene_background_[scene]);
  return PromptEmbedding(tokens);
}

namespace {

double subset_reward(const SynthEnv& env, const GenerationState& state,
                     const PromptEmbedding& prompt, const std::vector<std::size_t>& subset,
                     const RewardSuite& suite) {
  RankingSelection sel;
  sel.indices = subset;
  sel.total_candidates = state.history_tokens();
  // Every subset is denoised from the same initial draw; only the selection
  // differs.
  Rng rng = Rng::derive(env.config().seed, 0x04ac1e, 0, 0);
  DenoiseOptions opts;
  opts.noise_free = true;
  try {
    const SegmentState seg = denoise_segment(state, sel, prompt, env.config().schedule,
                                             env.generator(), rng, opts);
    const RewardBreakdown r = hybrid_reward(seg, state, prompt, suite);
    return r.total;
  } catch (const NumericError&) {
    return 0.0;  // degenerate subsets score zero, same as training rollouts
  }
}

void for_each_subset(std::size_t l, std::size_t k,
                     const std::function<void(const std::vector<std::size_t>&)>& fn) {
  std::vector<std::size_t> subset(k);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t start, std::size_t depth) {
    if (depth == k) {
      fn(subset);
      return;
    }
    for (std::size_t i = start; i + (k - depth) <= l; ++i) {
      subset[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
}

}  // namespace

std::pair<std::vector<std::size_t>, double> oracle_best_selection(const SynthEnv& env,
                                                                  const GenerationState& state,
                                                                  const PromptEmbedding& prompt,
                                                                  std::size_t k,
                                                                  const RewardConfig& rc) {
  const std::size_t l = state.history_tokens();
  if (l > 12 || k > 4) throw CapacityError("selection oracle limited to L <= 12, k <= 4");
  if (k < 1 || k > l) throw BudgetError("oracle budget outside [1, L]");
  const RewardSuite suite = env.reward_suite(rc);

  std::vector<std::size_t> best;
  double best_reward = 0.0;
  bool first = true;
  for_each_subset(l, k, [&](const std::vector<std::size_t>& subset) {
    const double r = subset_reward(env, state, prompt, subset, suite);
    if (first || r > best_reward) {
      best = subset;
      best_reward = r;
      first = false;
    }
  });
  return {best, best_reward};
}

double uniform_policy_expected_reward(const SynthEnv& env, const GenerationState& state,
                                      const PromptEmbedding& prompt, std::size_t k,
                                      const RewardConfig& rc) {
  const std::size_t l = state.history_tokens();
  if (l > 12 || k > 4) throw CapacityError("selection oracle limited to L <= 12, k <= 4");
  const RewardSuite suite = env.reward_suite(rc);
  double total = 0.0;
  std::size_t count = 0;
  for_each_subset(l, k, [&](const std::vector<std::size_t>& subset) {
    total += subset_reward(env, state, prompt, subset, suite);
    ++count;
  });
  return total / static_cast<double>(count);
}

}  // namespace ctxsel
