#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ctxsel/argen.hpp"
#include "ctxsel/policynet.hpp"
#include "ctxsel/rewards.hpp"
#include "ctxsel/rng.hpp"

namespace ctxsel {

enum class TokenRole { subject, scene_bg, distractor };

// Cyclic mixed layout with at least one subject, for configs that change the
// geometry without pinning roles.
std::string default_scene0_roles(std::size_t tokens);

// Verifiable synthetic world: scene-0 tokens carry designed content in
// mutually orthogonal subspaces, the embedding providers are the matching
// projections, and prompts are built per scene. Role labels exist only for
// construction and oracle checks; the policy sees token content alone.
struct EnvConfig {
  std::uint64_t seed = 0;
  Geometry geometry{8, 1, 1, 4, 16};
  std::size_t identity_dim = 3;
  std::size_t semantic_dim = 4;
  // One letter per scene-0 token: S = subject, B = scene background,
  // D = distractor.
  std::string scene0_roles = "BSDSBSDB";
  double distractor_norm = 4.0;
  // Off-prompt semantic clutter carried by distractor tokens. Without it a
  // distractor is invisible to the cosine rewards and only the (noisy)
  // artifact channel would penalize it.
  double distractor_sem_norm = 1.5;
  double jitter = 0.02;
  NoiseSchedule schedule = NoiseSchedule::default3();

  void validate() const;
};

class SynthEnv {
 public:
  static SynthEnv build(const EnvConfig& config);

  const EnvConfig& config() const { return config_; }
  const ToyGenerator& generator() const { return generator_; }
  const EmbeddingProvider& phi() const { return phi_; }
  const EmbeddingProvider& psi() const { return psi_; }
  RewardSuite reward_suite(const RewardConfig& rc) const;

  const SegmentState& scene0() const { return scene0_; }
  GenerationState initial_state() const;

  PromptEmbedding prompt(std::size_t scene) const;
  const std::vector<TokenRole>& scene0_roles() const { return roles_; }
  const Vector& identity_vector() const { return identity_vector_; }
  const Matrix& identity_basis() const { return identity_basis_; }
  const Matrix& semantic_basis() const { return semantic_basis_; }

 private:
  EnvConfig config_;
  std::vector<TokenRole> roles_;
  Matrix identity_basis_;  // dim x identity_dim, orthonormal columns
  Matrix semantic_basis_;  // dim x semantic_dim, orthonormal columns
  Matrix distractor_dirs_;  // dim x n_distractors, orthonormal columns
  Vector identity_vector_;
  std::vector<Vector> scene_action_;      // per scene, in the semantic subspace
  std::vector<Vector> scene_background_;  // per scene, in the semantic subspace
  SegmentState scene0_;
  ToyGenerator generator_{GenWeights{}};
  EmbeddingProvider phi_;
  EmbeddingProvider psi_;
};

// Exhaustive size-k subset search under noise-free generation. Ties resolve
// to the lexicographically smallest index set. Guarded to L <= 12, k <= 4.
std::pair<std::vector<std::size_t>, double> oracle_best_selection(const SynthEnv& env,
                                                                  const GenerationState& state,
                                                                  const PromptEmbedding& prompt,
                                                                  std::size_t k,
                                                                  const RewardConfig& rc);

// Mean noise-free total reward across all size-k subsets (the uniform
// selection baseline the oracle is compared against).
double uniform_policy_expected_reward(const SynthEnv& env, const GenerationState& state,
                                      const PromptEmbedding& prompt, std::size_t k,
                                      const RewardConfig& rc);

// ---- Event Prompt Sets ----

struct PromptSetSpec {
  std::size_t identities = 12;
  std::size_t actions = 16;
  std::size_t backgrounds = 90;
  std::size_t prompts_per_set = 4;  // S
  std::size_t embed_dim = 16;
};

struct EventPromptSet {
  std::size_t identity = 0;
  std::vector<std::string> prompts;
  std::vector<Matrix> embeddings;  // one (3 x embed_dim) token matrix per prompt
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (action, background)
};

// Built-in concept pools rendered as "[Human] [Action] [Background]".
const std::vector<std::string>& human_pool();
const std::vector<std::string>& action_pool();
const std::vector<std::string>& background_pool();

// Each set fixes one identity and samples S distinct (action, background)
// pairs; prompt embeddings are hash-seeded from the pool indices so files
// regenerate byte-identically.
std::vector<EventPromptSet> generate_eps(const PromptSetSpec& spec, std::size_t count, Rng& rng);

}  // namespace ctxsel
