#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ctxsel/argen.hpp"
#include "ctxsel/matrix.hpp"
#include "ctxsel/policynet.hpp"

namespace ctxsel {

// Named deterministic map from a token matrix (frame tokens or prompt
// tokens) to a fixed-dim embedding. Stands in for the pretrained feature
// extractors; the synthetic environment supplies subspace projections.
struct EmbeddingProvider {
  std::string name;
  std::size_t out_dim = 0;
  std::function<Vector(const Matrix&)> embed;

  Vector operator()(const Matrix& tokens) const { return embed(tokens); }
};

// 1 when the segment is artifact-free, 0 otherwise.
using ArtifactDetector = std::function<int(const SegmentState&)>;

// Default synthetic detector: a segment is flagged when the mean cosine
// between consecutive frames falls below the threshold (frame-to-frame
// incoherence as the artifact proxy). Non-finite frames raise
// InvalidSegmentError; zero-norm frame pairs count as fully incoherent.
ArtifactDetector consecutive_frame_detector(double threshold);

struct RewardConfig {
  std::size_t content_keyframes = 8;  // E
  std::size_t clip_frames = 16;       // Q
  double artifact_threshold = 0.2;
};

struct RewardBreakdown {
  double content = 0.0;
  double clip = 0.0;
  int artifact = 0;
  double total = 0.0;
};

struct RewardSuite {
  EmbeddingProvider phi;  // identity features
  EmbeddingProvider psi;  // semantic features
  ArtifactDetector detector;
  RewardConfig config;
};

// Deterministic uniform-stride keyframe picks over [0, frames), first frame
// anchored.
std::vector<std::size_t> stride_sample(std::size_t frames, std::size_t count);

// Mean pairwise cosine between e keyframe embeddings of the new segment and
// e keyframe embeddings drawn across the whole preceding history.
double reward_content(const SegmentState& cur, const GenerationState& prev,
                      const EmbeddingProvider& phi, std::size_t e);

// Mean cosine between the prompt embedding and q sampled frame embeddings.
double reward_clip(const PromptEmbedding& prompt, const SegmentState& cur,
                   const EmbeddingProvider& psi, std::size_t q);

int reward_artifact(const SegmentState& cur, const ArtifactDetector& detector);

// r = r_content + r_clip + r_artifact.
RewardBreakdown hybrid_reward(const SegmentState& cur, const GenerationState& prev,
                              const PromptEmbedding& prompt, const RewardSuite& suite);

// Binary mask over frame pairs: M[i][j] == 1 iff clip(i) > clip(j), so each
// frame is compared only against frames of strictly earlier clips.
struct SimMask {
  std::size_t frames = 0;
  std::vector<std::size_t> clip_starts;
  std::vector<std::uint8_t> mask;  // row-major frames x frames

  bool at(std::size_t i, std::size_t j) const { return mask[i * frames + j] != 0; }
  std::size_t ones() const;
};

SimMask build_sim_mask(std::size_t frame_count, const std::vector<std::size_t>& clip_starts);

// Masked mean of the row-normalized Gram matrix: the cross-scene consistency
// metric. Evaluation-only; never used as a training reward.
double cross_scene_sim(const Matrix& frame_embeddings, const std::vector<std::size_t>& clip_starts);

}  // namespace ctxsel
