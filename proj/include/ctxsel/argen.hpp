#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "ctxsel/matrix.hpp"
#include "ctxsel/plsampler.hpp"
#include "ctxsel/policynet.hpp"
#include "ctxsel/rng.hpp"

namespace ctxsel {

// Token layout of one run: n frames per segment, h x w tokens per frame,
// N segments total, model width dim.
struct Geometry {
  std::size_t frames_per_segment = 4;  // n
  std::size_t frame_h = 1;             // h
  std::size_t frame_w = 1;             // w
  std::size_t segments = 4;            // N
  std::size_t dim = 16;

  std::size_t tokens_per_frame() const { return frame_h * frame_w; }
  std::size_t tokens_per_segment() const { return frames_per_segment * tokens_per_frame(); }
};

// Denoising coefficients indexed by step order: step j consumes the state at
// timestep T-j and produces the state at timestep T-j-1. The last sigma must
// be zero so the final step emits a clean segment.
struct NoiseSchedule {
  std::vector<double> alpha;
  std::vector<double> sigma;

  static NoiseSchedule default3() { return NoiseSchedule{{0.5, 0.8, 1.0}, {0.6, 0.3, 0.0}}; }

  std::size_t steps() const { return alpha.size(); }
  void validate() const;
};

struct TokenMeta {
  std::size_t segment = 0;
  std::size_t frame = 0;
  std::size_t spatial = 0;
};

// One generated (or constructed) segment. timestep_states[t-1] holds the
// segment's token matrix as it looked when consumed at denoise timestep t;
// these become the per-timestep context cache entries once appended.
struct SegmentState {
  std::size_t segment_index = 0;
  std::size_t prompt_id = 0;
  std::size_t frames = 0;
  std::size_t tokens_per_frame = 0;
  Matrix tokens;                       // (frames * tokens_per_frame) x dim, clean
  std::vector<Matrix> timestep_states;  // T entries, same shape as tokens

  Matrix frame_tokens(std::size_t frame) const;
  bool all_finite() const;
};

// Per-denoise-timestep key/value store over all history tokens. Keys and
// values use identity projections at this scale, so both views expose the
// cached token states directly.
class KVCache {
 public:
  KVCache() = default;
  KVCache(std::size_t timesteps, std::size_t dim);

  void append(const SegmentState& seg);

  std::size_t length() const { return meta_.size(); }  // L
  std::size_t timesteps() const { return layers_.size(); }
  std::size_t dim() const { return dim_; }

  // t in [1, timesteps]
  const Matrix& keys_at(std::size_t t) const { return layer(t); }
  const Matrix& values_at(std::size_t t) const { return layer(t); }

  Matrix gather(std::size_t t, const std::vector<std::size_t>& indices) const;

  // Features handed to the selection policy: one canonical value vector per
  // token, taken from the least-noisy cached layer (timestep 1).
  const Matrix& policy_features() const { return layer(1); }

  const std::vector<TokenMeta>& meta() const { return meta_; }

 private:
  const Matrix& layer(std::size_t t) const;

  std::size_t dim_ = 0;
  std::vector<Matrix> layers_;  // index t-1
  std::vector<TokenMeta> meta_;
};

// The growing multi-scene sequence: committed segments, their prompt ids and
// the cumulative per-timestep cache.
class GenerationState {
 public:
  GenerationState() = default;
  GenerationState(const Geometry& geometry, std::size_t timesteps);

  // Extends the cache at every denoise timestep; segments must arrive in
  // order.
  void append(SegmentState seg);

  std::size_t history_tokens() const { return cache_.length(); }
  const KVCache& cache() const { return cache_; }
  const std::vector<SegmentState>& segments() const { return segments_; }
  const Geometry& geometry() const { return geometry_; }

 private:
  Geometry geometry_;
  KVCache cache_;
  std::vector<SegmentState> segments_;
};

// Fixed (non-learned) weights of the toy few-step generator.
struct GenWeights {
  std::size_t dim = 0;
  Matrix query_proj;           // 3*dim x dim, bounded entries
  Matrix prompt_proj;          // dim x dim
  std::vector<Vector> time_enc;  // unit vector per timestep, index t-1

  static GenWeights seeded(std::uint64_t seed, std::size_t dim, std::size_t timesteps);
};

// Deterministic few-step generator. Each output token is the attention of a
// query built from [noisy token | prompt mean | timestep encoding] over the
// selected context keys/values, plus a prompt projection term. With no
// context rows (first segment only) the attention term is zero.
class ToyGenerator {
 public:
  explicit ToyGenerator(GenWeights weights);
  ToyGenerator(const ToyGenerator& other)
      : weights_(other.weights_), calls_(other.calls_.load()), key_rows_(other.key_rows_.load()) {}
  ToyGenerator& operator=(const ToyGenerator& other) {
    weights_ = other.weights_;
    calls_.store(other.calls_.load());
    key_rows_.store(other.key_rows_.load());
    return *this;
  }

  Matrix step(const Matrix& noisy_tokens, std::size_t timestep, const Matrix& keys,
              const Matrix& values, const PromptEmbedding& prompt, bool first_segment) const;

  std::size_t dim() const { return weights_.dim; }
  const GenWeights& weights() const { return weights_; }

  // Instrumentation: context key rows touched per attention call.
  std::uint64_t attention_calls() const { return calls_.load(); }
  std::uint64_t key_rows_touched() const { return key_rows_.load(); }
  void reset_counters() const;

 private:
  GenWeights weights_;
  mutable std::atomic<std::uint64_t> calls_{0};
  mutable std::atomic<std::uint64_t> key_rows_{0};
};

struct DenoiseOptions {
  // Suppress the per-step refresh noise (the initial state still comes from
  // the caller's stream); used by the selection oracle.
  bool noise_free = false;
  // Bypass the gather path and attend over the full cache. Kept as a second
  // code route so the all-tokens selection can be checked against it.
  bool full_context = false;
};

// Runs the reverse process for the next segment: T generator steps with
// per-timestep context gathered from the cache at the matching timestep.
// Selection order does not matter here; indices are canonicalized before the
// gather. An empty selection is only legal when the history is empty.
SegmentState denoise_segment(const GenerationState& state, const RankingSelection& selection,
                             const PromptEmbedding& prompt, const NoiseSchedule& schedule,
                             const ToyGenerator& gen, Rng& rng, const DenoiseOptions& opts = {});

}  // namespace ctxsel
