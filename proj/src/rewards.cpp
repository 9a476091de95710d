#include "ctxsel/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ctxsel/errors.hpp"

namespace ctxsel {

std::vector<std::size_t> stride_sample(std::size_t frames, std::size_t count) {
  if (frames == 0 || count == 0) throw DomainError("stride_sample over empty range");
  std::vector<std::size_t> out(count);
  if (count == 1) {
    out[0] = 0;
    return out;
  }
  for (std::size_t i = 0; i < count; ++i) {
    const double pos = static_cast<double>(i) * static_cast<double>(frames - 1) /
                       static_cast<double>(count - 1);
    out[i] = static_cast<std::size_t>(std::llround(pos));
  }
  return out;
}

namespace {

std::vector<Matrix> history_frames(const GenerationState& prev) {
  std::vector<Matrix> out;
  for (const SegmentState& seg : prev.segments()) {
    for (std::size_t f = 0; f < seg.frames; ++f) out.push_back(seg.frame_tokens(f));
  }
  return out;
}

}  // namespace

double reward_content(const SegmentState& cur, const GenerationState& prev,
                      const EmbeddingProvider& phi, std::size_t e) {
  if (prev.segments().empty()) throw DomainError("content reward requires nonempty history");
  if (e < 1) throw DomainError("content reward requires e >= 1");
  const std::vector<Matrix> prev_frames = history_frames(prev);
  if (e > cur.frames || e > prev_frames.size()) {
    throw DomainError("content keyframe count exceeds available frames");
  }

  std::vector<Vector> cur_emb;
  for (std::size_t f : stride_sample(cur.frames, e)) cur_emb.push_back(phi(cur.frame_tokens(f)));
  std::vector<Vector> prev_emb;
  for (std::size_t f : stride_sample(prev_frames.size(), e)) prev_emb.push_back(phi(prev_frames[f]));

  double total = 0.0;
  for (const Vector& a : prev_emb)
    for (const Vector& b : cur_emb) total += cosine(b, a);
  return total / static_cast<double>(e * e);
}

double reward_clip(const PromptEmbedding& prompt, const SegmentState& cur,
                   const EmbeddingProvider& psi, std::size_t q) {
  if (q < 1) throw DomainError("clip reward requires q >= 1");
  const Vector prompt_emb = psi(prompt.tokens);
  double total = 0.0;
  for (std::size_t f : stride_sample(cur.frames, q)) {
    total += cosine(prompt_emb, psi(cur.frame_tokens(f)));
  }
  return total / static_cast<double>(q);
}

ArtifactDetector consecutive_frame_detector(double threshold) {
  return [threshold](const SegmentState& seg) -> int {
    if (!seg.tokens.all_finite()) {
      throw InvalidSegmentError("segment contains non-finite values");
    }
    if (seg.frames < 2) return 1;
    double mean = 0.0;
    for (std::size_t f = 0; f + 1 < seg.frames; ++f) {
      Vector a(seg.tokens_per_frame * seg.tokens.cols());
      Vector b(a.size());
      const Matrix fa = seg.frame_tokens(f);
      const Matrix fb = seg.frame_tokens(f + 1);
      std::copy(fa.storage().begin(), fa.storage().end(), a.begin());
      std::copy(fb.storage().begin(), fb.storage().end(), b.begin());
      double c = -1.0;  // zero-norm frames: maximally incoherent
      if (norm(a) > 0.0 && norm(b) > 0.0) c = cosine(a, b);
      mean += c;
    }
    mean /= static_cast<double>(seg.frames - 1);
    return mean >= threshold ? 1 : 0;
  };
}

RewardBreakdown hybrid_reward(const SegmentState& cur, const GenerationState& prev,
                              const PromptEmbedding& prompt, const RewardSuite& suite) {
  RewardBreakdown r;
  r.artifact = reward_artifact(cur, suite.detector);
  r.content = reward_content(cur, prev, suite.phi, suite.config.content_keyframes);
  r.clip = reward_clip(prompt, cur, suite.psi, suite.config.clip_frames);
  r.total = r.content + r.clip + static_cast<double>(r.artifact);
  return r;
}

int reward_artifact(const SegmentState& cur, const ArtifactDetector& detector) {
  return detector(cur) ? 1 : 0;
}

std::size_t SimMask::ones() const {
  std::size_t n = 0;
  for (std::uint8_t v : mask) n += v;
  return n;
}

namespace {

std::vector<std::size_t> clip_of_frame(std::size_t frames,
                                       const std::vector<std::size_t>& clip_starts) {
  if (clip_starts.empty() || clip_starts.front() != 0) {
    throw ConfigError("clip boundaries must start at frame 0");
  }
  for (std::size_t i = 1; i < clip_starts.size(); ++i) {
    if (clip_starts[i] <= clip_starts[i - 1]) {
      throw ConfigError("clip boundaries must be strictly increasing");
    }
  }
  if (clip_starts.back() >= frames) throw ConfigError("clip boundary beyond frame count");

  std::vector<std::size_t> clip(frames, 0);
  std::size_t c = 0;
  for (std::size_t f = 0; f < frames; ++f) {
    while (c + 1 < clip_starts.size() && f >= clip_starts[c + 1]) ++c;
    clip[f] = c;
  }
  return clip;
}

}  // namespace

SimMask build_sim_mask(std::size_t frame_count, const std::vector<std::size_t>& clip_starts) {
  const std::vector<std::size_t> clip = clip_of_frame(frame_count, clip_starts);
  SimMask m;
  m.frames = frame_count;
  m.clip_starts = clip_starts;
  m.mask.assign(frame_count * frame_count, 0);
  for (std::size_t i = 0; i < frame_count; ++i)
    for (std::size_t j = 0; j < frame_count; ++j)
      if (clip[i] > clip[j]) m.mask[i * frame_count + j] = 1;
  return m;
}

double cross_scene_sim(const Matrix& frame_embeddings,
                       const std::vector<std::size_t>& clip_starts) {
  const std::size_t f = frame_embeddings.rows();
  if (f < 2 || clip_starts.size() < 2) {
    throw NoValidPairsError("cross-scene similarity needs at least two clips");
  }
  const SimMask mask = build_sim_mask(f, clip_starts);

  Matrix normalized(f, frame_embeddings.cols());
  for (std::size_t i = 0; i < f; ++i) {
    Vector r = frame_embeddings.row(i);
    const double n = norm(r);
    if (n == 0.0) throw DegenerateVectorError("zero-norm frame embedding");
    for (double& x : r) x /= n;
    normalized.set_row(i, r);
  }

  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < f; ++i) {
    for (std::size_t j = 0; j < f; ++j) {
      if (!mask.at(i, j)) continue;
      total += dot(normalized.row(i), normalized.row(j));
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

}  // namespace ctxsel
