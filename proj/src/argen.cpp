#include "ctxsel/argen.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ctxsel/errors.hpp"

namespace ctxsel {

void NoiseSchedule::validate() const {
  if (alpha.empty() || alpha.size() != sigma.size()) {
    throw ConfigError("noise schedule needs matching non-empty alpha/sigma");
  }
  for (double a : alpha) {
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("alpha coefficients must lie in [0,1]");
  }
  for (double s : sigma) {
    if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("sigma coefficients must lie in [0,1]");
  }
  if (sigma.back() != 0.0) throw ConfigError("final sigma must be zero");
}

Matrix SegmentState::frame_tokens(std::size_t frame) const {
  Matrix out(tokens_per_frame, tokens.cols());
  for (std::size_t i = 0; i < tokens_per_frame; ++i)
    out.set_row(i, tokens.row(frame * tokens_per_frame + i));
  return out;
}

bool SegmentState::all_finite() const {
  if (!tokens.all_finite()) return false;
  for (const Matrix& m : timestep_states) {
    if (!m.all_finite()) return false;
  }
  return true;
}

KVCache::KVCache(std::size_t timesteps, std::size_t dim) : dim_(dim) {
  layers_.assign(timesteps, Matrix(0, dim));
}

const Matrix& KVCache::layer(std::size_t t) const {
  if (t < 1 || t > layers_.size()) throw ShapeError("cache timestep out of range");
  return layers_[t - 1];
}

void KVCache::append(const SegmentState& seg) {
  if (seg.timestep_states.size() != layers_.size()) {
    throw ConfigError("segment timestep states do not match cache depth");
  }
  const std::size_t new_rows = seg.tokens.rows();
  for (std::size_t t = 0; t < layers_.size(); ++t) {
    const Matrix& add = seg.timestep_states[t];
    if (add.rows() != new_rows || add.cols() != dim_) {
      throw ShapeError("segment timestep state shape mismatch");
    }
    Matrix grown(layers_[t].rows() + new_rows, dim_);
    for (std::size_t i = 0; i < layers_[t].rows(); ++i) grown.set_row(i, layers_[t].row(i));
    for (std::size_t i = 0; i < new_rows; ++i) grown.set_row(layers_[t].rows() + i, add.row(i));
    layers_[t] = std::move(grown);
  }
  for (std::size_t i = 0; i < new_rows; ++i) {
    meta_.push_back(TokenMeta{seg.segment_index, i / seg.tokens_per_frame,
                              i % seg.tokens_per_frame});
  }
}

Matrix KVCache::gather(std::size_t t, const std::vector<std::size_t>& indices) const {
  const Matrix& full = layer(t);
  Matrix out(indices.size(), dim_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= full.rows()) throw DomainError("gather index out of range");
    out.set_row(i, full.row(indices[i]));
  }
  return out;
}

GenerationState::GenerationState(const Geometry& geometry, std::size_t timesteps)
    : geometry_(geometry), cache_(timesteps, geometry.dim) {}

void GenerationState::append(SegmentState seg) {
  if (seg.segment_index != segments_.size()) {
    throw SequencingError("segment " + std::to_string(seg.segment_index) +
                          " appended at position " + std::to_string(segments_.size()));
  }
  cache_.append(seg);
  segments_.push_back(std::move(seg));
}

GenWeights GenWeights::seeded(std::uint64_t seed, std::size_t dim, std::size_t timesteps) {
  Rng rng = Rng::derive(seed, 0x67656e, 0, 0);
  GenWeights w;
  w.dim = dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(3 * dim));
  w.query_proj = Matrix(3 * dim, dim);
  for (double& x : w.query_proj.storage()) x = bound * (2.0 * rng.uniform() - 1.0);
  w.prompt_proj = Matrix(dim, dim);
  for (double& x : w.prompt_proj.storage())
    x = (2.0 * rng.uniform() - 1.0) / std::sqrt(static_cast<double>(dim));
  for (std::size_t t = 0; t < timesteps; ++t) {
    Vector enc(dim);
    for (double& x : enc) x = rng.normal();
    const double n = norm(enc);
    for (double& x : enc) x /= n;
    w.time_enc.push_back(std::move(enc));
  }
  return w;
}

ToyGenerator::ToyGenerator(GenWeights weights) : weights_(std::move(weights)) {}

void ToyGenerator::reset_counters() const {
  calls_.store(0);
  key_rows_.store(0);
}

Matrix ToyGenerator::step(const Matrix& noisy_tokens, std::size_t timestep, const Matrix& keys,
                          const Matrix& values, const PromptEmbedding& prompt,
                          bool first_segment) const {
  const std::size_t dim = weights_.dim;
  if (noisy_tokens.cols() != dim) throw ShapeError("generator token width != dim");
  if (timestep < 1 || timestep > weights_.time_enc.size())
    throw ShapeError("generator timestep out of range");
  if (keys.rows() == 0 && !first_segment) {
    throw EmptyContextError("generator invoked with zero context tokens");
  }

  const Vector pmean = prompt.mean_token();
  const Vector& tenc = weights_.time_enc[timestep - 1];

  // prompt term, shared by every token of the segment
  Vector pterm(dim, 0.0);
  for (std::size_t j = 0; j < dim; ++j)
    for (std::size_t c = 0; c < dim; ++c) pterm[c] += pmean[j] * weights_.prompt_proj(j, c);

  Matrix out(noisy_tokens.rows(), dim);
  if (keys.rows() > 0) {
    Matrix queries(noisy_tokens.rows(), dim);
    for (std::size_t i = 0; i < noisy_tokens.rows(); ++i) {
      for (std::size_t c = 0; c < dim; ++c) {
        double q = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
          q += noisy_tokens(i, j) * weights_.query_proj(j, c);
          q += pmean[j] * weights_.query_proj(dim + j, c);
          q += tenc[j] * weights_.query_proj(2 * dim + j, c);
        }
        queries(i, c) = q;
      }
    }
    out = attention(queries, keys, values, dim);
    calls_.fetch_add(1);
    key_rows_.fetch_add(keys.rows());
  }
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t c = 0; c < dim; ++c) out(i, c) += pterm[c];
  return out;
}

SegmentState denoise_segment(const GenerationState& state, const RankingSelection& selection,
                             const PromptEmbedding& prompt, const NoiseSchedule& schedule,
                             const ToyGenerator& gen, Rng& rng, const DenoiseOptions& opts) {
  schedule.validate();
  const Geometry& geo = state.geometry();
  const std::size_t timesteps = schedule.steps();
  if (state.cache().timesteps() != timesteps) {
    throw ConfigError("schedule length does not match cache depth");
  }
  const std::size_t hist = state.history_tokens();
  const bool first_segment = hist == 0;
  if (!first_segment && selection.indices.empty() && !opts.full_context) {
    throw EmptyContextError("empty selection with nonzero history");
  }
  for (std::size_t idx : selection.indices) {
    if (idx >= hist) throw DomainError("selection index beyond history length");
  }

  // Attention is order-insensitive; canonicalize so permuted selections are
  // bit-identical.
  std::vector<std::size_t> sorted = selection.indices;
  std::sort(sorted.begin(), sorted.end());

  // The initial state is always drawn from the stream; noise_free only
  // switches off the per-step refresh noise.
  const std::size_t rows = geo.tokens_per_segment();
  Matrix current(rows, geo.dim);
  for (double& x : current.storage()) x = rng.normal();

  SegmentState seg;
  seg.segment_index = state.segments().size();
  seg.frames = geo.frames_per_segment;
  seg.tokens_per_frame = geo.tokens_per_frame();
  seg.timestep_states.assign(timesteps, Matrix());

  for (std::size_t j = 0; j < timesteps; ++j) {
    const std::size_t t = timesteps - j;  // input timestep
    seg.timestep_states[t - 1] = current;

    Matrix g;
    if (first_segment) {
      g = gen.step(current, t, Matrix(0, geo.dim), Matrix(0, geo.dim), prompt, true);
    } else if (opts.full_context) {
      g = gen.step(current, t, state.cache().keys_at(t), state.cache().values_at(t), prompt,
                   false);
    } else {
      const Matrix kv = state.cache().gather(t, sorted);
      g = gen.step(current, t, kv, kv, prompt, false);
    }

    Matrix next = scale(g, schedule.alpha[j]);
    if (schedule.sigma[j] > 0.0 && !opts.noise_free) {
      for (double& x : next.storage()) x += schedule.sigma[j] * rng.normal();
    }
    current = std::move(next);
  }

  seg.tokens = std::move(current);
  return seg;
}

}  // namespace ctxsel
