#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "ctxsel/gradtape.hpp"
#include "ctxsel/matrix.hpp"
#include "ctxsel/plsampler.hpp"
#include "ctxsel/rng.hpp"

namespace ctxsel {

// The current-segment prompt as a short token sequence (rows x dim). A
// single-vector prompt is the one-row case.
struct PromptEmbedding {
  Matrix tokens;

  PromptEmbedding() = default;
  explicit PromptEmbedding(Matrix t) : tokens(std::move(t)) {}
  static PromptEmbedding from_vector(const Vector& v) {
    return PromptEmbedding(Matrix::from_row(v));
  }
  std::size_t dim() const { return tokens.cols(); }
  Vector mean_token() const;
};

struct PolicyConfig {
  std::size_t dim = 16;
  std::size_t cross_attention_blocks = 1;  // N1
  std::size_t linear_layers = 2;           // N2
};

// Learnable selection model: history tokens attend to the prompt through N1
// cross-attention blocks (history rows are the queries), then N2 linear
// layers map each token to a scalar score. The map is per-token, so history
// permutations permute the scores exactly.
struct PolicyParams {
  struct Block {
    Matrix wq, wk, wv, wo;  // dim x dim each
  };

  PolicyConfig config;
  std::vector<Block> blocks;
  std::vector<Matrix> linear_w;  // dim x dim except the last, which is dim x 1
  std::vector<Matrix> linear_b;  // 1 x out

  // Stable tensor ordering shared by the optimizer and the checkpoint format.
  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;
  std::vector<std::pair<std::string, Matrix*>> named_tensors();
  std::vector<std::pair<std::string, const Matrix*>> named_tensors() const;
};

// Gradients aligned with PolicyParams::tensors().
using PolicyGrads = std::vector<Matrix>;

// Scaled-Gaussian projections (std 1/sqrt(dim)); the final score layer is
// zero-initialized so the starting selection policy is exactly uniform.
PolicyParams init_params(const PolicyConfig& config, Rng& rng);

// One finite score per history row. history is L x dim.
ScoreVector score_context(const PolicyParams& params, const Matrix& history,
                          const PromptEmbedding& prompt);

// Parameter gradients of sum_i upstream[i] * score_i.
PolicyGrads score_context_backward(const PolicyParams& params, const Matrix& history,
                                   const PromptEmbedding& prompt, const ScoreVector& upstream);

PolicyGrads zero_grads_like(const PolicyParams& params);

}  // namespace ctxsel
