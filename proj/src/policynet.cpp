#include "ctxsel/policynet.hpp"

#include <cmath>

#include "ctxsel/errors.hpp"

namespace ctxsel {

Vector PromptEmbedding::mean_token() const {
  Vector out(tokens.cols(), 0.0);
  for (std::size_t i = 0; i < tokens.rows(); ++i)
    for (std::size_t j = 0; j < tokens.cols(); ++j) out[j] += tokens(i, j);
  for (double& x : out) x /= static_cast<double>(tokens.rows());
  return out;
}

std::vector<Matrix*> PolicyParams::tensors() {
  std::vector<Matrix*> out;
  for (Block& b : blocks) {
    out.push_back(&b.wq);
    out.push_back(&b.wk);
    out.push_back(&b.wv);
    out.push_back(&b.wo);
  }
  for (std::size_t i = 0; i < linear_w.size(); ++i) {
    out.push_back(&linear_w[i]);
    out.push_back(&linear_b[i]);
  }
  return out;
}

std::vector<const Matrix*> PolicyParams::tensors() const {
  std::vector<const Matrix*> out;
  for (const Block& b : blocks) {
    out.push_back(&b.wq);
    out.push_back(&b.wk);
    out.push_back(&b.wv);
    out.push_back(&b.wo);
  }
  for (std::size_t i = 0; i < linear_w.size(); ++i) {
    out.push_back(&linear_w[i]);
    out.push_back(&linear_b[i]);
  }
  return out;
}

std::vector<std::pair<std::string, Matrix*>> PolicyParams::named_tensors() {
  std::vector<std::pair<std::string, Matrix*>> out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string p = "policy.block" + std::to_string(i) + ".";
    out.emplace_back(p + "wq", &blocks[i].wq);
    out.emplace_back(p + "wk", &blocks[i].wk);
    out.emplace_back(p + "wv", &blocks[i].wv);
    out.emplace_back(p + "wo", &blocks[i].wo);
  }
  for (std::size_t i = 0; i < linear_w.size(); ++i) {
    const std::string p = "policy.linear" + std::to_string(i) + ".";
    out.emplace_back(p + "w", &linear_w[i]);
    out.emplace_back(p + "b", &linear_b[i]);
  }
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> PolicyParams::named_tensors() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  for (auto& [name, tensor] : const_cast<PolicyParams*>(this)->named_tensors()) {
    out.emplace_back(name, tensor);
  }
  return out;
}

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, double std, Rng& rng) {
  Matrix m(rows, cols);
  for (double& x : m.storage()) x = std * rng.normal();
  return m;
}

void check_config(const PolicyConfig& c) {
  if (c.dim < 1 || c.cross_attention_blocks < 1 || c.linear_layers < 1) {
    throw ConfigError("policy config requires dim >= 1, N1 >= 1, N2 >= 1");
  }
}

}  // namespace

PolicyParams init_params(const PolicyConfig& config, Rng& rng) {
  check_config(config);
  const double std = 1.0 / std::sqrt(static_cast<double>(config.dim));

  PolicyParams p;
  p.config = config;
  for (std::size_t i = 0; i < config.cross_attention_blocks; ++i) {
    PolicyParams::Block b;
    b.wq = gaussian(config.dim, config.dim, std, rng);
    b.wk = gaussian(config.dim, config.dim, std, rng);
    b.wv = gaussian(config.dim, config.dim, std, rng);
    b.wo = gaussian(config.dim, config.dim, std, rng);
    p.blocks.push_back(std::move(b));
  }
  for (std::size_t i = 0; i < config.linear_layers; ++i) {
    const bool last = i + 1 == config.linear_layers;
    const std::size_t out_dim = last ? 1 : config.dim;
    p.linear_w.push_back(last ? Matrix(config.dim, 1)
                              : gaussian(config.dim, out_dim, std, rng));
    p.linear_b.push_back(Matrix(1, out_dim));
  }
  return p;
}

namespace {

struct ForwardTrace {
  GradTape tape;
  GradTape::Var scores;
  std::vector<GradTape::Var> param_vars;  // aligned with PolicyParams::tensors()
};

ForwardTrace forward(const PolicyParams& params, const Matrix& history,
                     const PromptEmbedding& prompt) {
  const std::size_t dim = params.config.dim;
  if (history.rows() < 1) throw ShapeError("empty history");
  if (history.cols() != dim) throw ShapeError("history width != policy dim");
  if (prompt.tokens.rows() < 1 || prompt.tokens.cols() != dim)
    throw ShapeError("prompt width != policy dim");
  if (!history.all_finite() || !prompt.tokens.all_finite())
    throw DomainError("non-finite policy input");

  ForwardTrace tr;
  GradTape& t = tr.tape;

  std::vector<GradTape::Var> block_vars;
  for (const PolicyParams::Block& b : params.blocks) {
    block_vars.push_back(t.leaf(b.wq));
    block_vars.push_back(t.leaf(b.wk));
    block_vars.push_back(t.leaf(b.wv));
    block_vars.push_back(t.leaf(b.wo));
  }
  std::vector<GradTape::Var> lin_vars;
  for (std::size_t i = 0; i < params.linear_w.size(); ++i) {
    lin_vars.push_back(t.leaf(params.linear_w[i]));
    lin_vars.push_back(t.leaf(params.linear_b[i]));
  }

  GradTape::Var h = t.leaf(history);
  GradTape::Var p = t.leaf(prompt.tokens);

  for (std::size_t i = 0; i < params.blocks.size(); ++i) {
    GradTape::Var q = t.matmul(h, block_vars[4 * i + 0]);
    GradTape::Var k = t.matmul(p, block_vars[4 * i + 1]);
    GradTape::Var v = t.matmul(p, block_vars[4 * i + 2]);
    GradTape::Var att = t.attention(q, k, v, dim);
    h = t.add(h, t.matmul(att, block_vars[4 * i + 3]));  // residual
  }
  for (std::size_t i = 0; i < params.linear_w.size(); ++i) {
    h = t.add_rowvec(t.matmul(h, lin_vars[2 * i]), lin_vars[2 * i + 1]);
  }

  tr.scores = h;
  tr.param_vars = std::move(block_vars);
  tr.param_vars.insert(tr.param_vars.end(), lin_vars.begin(), lin_vars.end());
  return tr;
}

}  // namespace

ScoreVector score_context(const PolicyParams& params, const Matrix& history,
                          const PromptEmbedding& prompt) {
  ForwardTrace tr = forward(params, history, prompt);
  const Matrix& s = tr.tape.value(tr.scores);
  ScoreVector out(s.rows());
  for (std::size_t i = 0; i < s.rows(); ++i) out[i] = s(i, 0);
  for (double x : out) {
    if (!std::isfinite(x)) throw NumericError("policy produced non-finite score");
  }
  return out;
}

PolicyGrads score_context_backward(const PolicyParams& params, const Matrix& history,
                                   const PromptEmbedding& prompt, const ScoreVector& upstream) {
  if (upstream.size() != history.rows())
    throw ShapeError("upstream length != history token count");
  ForwardTrace tr = forward(params, history, prompt);
  tr.tape.backward(tr.scores, Matrix::from_column(upstream));

  PolicyGrads grads;
  grads.reserve(tr.param_vars.size());
  for (GradTape::Var v : tr.param_vars) grads.push_back(tr.tape.grad(v));
  return grads;
}

PolicyGrads zero_grads_like(const PolicyParams& params) {
  PolicyGrads out;
  for (const Matrix* m : params.tensors()) out.emplace_back(m->rows(), m->cols());
  return out;
}

}  // namespace ctxsel
