#include "ctxsel/gradtape.hpp"

#include <cmath>

namespace ctxsel {

GradTape::Var GradTape::push(Matrix value, std::function<void(GradTape&)> back) {
  nodes_.push_back(Node{std::move(value), Matrix(), std::move(back)});
  Node& n = nodes_.back();
  n.grad = Matrix(n.value.rows(), n.value.cols());
  return Var{nodes_.size() - 1};
}

GradTape::Var GradTape::leaf(Matrix value) { return push(std::move(value), {}); }

GradTape::Var GradTape::matmul(Var a, Var b) {
  Matrix out = ctxsel::matmul(value(a), value(b));
  Var self{nodes_.size()};
  return push(std::move(out), [a, b, self](GradTape& t) {
    const Matrix& g = t.grad(self);
    t.grad_mut(a) = ctxsel::add(t.grad(a), ctxsel::matmul_nt(g, t.value(b)));
    t.grad_mut(b) = ctxsel::add(t.grad(b), ctxsel::matmul(transpose(t.value(a)), g));
  });
}

GradTape::Var GradTape::matmul_nt(Var a, Var b) {
  Matrix out = ctxsel::matmul_nt(value(a), value(b));
  Var self{nodes_.size()};
  return push(std::move(out), [a, b, self](GradTape& t) {
    const Matrix& g = t.grad(self);
    t.grad_mut(a) = ctxsel::add(t.grad(a), ctxsel::matmul(g, t.value(b)));
    t.grad_mut(b) = ctxsel::add(t.grad(b), ctxsel::matmul(transpose(g), t.value(a)));
  });
}

GradTape::Var GradTape::add(Var a, Var b) {
  Matrix out = ctxsel::add(value(a), value(b));
  Var self{nodes_.size()};
  return push(std::move(out), [a, b, self](GradTape& t) {
    const Matrix& g = t.grad(self);
    t.grad_mut(a) = ctxsel::add(t.grad(a), g);
    t.grad_mut(b) = ctxsel::add(t.grad(b), g);
  });
}

GradTape::Var GradTape::add_rowvec(Var m, Var row) {
  Matrix out = ctxsel::add_rowvec(value(m), value(row));
  Var self{nodes_.size()};
  return push(std::move(out), [m, row, self](GradTape& t) {
    const Matrix& g = t.grad(self);
    t.grad_mut(m) = ctxsel::add(t.grad(m), g);
    Matrix rg = t.grad(row);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) rg(0, j) += g(i, j);
    t.grad_mut(row) = std::move(rg);
  });
}

GradTape::Var GradTape::scale(Var a, double s) {
  Matrix out = ctxsel::scale(value(a), s);
  Var self{nodes_.size()};
  return push(std::move(out), [a, s, self](GradTape& t) {
    t.grad_mut(a) = ctxsel::add(t.grad(a), ctxsel::scale(t.grad(self), s));
  });
}

GradTape::Var GradTape::softmax_rows(Var a) {
  Matrix out = ctxsel::softmax_rows(value(a));
  Var self{nodes_.size()};
  return push(std::move(out), [a, self](GradTape& t) {
    // d/dx_j = s_j * (g_j - sum_k g_k s_k), rowwise
    const Matrix& g = t.grad(self);
    const Matrix& s = t.value(self);
    Matrix ga = t.grad(a);
    for (std::size_t i = 0; i < s.rows(); ++i) {
      double inner = 0.0;
      for (std::size_t j = 0; j < s.cols(); ++j) inner += g(i, j) * s(i, j);
      for (std::size_t j = 0; j < s.cols(); ++j) ga(i, j) += s(i, j) * (g(i, j) - inner);
    }
    t.grad_mut(a) = std::move(ga);
  });
}

GradTape::Var GradTape::attention(Var q, Var k, Var v, std::size_t dim) {
  if (value(k).rows() == 0) throw EmptyContextError("attention over zero context tokens");
  if (value(q).cols() != dim || value(k).cols() != dim)
    throw ShapeError("attention query/key width != dim");
  Var logits = scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(dim)));
  Var weights = softmax_rows(logits);
  return matmul(weights, v);
}

void GradTape::backward(Var root, const Matrix& seed) {
  if (!seed.same_shape(nodes_[root.id].value)) throw ShapeError("backward seed shape mismatch");
  for (Node& n : nodes_) n.grad = Matrix(n.value.rows(), n.value.cols());
  nodes_[root.id].grad = seed;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    if (nodes_[i].back) nodes_[i].back(*this);
  }
}

}  // namespace ctxsel
