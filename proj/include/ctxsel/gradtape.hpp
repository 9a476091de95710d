#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "ctxsel/matrix.hpp"

namespace ctxsel {

// Reverse-mode tape over Matrix values. Deliberately small: it records only
// the primitives the selection policy uses (linear maps, scaled dot-product
// cross-attention, score readout). Nodes are created in topological order,
// so backward() is a single reverse sweep.
//
// A tape is single-owner; concurrent rollouts each build their own.
class GradTape {
 public:
  struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
  };

  Var leaf(Matrix value);

  Var matmul(Var a, Var b);
  Var matmul_nt(Var a, Var b);  // a * b^T
  Var add(Var a, Var b);
  Var add_rowvec(Var m, Var row);
  Var scale(Var a, double s);
  Var softmax_rows(Var a);
  // Softmax(a b_k^T / sqrt(dim)) b_v, composed from the primitives above.
  Var attention(Var q, Var k, Var v, std::size_t dim);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }

  // Accumulates d(seed . root)/d(node) into every node's grad.
  void backward(Var root, const Matrix& seed);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(GradTape&)> back;  // empty for leaves
  };

  Var push(Matrix value, std::function<void(GradTape&)> back);
  Matrix& grad_mut(Var v) { return nodes_[v.id].grad; }

  std::vector<Node> nodes_;
};

}  // namespace ctxsel
