// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rknode/tensor.hpp"

namespace rknode {

class Tape;

// Handle to one node on a tape. Cheap to copy; valid until clear().
struct Var {
  Tape* tape = nullptr;
  std::int64_t id = -1;
  bool ok() const { return tape != nullptr && id >= 0; }
};

// Reverse-mode autodiff over dense tensors. Nodes are appended in forward
// order (so every node's inputs precede it) and the backward pass walks the
// list once in reverse, accumulating gradients.
//
// The op set is intentionally small: exactly what dense heads, an unrolled
// RK solve with a time feature, and a cross-entropy head require.
class Tape {
 public:
  // Leaves. Both record a node; params are the intended gradient sinks,
  // constants just carry data (their gradients are still computed so inputs
  // can be attacked, but nothing distinguishes them during backward).
  Var constant(Tensor value);
  Var param(Tensor value);

  // Elementwise; add also accepts (m,n)+(n) with the vector broadcast across
  // rows (bias addition).
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);

  Var matmul(Var a, Var b);        // (m,k)x(k,n)
  Var scale(Var a, double s);      // s is a plain constant, not a node
  Var relu(Var a);                 // subgradient at 0 is 0
  Var gelu(Var a);                 // tanh approximation, see kernels
  Var tanh(Var a);
  Var concat(Var a, Var b);        // along the last axis: (m,p)||(m,q)
  Var mean_pool(Var a);            // (m,n) -> (m,1), mean over the last axis

  // Mean softmax cross-entropy over rows of (m,C) logits. Scalar output.
  // Throws if any label is outside [0, C).
  Var softmax_cross_entropy(Var logits, const std::vector<int>& labels);

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients for every node.
  // Throws if loss is not scalar-shaped.
  void backward(Var loss);

  const Tensor& value(Var x) const;
  // Gradient buffer filled by the last backward(); zero-shaped before that.
  const Tensor& grad(Var x) const;

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  enum class Op {
    leaf,
    add,
    add_bias,
    sub,
    mul,
    matmul,
    scale,
    relu,
    gelu,
    tanh_,
    concat,
    mean_pool,
    softmax_ce,
  };

  struct Node {
    Op op = Op::leaf;
    std::int64_t a = -1, b = -1;
    Tensor value;
    Tensor grad;
    double scalar = 0.0;          // scale factor
    std::int64_t split = 0;       // concat: width of the first input
    std::vector<int> labels;      // softmax_ce
    Tensor cache;                 // softmax_ce: probabilities (m,C)
  };

  Var push(Node n);
  const Node& node(Var x) const;
  void check_mine(Var x, const char* op) const;

  std::vector<Node> nodes_;
};

}  // namespace rknode
