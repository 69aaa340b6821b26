// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#include "rknode/autodiff.hpp"

#include <cmath>
#include <stdexcept>

#include "rknode/kernels.hpp"

namespace rknode {

namespace {

void add_into(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                              shape_str(a.shape) + " and " + shape_str(b.shape));
}

}  // namespace

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::int64_t>(nodes_.size()) - 1};
}

const Tape::Node& Tape::node(Var x) const {
  return nodes_[static_cast<std::size_t>(x.id)];
}

void Tape::check_mine(Var x, const char* op) const {
  if (x.tape != this || x.id < 0 ||
      x.id >= static_cast<std::int64_t>(nodes_.size()))
    throw std::invalid_argument(std::string(op) +
                                ": variable does not belong to this tape");
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::param(Tensor value) { return constant(std::move(value)); }

Var Tape::add(Var a, Var b) {
  check_mine(a, "add");
  check_mine(b, "add");
  const Tensor& va = node(a).value;
  const Tensor& vb = node(b).value;
  Node n;
  n.a = a.id;
  n.b = b.id;
  if (va.same_shape(vb)) {
    n.op = Op::add;
    n.value = va;
    add_into(n.value, vb);
  } else if (va.rank() == 2 && vb.rank() == 1 && vb.shape[0] == va.cols()) {
    // bias broadcast across rows
    n.op = Op::add_bias;
    n.value = va;
    const auto m = va.rows(), c = va.cols();
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < c; ++j)
        n.value.data[static_cast<std::size_t>(i * c + j)] +=
            vb.data[static_cast<std::size_t>(j)];
  } else {
    shape_error("add", va, vb);
  }
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  check_mine(a, "sub");
  check_mine(b, "sub");
  const Tensor& va = node(a).value;
  const Tensor& vb = node(b).value;
  if (!va.same_shape(vb)) shape_error("sub", va, vb);
  Node n;
  n.op = Op::sub;
  n.a = a.id;
  n.b = b.id;
  n.value = va;
  for (std::size_t i = 0; i < vb.data.size(); ++i) n.value.data[i] -= vb.data[i];
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  check_mine(a, "mul");
  check_mine(b, "mul");
  const Tensor& va = node(a).value;
  const Tensor& vb = node(b).value;
  if (!va.same_shape(vb)) shape_error("mul", va, vb);
  Node n;
  n.op = Op::mul;
  n.a = a.id;
  n.b = b.id;
  n.value = va;
  for (std::size_t i = 0; i < vb.data.size(); ++i) n.value.data[i] *= vb.data[i];
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  check_mine(a, "matmul");
  check_mine(b, "matmul");
  const Tensor& va = node(a).value;
  const Tensor& vb = node(b).value;
  if (va.rank() != 2 || vb.rank() != 2 || va.cols() != vb.rows())
    shape_error("matmul", va, vb);
  Node n;
  n.op = Op::matmul;
  n.a = a.id;
  n.b = b.id;
  n.value = Tensor({va.rows(), vb.cols()});
  kernels::matmul_nn(va.data.data(), vb.data.data(), n.value.data.data(),
                     va.rows(), va.cols(), vb.cols());
  return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
  check_mine(a, "scale");
  Node n;
  n.op = Op::scale;
  n.a = a.id;
  n.scalar = s;
  n.value = node(a).value;
  for (double& x : n.value.data) x *= s;
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  check_mine(a, "relu");
  Node n;
  n.op = Op::relu;
  n.a = a.id;
  n.value = node(a).value;
  for (double& x : n.value.data) x = x > 0.0 ? x : 0.0;
  return push(std::move(n));
}

Var Tape::gelu(Var a) {
  check_mine(a, "gelu");
  const Tensor& va = node(a).value;
  Node n;
  n.op = Op::gelu;
  n.a = a.id;
  n.value = Tensor(va.shape);
  kernels::gelu(va.data.data(), n.value.data.data(),
                static_cast<std::int64_t>(va.data.size()));
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  check_mine(a, "tanh");
  Node n;
  n.op = Op::tanh_;
  n.a = a.id;
  n.value = node(a).value;
  for (double& x : n.value.data) x = std::tanh(x);
  return push(std::move(n));
}

Var Tape::concat(Var a, Var b) {
  check_mine(a, "concat");
  check_mine(b, "concat");
  const Tensor& va = node(a).value;
  const Tensor& vb = node(b).value;
  if (va.rank() != 2 || vb.rank() != 2 || va.rows() != vb.rows())
    shape_error("concat", va, vb);
  const auto m = va.rows(), p = va.cols(), q = vb.cols();
  Node n;
  n.op = Op::concat;
  n.a = a.id;
  n.b = b.id;
  n.split = p;
  n.value = Tensor({m, p + q});
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < p; ++j)
      n.value.at(i, j) = va.data[static_cast<std::size_t>(i * p + j)];
    for (std::int64_t j = 0; j < q; ++j)
      n.value.at(i, p + j) = vb.data[static_cast<std::size_t>(i * q + j)];
  }
  return push(std::move(n));
}

Var Tape::mean_pool(Var a) {
  check_mine(a, "mean_pool");
  const Tensor& va = node(a).value;
  if (va.rank() != 2)
    throw std::invalid_argument("mean_pool: expected rank-2 input, got " +
                                shape_str(va.shape));
  const auto m = va.rows(), c = va.cols();
  Node n;
  n.op = Op::mean_pool;
  n.a = a.id;
  n.value = Tensor({m, 1});
  for (std::int64_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::int64_t j = 0; j < c; ++j)
      s += va.data[static_cast<std::size_t>(i * c + j)];
    n.value.data[static_cast<std::size_t>(i)] = s / static_cast<double>(c);
  }
  return push(std::move(n));
}

Var Tape::softmax_cross_entropy(Var logits, const std::vector<int>& labels) {
  check_mine(logits, "softmax_cross_entropy");
  const Tensor& vl = node(logits).value;
  if (vl.rank() != 2)
    throw std::invalid_argument(
        "softmax_cross_entropy: expected rank-2 logits, got " +
        shape_str(vl.shape));
  const auto m = vl.rows(), c = vl.cols();
  if (static_cast<std::int64_t>(labels.size()) != m)
    throw std::invalid_argument("softmax_cross_entropy: " +
                                std::to_string(labels.size()) + " labels for " +
                                std::to_string(m) + " rows");
  for (std::int64_t i = 0; i < m; ++i)
    if (labels[static_cast<std::size_t>(i)] < 0 ||
        labels[static_cast<std::size_t>(i)] >= c)
      throw std::invalid_argument(
          "softmax_cross_entropy: label " +
          std::to_string(labels[static_cast<std::size_t>(i)]) +
          " out of range [0, " + std::to_string(c) + ") at row " +
          std::to_string(i));

  Node n;
  n.op = Op::softmax_ce;
  n.a = logits.id;
  n.labels = labels;
  n.cache = Tensor({m, c});
  double loss = 0.0;
  for (std::int64_t i = 0; i < m; ++i) {
    const double* row = vl.data.data() + i * c;
    double mx = row[0];
    for (std::int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::int64_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    for (std::int64_t j = 0; j < c; ++j)
      n.cache.at(i, j) = std::exp(row[j] - mx) / z;
    const auto y = static_cast<std::int64_t>(labels[static_cast<std::size_t>(i)]);
    loss += std::log(z) - (row[y] - mx);
  }
  n.value = Tensor::scalar(loss / static_cast<double>(m));
  return push(std::move(n));
}

void Tape::backward(Var loss) {
  check_mine(loss, "backward");
  const Tensor& lv = node(loss).value;
  if (lv.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(lv.shape));

  for (auto& n : nodes_) {
    n.grad = Tensor(n.value.shape);  // zero-filled
  }
  nodes_[static_cast<std::size_t>(loss.id)].grad.data[0] = 1.0;

  for (std::int64_t idx = static_cast<std::int64_t>(nodes_.size()) - 1;
       idx >= 0; --idx) {
    Node& n = nodes_[static_cast<std::size_t>(idx)];
    const Tensor& gy = n.grad;
    switch (n.op) {
      case Op::leaf:
        break;
      case Op::add: {
        add_into(nodes_[static_cast<std::size_t>(n.a)].grad, gy);
        add_into(nodes_[static_cast<std::size_t>(n.b)].grad, gy);
        break;
      }
      case Op::add_bias: {
        add_into(nodes_[static_cast<std::size_t>(n.a)].grad, gy);
        Tensor& gb = nodes_[static_cast<std::size_t>(n.b)].grad;
        const auto m = gy.rows(), c = gy.cols();
        for (std::int64_t i = 0; i < m; ++i)
          for (std::int64_t j = 0; j < c; ++j)
            gb.data[static_cast<std::size_t>(j)] +=
                gy.data[static_cast<std::size_t>(i * c + j)];
        break;
      }
      case Op::sub: {
        add_into(nodes_[static_cast<std::size_t>(n.a)].grad, gy);
        Tensor& gb = nodes_[static_cast<std::size_t>(n.b)].grad;
        for (std::size_t i = 0; i < gy.data.size(); ++i)
          gb.data[i] -= gy.data[i];
        break;
      }
      case Op::mul: {
        const Tensor& va = nodes_[static_cast<std::size_t>(n.a)].value;
        const Tensor& vb = nodes_[static_cast<std::size_t>(n.b)].value;
        Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
        Tensor& gb = nodes_[static_cast<std::size_t>(n.b)].grad;
        for (std::size_t i = 0; i < gy.data.size(); ++i) {
          ga.data[i] += gy.data[i] * vb.data[i];
          gb.data[i] += gy.data[i] * va.data[i];
        }
        break;
      }
      case Op::matmul: {
        const Tensor& va = nodes_[static_cast<std::size_t>(n.a)].value;
        const Tensor& vb = nodes_[static_cast<std::size_t>(n.b)].value;
        const auto m = va.rows(), k = va.cols(), c = vb.cols();
        Tensor tmp_a({m, k});
        kernels::matmul_nt(gy.data.data(), vb.data.data(), tmp_a.data.data(),
                           m, c, k);
        add_into(nodes_[static_cast<std::size_t>(n.a)].grad, tmp_a);
        Tensor tmp_b({k, c});
        kernels::matmul_tn(va.data.data(), gy.data.data(), tmp_b.data.data(),
                           k, m, c);
        add_into(nodes_[static_cast<std::size_t>(n.b)].grad, tmp_b);
        break;
      }
      case Op::scale: {
        Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
        for (std::size_t i = 0; i < gy.data.size(); ++i)
          ga.data[i] += n.scalar * gy.data[i];
        break;
      }
      case Op::relu: {
        const Tensor& va = nodes_[static_cast<std::size_t>(n.a)].value;
        Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
        for (std::size_t i = 0; i < gy.data.size(); ++i)
          if (va.data[i] > 0.0) ga.data[i] += gy.data[i];
        break;
      }
      case Op::gelu: {
        const Tensor& va = nodes_[static_cast<std::size_t>(n.a)].value;
        Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
        Tensor tmp(va.shape);
        kernels::gelu_grad(va.data.data(), gy.data.data(), tmp.data.data(),
                           static_cast<std::int64_t>(va.data.size()));
        add_into(ga, tmp);
        break;
      }
      case Op::tanh_: {
        Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
        for (std::size_t i = 0; i < gy.data.size(); ++i) {
          const double y = n.value.data[i];
          ga.data[i] += gy.data[i] * (1.0 - y * y);
        }
        break;
      }
      case Op::concat: {
        Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
        Tensor& gb = nodes_[static_cast<std::size_t>(n.b)].grad;
        const auto m = gy.rows(), total = gy.cols(), p = n.split;
        const auto q = total - p;
        for (std::int64_t i = 0; i < m; ++i) {
          for (std::int64_t j = 0; j < p; ++j)
            ga.data[static_cast<std::size_t>(i * p + j)] +=
                gy.data[static_cast<std::size_t>(i * total + j)];
          for (std::int64_t j = 0; j < q; ++j)
            gb.data[static_cast<std::size_t>(i * q + j)] +=
                gy.data[static_cast<std::size_t>(i * total + p + j)];
        }
        break;
      }
      case Op::mean_pool: {
        Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
        const auto m = ga.rows(), c = ga.cols();
        for (std::int64_t i = 0; i < m; ++i) {
          const double g = gy.data[static_cast<std::size_t>(i)] /
                           static_cast<double>(c);
          for (std::int64_t j = 0; j < c; ++j)
            ga.data[static_cast<std::size_t>(i * c + j)] += g;
        }
        break;
      }
      case Op::softmax_ce: {
        Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
        const auto m = n.cache.rows(), c = n.cache.cols();
        const double g = gy.data[0] / static_cast<double>(m);
        for (std::int64_t i = 0; i < m; ++i) {
          const auto y =
              static_cast<std::int64_t>(n.labels[static_cast<std::size_t>(i)]);
          for (std::int64_t j = 0; j < c; ++j) {
            const double ind = (j == y) ? 1.0 : 0.0;
            ga.data[static_cast<std::size_t>(i * c + j)] +=
                g * (n.cache.at(i, j) - ind);
          }
        }
        break;
      }
    }
  }
}

const Tensor& Tape::value(Var x) const {
  check_mine(x, "value");
  return node(x).value;
}

const Tensor& Tape::grad(Var x) const {
  check_mine(x, "grad");
  const Tensor& g = node(x).grad;
  if (g.data.empty() && node(x).value.numel() != 0)
    throw std::runtime_error("grad: backward() has not been run on this tape");
  return g;
}

}  // namespace rknode
