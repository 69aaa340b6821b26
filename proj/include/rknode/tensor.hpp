// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rknode {

/// Dense row-major tensor of doubles. Rank 0 (scalar), 1, or 2 is all the
/// engine needs: batches are rank-2, biases rank-1, losses rank-0.
struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> s) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(numel_of(shape)), 0.0);
  }
  Tensor(std::vector<std::int64_t> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<std::int64_t>(data.size()) != numel_of(shape))
      throw std::invalid_argument("Tensor: data size does not match shape");
  }

  static std::int64_t numel_of(const std::vector<std::int64_t>& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
  }

  static Tensor scalar(double v) { return Tensor({}, {v}); }

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  std::int64_t rank() const { return static_cast<std::int64_t>(shape.size()); }
  std::int64_t rows() const { return shape.empty() ? 1 : shape[0]; }
  std::int64_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(std::int64_t i, std::int64_t j) { return data[static_cast<std::size_t>(i * cols() + j)]; }
  double at(std::int64_t i, std::int64_t j) const { return data[static_cast<std::size_t>(i * cols() + j)]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

inline std::string shape_str(const std::vector<std::int64_t>& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ')';
  return os.str();
}

inline std::string shape_str(const Tensor& t) { return shape_str(t.shape); }

}  // namespace rknode
