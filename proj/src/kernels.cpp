// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#include "rknode/kernels.hpp"

#include <cmath>

namespace rknode::kernels {

namespace {

// Work sizes below this run serially even in the OpenMP kernels; spawning a
// team costs more than the loop.
constexpr std::int64_t kParMatmulWork = 1 << 15;
constexpr std::int64_t kParMapWork = 1 << 14;

// tanh approximation of GeLU:
//   gelu(x) = 0.5 * x * (1 + tanh(sqrt(2/pi) * (x + 0.044715 * x^3)))
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

inline double gelu_one(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

inline double gelu_grad_one(double x) {
  const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + t) +
         0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

}  // namespace

namespace serial {

void matmul_nn(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n) {
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::int64_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
}

void matmul_nt(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n) {
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::int64_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
      c[i * n + j] = s;
    }
}

void matmul_tn(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n) {
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::int64_t p = 0; p < k; ++p) s += a[p * m + i] * b[p * n + j];
      c[i * n + j] = s;
    }
}

void gelu(const double* x, double* y, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) y[i] = gelu_one(x[i]);
}

void gelu_grad(const double* x, const double* gy, double* gx, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) gx[i] = gy[i] * gelu_grad_one(x[i]);
}

}  // namespace serial

void matmul_nn(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n) {
#pragma omp parallel for schedule(static) if (m * k * n > kParMatmulWork)
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::int64_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
}

void matmul_nt(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n) {
#pragma omp parallel for schedule(static) if (m * k * n > kParMatmulWork)
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::int64_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
      c[i * n + j] = s;
    }
}

void matmul_tn(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n) {
#pragma omp parallel for schedule(static) if (m * k * n > kParMatmulWork)
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::int64_t p = 0; p < k; ++p) s += a[p * m + i] * b[p * n + j];
      c[i * n + j] = s;
    }
}

void gelu(const double* x, double* y, std::int64_t n) {
#pragma omp parallel for schedule(static) if (n > kParMapWork)
  for (std::int64_t i = 0; i < n; ++i) y[i] = gelu_one(x[i]);
}

void gelu_grad(const double* x, const double* gy, double* gx, std::int64_t n) {
#pragma omp parallel for schedule(static) if (n > kParMapWork)
  for (std::int64_t i = 0; i < n; ++i) gx[i] = gy[i] * gelu_grad_one(x[i]);
}

}  // namespace rknode::kernels
