// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace rknode::kernels {

// Serial reference kernels. The OpenMP versions below are checked against
// these bit-for-bit in the test suite, and the benchmark tool compares their
// throughput.
namespace serial {

// c(m,n) = a(m,k) * b(k,n)
void matmul_nn(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n);

// c(m,n) = a(m,k) * b(n,k)^T
void matmul_nt(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n);

// c(m,n) = a(k,m)^T * b(k,n)
void matmul_tn(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n);

void gelu(const double* x, double* y, std::int64_t n);
void gelu_grad(const double* x, const double* gy, double* gx, std::int64_t n);

}  // namespace serial

// OpenMP kernels. Each output element is accumulated sequentially in index
// order by exactly one thread, so results are bit-identical to the serial
// reference for any thread count.
void matmul_nn(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n);
void matmul_nt(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n);
void matmul_tn(const double* a, const double* b, double* c,
               std::int64_t m, std::int64_t k, std::int64_t n);
void gelu(const double* x, double* y, std::int64_t n);
void gelu_grad(const double* x, const double* gy, double* gx, std::int64_t n);

}  // namespace rknode::kernels
