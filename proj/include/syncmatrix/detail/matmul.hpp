#pragma once

#include <cstddef>

namespace syncmatrix::detail {

// Dense kernels behind matmul and conv2d. Each output element accumulates its
// sum in a fixed k order and is written by exactly one thread, so results do
// not depend on the worker count.

// C[M x N] = A[M x K] * B[K x N]
void mm_nn(const double* a, const double* b, double* c,
           std::size_t m, std::size_t k, std::size_t n);

// C[M x N] = A[M x K] * B[N x K]^T
void mm_nt(const double* a, const double* b, double* c,
           std::size_t m, std::size_t k, std::size_t n);

// C[M x N] = A[K x M]^T * B[K x N]
void mm_tn(const double* a, const double* b, double* c,
           std::size_t m, std::size_t k, std::size_t n);

}  // namespace syncmatrix::detail
