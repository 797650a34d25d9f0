#pragma once

#include <cstdint>

namespace moesim::detail {

// Dense row-major GEMM kernels backed by Eigen (see src/kernels.cpp).
// accumulate=false overwrites c, accumulate=true adds into it.

// c = a(m x k) * b(k x n)
template <typename T>
void mm_nn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
           bool accumulate);

// c = a(m x k) * b(n x k)^T
template <typename T>
void mm_nt(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
           bool accumulate);

// c = a(k x m)^T * b(k x n)
template <typename T>
void mm_tn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
           bool accumulate);

// out(n x n) = squared euclidean distances between rows of x(n x d); clamped at 0.
template <typename T>
void pairwise_sqdist(const T* x, int64_t n, int64_t d, T* out);

// out(m x n) = squared euclidean distances between rows of x(m x d) and y(n x d).
template <typename T>
void cross_sqdist(const T* x, int64_t m, const T* y, int64_t n, int64_t d, T* out);

}  // namespace moesim::detail
