#pragma once

#include <cstddef>
#include <string_view>
#include <type_traits>

// Inner loops behind tensor ops. Every kernel has a portable scalar
// reference; SIMD variants are chosen once at startup from CPUID and must
// agree with the reference to float rounding (see tests/kernels_test.cpp).
//
// Accumulation order per output element is fixed in every variant: GEMM
// sums over k in ascending order, so results are reproducible for a given
// dispatch choice.

namespace cpd::kernels {

struct KernelTable {
  std::string_view name;
  /// C[M,N] += A[M,K] * B[K,N], all row-major with leading dimensions.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
               const float* b, std::size_t ldb, float* c, std::size_t ldc);
  /// y += alpha * x
  void (*axpy)(std::size_t n, float alpha, const float* x, float* y);
  /// out = a * b
  void (*mul)(std::size_t n, const float* a, const float* b, float* out);
  /// out = a + b
  void (*add)(std::size_t n, const float* a, const float* b, float* out);
  /// y = max(x, 0)
  void (*relu)(std::size_t n, const float* x, float* y);
  /// gx += (x > 0) ? gy : 0
  void (*relu_backward)(std::size_t n, const float* x, const float* gy, float* gx);
};

const KernelTable& scalar_table();
/// nullptr when the AVX2 variant was not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table();
/// The table used by tensor ops. Honors CPD_FORCE_SCALAR=1 in the environment.
const KernelTable& active();

// Scalar templates, used directly for double precision.
template <typename T>
void gemm_ref(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
              std::size_t ldb, T* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * lda + p];
      const T* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
          std::size_t ldb, T* c, std::size_t ldc) {
  if constexpr (std::is_same_v<T, float>) {
    active().gemm(m, n, k, a, lda, b, ldb, c, ldc);
  } else {
    gemm_ref(m, n, k, a, lda, b, ldb, c, ldc);
  }
}

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  if constexpr (std::is_same_v<T, float>) {
    active().axpy(n, alpha, x, y);
  } else {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
  }
}

template <typename T>
void mul(std::size_t n, const T* a, const T* b, T* out) {
  if constexpr (std::is_same_v<T, float>) {
    active().mul(n, a, b, out);
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
  }
}

template <typename T>
void add(std::size_t n, const T* a, const T* b, T* out) {
  if constexpr (std::is_same_v<T, float>) {
    active().add(n, a, b, out);
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
  }
}

template <typename T>
void relu(std::size_t n, const T* x, T* y) {
  if constexpr (std::is_same_v<T, float>) {
    active().relu(n, x, y);
  } else {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  }
}

template <typename T>
void relu_backward(std::size_t n, const T* x, const T* gy, T* gx) {
  if constexpr (std::is_same_v<T, float>) {
    active().relu_backward(n, x, gy, gx);
  } else {
    for (std::size_t i = 0; i < n; ++i)
      if (x[i] > T(0)) gx[i] += gy[i];
  }
}

}  // namespace cpd::kernels
