// Compiled with -mavx2 -mfma; only reached after the CPUID check in dispatch.cpp.
#include <immintrin.h>

#include <algorithm>
#include <cstdint>

#include "cpd/kernels.hpp"

namespace cpd::kernels {
namespace {

constexpr std::size_t kRowBlock = 6;
constexpr std::size_t kColBlock = 256;
constexpr std::size_t kDepthBlock = 256;

inline __m256i tail_mask(std::size_t count) {
  alignas(32) static const std::int32_t lanes[16] = {-1, -1, -1, -1, -1, -1, -1, -1,
                                                     0,  0,  0,  0,  0,  0,  0,  0};
  return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(lanes + 8 - count));
}

// 6..1 rows x 16 columns.
template <std::size_t Rows>
inline void tile16(std::size_t k, const float* a, std::size_t lda, const float* b, std::size_t ldb,
                   float* c, std::size_t ldc) {
  __m256 acc0[Rows];
  __m256 acc1[Rows];
  for (std::size_t r = 0; r < Rows; ++r) {
    acc0[r] = _mm256_loadu_ps(c + r * ldc);
    acc1[r] = _mm256_loadu_ps(c + r * ldc + 8);
  }
  for (std::size_t p = 0; p < k; ++p) {
    const __m256 b0 = _mm256_loadu_ps(b + p * ldb);
    const __m256 b1 = _mm256_loadu_ps(b + p * ldb + 8);
    for (std::size_t r = 0; r < Rows; ++r) {
      const __m256 av = _mm256_broadcast_ss(a + r * lda + p);
      acc0[r] = _mm256_fmadd_ps(av, b0, acc0[r]);
      acc1[r] = _mm256_fmadd_ps(av, b1, acc1[r]);
    }
  }
  for (std::size_t r = 0; r < Rows; ++r) {
    _mm256_storeu_ps(c + r * ldc, acc0[r]);
    _mm256_storeu_ps(c + r * ldc + 8, acc1[r]);
  }
}

// Rows x (1..8) columns, masked.
template <std::size_t Rows>
inline void tile8(std::size_t k, const float* a, std::size_t lda, const float* b, std::size_t ldb,
                  float* c, std::size_t ldc, std::size_t cols) {
  const __m256i mask = tail_mask(cols);
  __m256 acc[Rows];
  for (std::size_t r = 0; r < Rows; ++r) acc[r] = _mm256_maskload_ps(c + r * ldc, mask);
  for (std::size_t p = 0; p < k; ++p) {
    const __m256 bv = _mm256_maskload_ps(b + p * ldb, mask);
    for (std::size_t r = 0; r < Rows; ++r) {
      acc[r] = _mm256_fmadd_ps(_mm256_broadcast_ss(a + r * lda + p), bv, acc[r]);
    }
  }
  for (std::size_t r = 0; r < Rows; ++r) _mm256_maskstore_ps(c + r * ldc, mask, acc[r]);
}

template <std::size_t Rows>
void row_panel(std::size_t n, std::size_t k, const float* a, std::size_t lda, const float* b,
               std::size_t ldb, float* c, std::size_t ldc) {
  std::size_t j = 0;
  for (; j + 16 <= n; j += 16) tile16<Rows>(k, a, lda, b + j, ldb, c + j, ldc);
  for (; j < n; j += 8) tile8<Rows>(k, a, lda, b + j, ldb, c + j, ldc, std::min<std::size_t>(8, n - j));
}

void panel(std::size_t rows, std::size_t n, std::size_t k, const float* a, std::size_t lda,
           const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  switch (rows) {
    case 6: row_panel<6>(n, k, a, lda, b, ldb, c, ldc); break;
    case 5: row_panel<5>(n, k, a, lda, b, ldb, c, ldc); break;
    case 4: row_panel<4>(n, k, a, lda, b, ldb, c, ldc); break;
    case 3: row_panel<3>(n, k, a, lda, b, ldb, c, ldc); break;
    case 2: row_panel<2>(n, k, a, lda, b, ldb, c, ldc); break;
    default: row_panel<1>(n, k, a, lda, b, ldb, c, ldc); break;
  }
}

// Depth blocks are visited in ascending order, so each C element still
// sees its products in ascending k.
void gemm_avx2(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
               const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  for (std::size_t p0 = 0; p0 < k; p0 += kDepthBlock) {
    const std::size_t kb = std::min(kDepthBlock, k - p0);
    for (std::size_t j0 = 0; j0 < n; j0 += kColBlock) {
      const std::size_t nb = std::min(kColBlock, n - j0);
      for (std::size_t i0 = 0; i0 < m; i0 += kRowBlock) {
        const std::size_t mb = std::min(kRowBlock, m - i0);
        panel(mb, nb, kb, a + i0 * lda + p0, lda, b + p0 * ldb + j0, ldb, c + i0 * ldc + j0, ldc);
      }
    }
  }
}

void axpy_avx2(std::size_t n, float alpha, const float* x, float* y) {
  const __m256 av = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void mul_avx2(std::size_t n, const float* a, const float* b, float* out) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void add_avx2(std::size_t n, const float* a, const float* b, float* out) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void relu_avx2(std::size_t n, const float* x, float* y) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_avx2(std::size_t n, const float* x, const float* gy, float* gx) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 keep = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
    const __m256 g = _mm256_and_ps(keep, _mm256_loadu_ps(gy + i));
    _mm256_storeu_ps(gx + i, _mm256_add_ps(_mm256_loadu_ps(gx + i), g));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0f) gx[i] += gy[i];
}

}  // namespace

const KernelTable& avx2_table_impl() {
  static const KernelTable table{"avx2",   gemm_avx2, axpy_avx2,         mul_avx2,
                                 add_avx2, relu_avx2, relu_backward_avx2};
  return table;
}

}  // namespace cpd::kernels
