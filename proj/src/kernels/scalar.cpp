#include "cpd/kernels.hpp"

namespace cpd::kernels {
namespace {

void gemm_scalar(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                 const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  gemm_ref(m, n, k, a, lda, b, ldb, c, ldc);
}

void axpy_scalar(std::size_t n, float alpha, const float* x, float* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void mul_scalar(std::size_t n, const float* a, const float* b, float* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void add_scalar(std::size_t n, const float* a, const float* b, float* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void relu_scalar(std::size_t n, const float* x, float* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_scalar(std::size_t n, const float* x, const float* gy, float* gx) {
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] > 0.0f) gx[i] += gy[i];
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar",   gemm_scalar, axpy_scalar,         mul_scalar,
                                 add_scalar, relu_scalar, relu_backward_scalar};
  return table;
}

}  // namespace cpd::kernels
