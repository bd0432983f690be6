#include <cstdlib>
#include <cstring>

#include "cpd/kernels.hpp"

namespace cpd::kernels {

#if defined(CPD_HAVE_AVX2)
const KernelTable& avx2_table_impl();
#endif

const KernelTable* avx2_table() {
#if defined(CPD_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  if (supported) return &avx2_table_impl();
#endif
  return nullptr;
}

namespace {
const KernelTable& select() {
  const char* force = std::getenv("CPD_FORCE_SCALAR");
  if (force != nullptr && std::strcmp(force, "0") != 0 && force[0] != '\0') return scalar_table();
  if (const KernelTable* t = avx2_table()) return *t;
  return scalar_table();
}
}  // namespace

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

}  // namespace cpd::kernels
