#include <cstdlib>
#include <string_view>

#include "otomech/simd/kernels.hpp"

namespace otomech::simd {

#if defined(OTOMECH_HAVE_AVX2)
const KernelTable& avx2_kernel_table() noexcept;
#endif
#if defined(OTOMECH_HAVE_NEON)
const KernelTable& neon_kernel_table() noexcept;
#endif

const KernelTable* avx2_kernels() noexcept {
#if defined(OTOMECH_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &avx2_kernel_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_kernels() noexcept {
#if defined(OTOMECH_HAVE_NEON)
  return &neon_kernel_table();
#else
  return nullptr;
#endif
}

namespace {

const KernelTable& select() noexcept {
  const char* env = std::getenv("OTOMECH_SIMD");
  const std::string_view wanted = env ? env : "";
  if (wanted == "scalar") return scalar_kernels();
  if (wanted == "avx2" && avx2_kernels()) return *avx2_kernels();
  if (wanted == "neon" && neon_kernels()) return *neon_kernels();
  if (const auto* t = avx2_kernels()) return *t;
  if (const auto* t = neon_kernels()) return *t;
  return scalar_kernels();
}

}  // namespace

const KernelTable& active_kernels() noexcept {
  static const KernelTable& table = select();
  return table;
}

}  // namespace otomech::simd
