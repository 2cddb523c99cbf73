#pragma once

// Data-parallel inner loops used by the frontend, the embedders and the
// retrieval index. Each kernel has a scalar reference implementation and
// optional AVX2+FMA / NEON variants; the variant is picked once at startup
// from the running CPU (override with OTOMECH_SIMD=scalar|avx2|neon).
//
// Variants are not bit-identical to the scalar reference (lane-wise partial
// sums change the rounding order). They agree within a few ulps per term and
// are each deterministic for a fixed input.

#include <cstddef>
#include <span>
#include <string_view>

namespace otomech::simd {

struct CosineTerms {
  double dot = 0.0;
  double norm_sq_a = 0.0;
  double norm_sq_b = 0.0;
};

struct KernelTable {
  std::string_view name;
  float (*dot_f32)(const float* a, const float* b, std::size_t n);
  double (*dot_f64)(const double* a, const double* b, std::size_t n);
  CosineTerms (*cosine_terms_f64)(const double* a, const double* b, std::size_t n);
  // out[i] = |re + i*im| for interleaved (re, im) pairs.
  void (*complex_magnitude_f32)(const float* interleaved, float* out, std::size_t n);
  // y[r] = dot(matrix row r, x) for a row-major rows x cols matrix.
  void (*matvec_f32)(const float* matrix, const float* x, float* y,
                     std::size_t rows, std::size_t cols);
};

const KernelTable& scalar_kernels() noexcept;

// nullptr when the variant was not compiled in or the CPU lacks the ISA.
const KernelTable* avx2_kernels() noexcept;
const KernelTable* neon_kernels() noexcept;

// The table selected for this process.
const KernelTable& active_kernels() noexcept;

inline float dot(std::span<const float> a, std::span<const float> b) {
  return active_kernels().dot_f32(a.data(), b.data(), a.size());
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active_kernels().dot_f64(a.data(), b.data(), a.size());
}

inline CosineTerms cosine_terms(std::span<const double> a, std::span<const double> b) {
  return active_kernels().cosine_terms_f64(a.data(), b.data(), a.size());
}

}  // namespace otomech::simd
