// AArch64 only; NEON is part of the base ISA there.
#include "otomech/simd/kernels.hpp"

#include <arm_neon.h>

#include <cmath>

namespace otomech::simd {
namespace {

float dot_f32(const float* a, const float* b, std::size_t n) {
  float32x4_t acc0 = vdupq_n_f32(0.0f);
  float32x4_t acc1 = vdupq_n_f32(0.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = vfmaq_f32(acc0, vld1q_f32(a + i), vld1q_f32(b + i));
    acc1 = vfmaq_f32(acc1, vld1q_f32(a + i + 4), vld1q_f32(b + i + 4));
  }
  float acc = vaddvq_f32(vaddq_f32(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double dot_f64(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

CosineTerms cosine_terms_f64(const double* a, const double* b, std::size_t n) {
  float64x2_t ab = vdupq_n_f64(0.0), aa = vdupq_n_f64(0.0), bb = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t va = vld1q_f64(a + i);
    const float64x2_t vb = vld1q_f64(b + i);
    ab = vfmaq_f64(ab, va, vb);
    aa = vfmaq_f64(aa, va, va);
    bb = vfmaq_f64(bb, vb, vb);
  }
  CosineTerms t{vaddvq_f64(ab), vaddvq_f64(aa), vaddvq_f64(bb)};
  for (; i < n; ++i) {
    t.dot += a[i] * b[i];
    t.norm_sq_a += a[i] * a[i];
    t.norm_sq_b += b[i] * b[i];
  }
  return t;
}

void complex_magnitude_f32(const float* c, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4x2_t v = vld2q_f32(c + 2 * i);
    const float32x4_t sq = vfmaq_f32(vmulq_f32(v.val[0], v.val[0]), v.val[1], v.val[1]);
    vst1q_f32(out + i, vsqrtq_f32(sq));
  }
  for (; i < n; ++i) {
    const float re = c[2 * i];
    const float im = c[2 * i + 1];
    out[i] = std::sqrt(re * re + im * im);
  }
}

void matvec_f32(const float* m, const float* x, float* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_f32(m + r * cols, x, cols);
}

}  // namespace

const KernelTable& neon_kernel_table() noexcept {
  static const KernelTable table{
      "neon", &dot_f32, &dot_f64, &cosine_terms_f64, &complex_magnitude_f32, &matvec_f32,
  };
  return table;
}

}  // namespace otomech::simd
