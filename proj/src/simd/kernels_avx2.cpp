// Compiled with -mavx2 -mfma. Only reached after a runtime CPU check.
#include "otomech/simd/kernels.hpp"

#include <immintrin.h>

#include <cmath>

namespace otomech::simd {
namespace {

inline float hsum256_ps(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 shuf = _mm_movehdup_ps(lo);
  __m128 sums = _mm_add_ps(lo, shuf);
  shuf = _mm_movehl_ps(shuf, sums);
  sums = _mm_add_ss(sums, shuf);
  return _mm_cvtss_f32(sums);
}

inline double hsum256_pd(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d high64 = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, high64));
}

float dot_f32(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8)
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  float acc = hsum256_ps(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double dot_f64(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double acc = hsum256_pd(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

CosineTerms cosine_terms_f64(const double* a, const double* b, std::size_t n) {
  __m256d ab = _mm256_setzero_pd();
  __m256d aa = _mm256_setzero_pd();
  __m256d bb = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d va = _mm256_loadu_pd(a + i);
    const __m256d vb = _mm256_loadu_pd(b + i);
    ab = _mm256_fmadd_pd(va, vb, ab);
    aa = _mm256_fmadd_pd(va, va, aa);
    bb = _mm256_fmadd_pd(vb, vb, bb);
  }
  CosineTerms t{hsum256_pd(ab), hsum256_pd(aa), hsum256_pd(bb)};
  for (; i < n; ++i) {
    t.dot += a[i] * b[i];
    t.norm_sq_a += a[i] * a[i];
    t.norm_sq_b += b[i] * b[i];
  }
  return t;
}

void complex_magnitude_f32(const float* c, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    // Two loads of four (re, im) pairs each, squared, then pairwise-added.
    const __m256 lo = _mm256_loadu_ps(c + 2 * i);
    const __m256 hi = _mm256_loadu_ps(c + 2 * i + 8);
    const __m256 sum = _mm256_hadd_ps(_mm256_mul_ps(lo, lo), _mm256_mul_ps(hi, hi));
    // hadd interleaves 128-bit lanes: [lo0 lo1 hi0 hi1 | lo2 lo3 hi2 hi3].
    const __m256 ordered = _mm256_castpd_ps(
        _mm256_permute4x64_pd(_mm256_castps_pd(sum), 0b11011000));
    _mm256_storeu_ps(out + i, _mm256_sqrt_ps(ordered));
  }
  for (; i < n; ++i) {
    const float re = c[2 * i];
    const float im = c[2 * i + 1];
    out[i] = std::sqrt(re * re + im * im);
  }
}

void matvec_f32(const float* m, const float* x, float* y, std::size_t rows, std::size_t cols) {
  std::size_t r = 0;
  // Four rows at a time so each x load feeds four FMAs.
  for (; r + 4 <= rows; r += 4) {
    const float* m0 = m + (r + 0) * cols;
    const float* m1 = m + (r + 1) * cols;
    const float* m2 = m + (r + 2) * cols;
    const float* m3 = m + (r + 3) * cols;
    __m256 a0 = _mm256_setzero_ps(), a1 = _mm256_setzero_ps();
    __m256 a2 = _mm256_setzero_ps(), a3 = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= cols; i += 8) {
      const __m256 vx = _mm256_loadu_ps(x + i);
      a0 = _mm256_fmadd_ps(_mm256_loadu_ps(m0 + i), vx, a0);
      a1 = _mm256_fmadd_ps(_mm256_loadu_ps(m1 + i), vx, a1);
      a2 = _mm256_fmadd_ps(_mm256_loadu_ps(m2 + i), vx, a2);
      a3 = _mm256_fmadd_ps(_mm256_loadu_ps(m3 + i), vx, a3);
    }
    float s0 = hsum256_ps(a0), s1 = hsum256_ps(a1), s2 = hsum256_ps(a2), s3 = hsum256_ps(a3);
    for (; i < cols; ++i) {
      s0 += m0[i] * x[i];
      s1 += m1[i] * x[i];
      s2 += m2[i] * x[i];
      s3 += m3[i] * x[i];
    }
    y[r] = s0;
    y[r + 1] = s1;
    y[r + 2] = s2;
    y[r + 3] = s3;
  }
  for (; r < rows; ++r) y[r] = dot_f32(m + r * cols, x, cols);
}

}  // namespace

const KernelTable& avx2_kernel_table() noexcept {
  static const KernelTable table{
      "avx2", &dot_f32, &dot_f64, &cosine_terms_f64, &complex_magnitude_f32, &matvec_f32,
  };
  return table;
}

}  // namespace otomech::simd
