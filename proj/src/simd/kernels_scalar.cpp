#include "otomech/simd/kernels.hpp"

#include <cmath>

namespace otomech::simd {
namespace {

float dot_f32(const float* a, const float* b, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double dot_f64(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

CosineTerms cosine_terms_f64(const double* a, const double* b, std::size_t n) {
  CosineTerms t;
  for (std::size_t i = 0; i < n; ++i) {
    t.dot += a[i] * b[i];
    t.norm_sq_a += a[i] * a[i];
    t.norm_sq_b += b[i] * b[i];
  }
  return t;
}

void complex_magnitude_f32(const float* c, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const float re = c[2 * i];
    const float im = c[2 * i + 1];
    out[i] = std::sqrt(re * re + im * im);
  }
}

void matvec_f32(const float* m, const float* x, float* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_f32(m + r * cols, x, cols);
}

}  // namespace

const KernelTable& scalar_kernels() noexcept {
  static const KernelTable table{
      "scalar", &dot_f32, &dot_f64, &cosine_terms_f64, &complex_magnitude_f32, &matvec_f32,
  };
  return table;
}

}  // namespace otomech::simd
