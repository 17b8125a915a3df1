#include "kernels_impl.hpp"

#include <arm_neon.h>

namespace mgcs::simd::detail {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
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

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t a = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), a, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_n_f64(vld1q_f64(x + i), alpha));
  for (; i < n; ++i) x[i] *= alpha;
}

double sum(const double* x, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
  double total = vaddvq_f64(acc);
  for (; i < n; ++i) total += x[i];
  return total;
}

void dot_rows(const double* q, const double* rows, std::size_t n_rows, std::size_t d, double* out) {
  for (std::size_t r = 0; r < n_rows; ++r) out[r] = dot(q, rows + r * d, d);
}

}  // namespace

const KernelTable& neon_table() noexcept {
  static const KernelTable table{Isa::Neon, dot, axpy, scale, sum, dot_rows};
  return table;
}

}  // namespace mgcs::simd::detail
