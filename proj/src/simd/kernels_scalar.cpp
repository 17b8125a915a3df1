#include "kernels_impl.hpp"

namespace mgcs::simd::detail {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

double sum(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

void dot_rows(const double* q, const double* rows, std::size_t n_rows, std::size_t d, double* out) {
  for (std::size_t r = 0; r < n_rows; ++r) out[r] = dot(q, rows + r * d, d);
}

}  // namespace

const KernelTable& scalar_table() noexcept {
  static const KernelTable table{Isa::Scalar, dot, axpy, scale, sum, dot_rows};
  return table;
}

}  // namespace mgcs::simd::detail
