#pragma once

// Dense double-precision kernels behind every hot loop in the project:
// dot products for scoring, axpy for pooling and gradient accumulation, and
// a batched row scan for flat index search.
//
// Each kernel has a scalar reference implementation plus vectorized variants
// (AVX2+FMA on x86-64, NEON on aarch64). The variant is picked once at first
// use from the CPU's capabilities; MGCS_ISA=scalar|avx2|neon overrides it.
// Vectorized variants reassociate sums, so they agree with the reference to
// rounding, not bit-for-bit. Within one process the choice is fixed, which is
// what keeps pipeline outputs byte-identical between runs.

#include <cstddef>
#include <span>
#include <string_view>
#include <optional>

namespace mgcs::simd {

enum class Isa { Scalar, Avx2, Neon };

std::string_view to_string(Isa isa) noexcept;
std::optional<Isa> parse_isa(std::string_view name) noexcept;

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*scale)(double alpha, double* x, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  // out[r] = dot(q, rows + r * d) for r in [0, n_rows)
  void (*dot_rows)(const double* q, const double* rows, std::size_t n_rows, std::size_t d,
                   double* out);
};

bool isa_available(Isa isa) noexcept;

/// Table for a specific ISA; throws std::invalid_argument when unavailable.
const KernelTable& kernels_for(Isa isa);

/// The process-wide active table.
const KernelTable& kernels();

Isa active_isa();

/// Switches the active table. Intended for tests and benchmarks.
void set_active_isa(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return kernels().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  kernels().axpy(alpha, x.data(), y.data(), x.size());
}

inline void scale(double alpha, std::span<double> x) { kernels().scale(alpha, x.data(), x.size()); }

inline double sum(std::span<const double> x) { return kernels().sum(x.data(), x.size()); }

}  // namespace mgcs::simd
