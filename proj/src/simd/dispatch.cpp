#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernels_impl.hpp"

namespace mgcs::simd {

std::string_view to_string(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

std::optional<Isa> parse_isa(std::string_view name) noexcept {
  if (name == "scalar") return Isa::Scalar;
  if (name == "avx2") return Isa::Avx2;
  if (name == "neon") return Isa::Neon;
  return std::nullopt;
}

bool isa_available(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if defined(MGCS_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(MGCS_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& kernels_for(Isa isa) {
  if (!isa_available(isa))
    throw std::invalid_argument("kernel variant unavailable on this CPU: " + std::string(to_string(isa)));
  switch (isa) {
#if defined(MGCS_HAVE_AVX2)
    case Isa::Avx2: return detail::avx2_table();
#endif
#if defined(MGCS_HAVE_NEON)
    case Isa::Neon: return detail::neon_table();
#endif
    default: return detail::scalar_table();
  }
}

namespace {

const KernelTable* select_default() {
  if (const char* env = std::getenv("MGCS_ISA")) {
    if (auto isa = parse_isa(env); isa && isa_available(*isa)) return &kernels_for(*isa);
  }
  for (Isa isa : {Isa::Avx2, Isa::Neon})
    if (isa_available(isa)) return &kernels_for(isa);
  return &detail::scalar_table();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{select_default()};
  return slot;
}

}  // namespace

const KernelTable& kernels() { return *active_slot().load(std::memory_order_acquire); }

Isa active_isa() { return kernels().isa; }

void set_active_isa(Isa isa) { active_slot().store(&kernels_for(isa), std::memory_order_release); }

}  // namespace mgcs::simd
