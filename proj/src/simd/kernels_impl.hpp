#pragma once

#include "mgcs/simd/kernels.hpp"

namespace mgcs::simd::detail {

const KernelTable& scalar_table() noexcept;
#if defined(MGCS_HAVE_AVX2)
const KernelTable& avx2_table() noexcept;
#endif
#if defined(MGCS_HAVE_NEON)
const KernelTable& neon_table() noexcept;
#endif

}  // namespace mgcs::simd::detail
