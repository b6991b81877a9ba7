#include <cstdlib>
#include <string_view>

#include "navlab/simd/kernels.hpp"

namespace navlab::simd {

#ifndef NAVLAB_HAVE_AVX2
const KernelTable* avx2_kernels() { return nullptr; }
#endif

bool cpu_supports_avx2() {
#if defined(NAVLAB_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& active_kernels() {
  static const KernelTable& chosen = [&]() -> const KernelTable& {
    const char* forced = std::getenv("NAVLAB_SIMD");
    if (forced && std::string_view(forced) == "scalar") return scalar_kernels();
    if (const KernelTable* avx = avx2_kernels(); avx && cpu_supports_avx2()) return *avx;
    return scalar_kernels();
  }();
  return chosen;
}

}  // namespace navlab::simd
