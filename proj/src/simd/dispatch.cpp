#include "echosim/simd/cpu.hpp"
#include "echosim/simd/kernels.hpp"
#include "kernels_internal.hpp"

#include <cstdlib>
#include <string_view>

namespace echosim::simd {

const KernelTable* avx2_kernels() {
#if defined(ECHOSIM_HAVE_AVX2)
  const CpuFeatures& f = cpu_features();
  if (f.avx2 && f.fma) return &detail::avx2_table();
#endif
  return nullptr;
}

const KernelTable& active_kernels() {
  static const KernelTable* chosen = [] {
    const char* env = std::getenv("ECHOSIM_SIMD");
    if (env != nullptr && std::string_view(env) == "scalar") return &scalar_kernels();
    if (const KernelTable* avx2 = avx2_kernels()) return avx2;
    return &scalar_kernels();
  }();
  return *chosen;
}

}  // namespace echosim::simd
