#pragma once

namespace echosim::simd {

struct CpuFeatures {
  bool avx2 = false;
  bool fma = false;
};

/// Features of the running CPU, probed once.
const CpuFeatures& cpu_features();

}  // namespace echosim::simd
