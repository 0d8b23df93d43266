#pragma once

#include "echosim/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace echosim::simd::detail {

// Scalar single-point helpers shared by the reference kernels and the tails
// of the vector kernels.
float trilinear_point(const FloatGrid& g, float x, float y, float z, float background, bool clamp_outside);
std::uint16_t nearest_point(const LabelGrid& g, float x, float y, float z);
float edge_read(const float* row_or_col, int pos, int len, std::ptrdiff_t stride, Edge edge);

// Sobel cosine at column c of the middle row; cl/cr are the clamped neighbours.
inline float sobel_cosine(const float* up, const float* mid, const float* dn, int cl, int c, int cr, float sx,
                          float sy) {
  const float gx = ((up[cr] + 2.0f * mid[cr] + dn[cr]) - (up[cl] + 2.0f * mid[cl] + dn[cl])) * sx;
  const float gy = ((dn[cl] + 2.0f * dn[c] + dn[cr]) - (up[cl] + 2.0f * up[c] + up[cr])) * sy;
  const float mag = std::sqrt(gx * gx + gy * gy);
  return mag > 1e-12f ? std::min(std::abs(gy) / mag, 1.0f) : 1.0f;
}

#if defined(ECHOSIM_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

}  // namespace echosim::simd::detail
