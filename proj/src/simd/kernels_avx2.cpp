// AVX2/FMA variants. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after a runtime CPU check (see dispatch.cpp).

#include "kernels_internal.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cstddef>
#include <vector>

namespace echosim::simd::detail {

namespace {

inline __m256 lane_offsets() { return _mm256_setr_ps(0, 1, 2, 3, 4, 5, 6, 7); }

// Voxel coordinates of eight consecutive points of a line, clamped into the
// grid, as the eight corner offsets and the fractional weights.
struct Cell {
  __m256i x0, x1, b00, b10, b01, b11;
  __m256 t[3];
  __m256 inside;  // lanes inside [-0.5, n - 0.5] on every axis
};

class LineCells {
 public:
  LineCells(const FloatGrid& g, const Line& line) {
    const int n[3] = {g.nx, g.ny, g.nz};
    for (int a = 0; a < 3; ++a) {
      hi_[a] = _mm256_set1_ps(n[a] - 0.5f);
      last_f_[a] = _mm256_set1_ps(static_cast<float>(n[a] - 1));
      last_i_[a] = _mm256_set1_epi32(n[a] - 1);
      start_[a] = _mm256_set1_ps(line.start[a]);
      step_[a] = _mm256_set1_ps(line.step[a]);
    }
    stride_y_ = _mm256_set1_epi32(g.nx);
    stride_z_ = _mm256_set1_epi32(g.nx * g.ny);
  }

  // Lanes past the end of the line still clamp their indices into the grid,
  // so a full vector can be evaluated for the tail.
  [[gnu::always_inline]] Cell at(int k, bool track_inside) const {
    const __m256 fk = _mm256_add_ps(_mm256_set1_ps(static_cast<float>(k)), lane_offsets());
    const __m256 zero = _mm256_setzero_ps();
    const __m256i one = _mm256_set1_epi32(1);
    Cell cell;
    cell.inside = _mm256_castsi256_ps(_mm256_set1_epi32(-1));
    __m256i i0[3], i1[3];
    for (int a = 0; a < 3; ++a) {
      const __m256 u = _mm256_add_ps(start_[a], _mm256_mul_ps(fk, step_[a]));
      if (track_inside) {
        cell.inside = _mm256_and_ps(cell.inside, _mm256_cmp_ps(u, _mm256_set1_ps(-0.5f), _CMP_GE_OQ));
        cell.inside = _mm256_and_ps(cell.inside, _mm256_cmp_ps(u, hi_[a], _CMP_LE_OQ));
      }
      // max_ps returns the second operand for NaN input, mapping NaN to 0.
      const __m256 c = _mm256_min_ps(_mm256_max_ps(u, zero), last_f_[a]);
      const __m256 fl = _mm256_floor_ps(c);
      i0[a] = _mm256_cvttps_epi32(fl);
      i1[a] = _mm256_min_epi32(_mm256_add_epi32(i0[a], one), last_i_[a]);
      cell.t[a] = _mm256_sub_ps(c, fl);
    }
    const __m256i y0 = _mm256_mullo_epi32(i0[1], stride_y_);
    const __m256i y1 = _mm256_mullo_epi32(i1[1], stride_y_);
    const __m256i z0 = _mm256_mullo_epi32(i0[2], stride_z_);
    const __m256i z1 = _mm256_mullo_epi32(i1[2], stride_z_);
    cell.x0 = i0[0];
    cell.x1 = i1[0];
    cell.b00 = _mm256_add_epi32(y0, z0);
    cell.b10 = _mm256_add_epi32(y1, z0);
    cell.b01 = _mm256_add_epi32(y0, z1);
    cell.b11 = _mm256_add_epi32(y1, z1);
    return cell;
  }

 private:
  __m256 hi_[3], last_f_[3], start_[3], step_[3];
  __m256i last_i_[3], stride_y_, stride_z_;
};

[[gnu::always_inline]] inline __m256 interpolate(const float* data, const Cell& c) {
  auto gather = [data](__m256i base, __m256i xi) { return _mm256_i32gather_ps(data, _mm256_add_epi32(base, xi), 4); };
  // Same operation order as the scalar reference: a + t * (b - a).
  auto lerp = [](__m256 a, __m256 b, __m256 w) { return _mm256_add_ps(a, _mm256_mul_ps(w, _mm256_sub_ps(b, a))); };
  const __m256 c00 = lerp(gather(c.b00, c.x0), gather(c.b00, c.x1), c.t[0]);
  const __m256 c10 = lerp(gather(c.b10, c.x0), gather(c.b10, c.x1), c.t[0]);
  const __m256 c01 = lerp(gather(c.b01, c.x0), gather(c.b01, c.x1), c.t[0]);
  const __m256 c11 = lerp(gather(c.b11, c.x0), gather(c.b11, c.x1), c.t[0]);
  return lerp(lerp(c00, c10, c.t[1]), lerp(c01, c11, c.t[1]), c.t[2]);
}

void store_partial(float* out, __m256 v, int count) {
  if (count >= 8) {
    _mm256_storeu_ps(out, v);
    return;
  }
  alignas(32) float tail[8];
  _mm256_store_ps(tail, v);
  std::copy(tail, tail + count, out);
}

void trilinear_line(const FloatGrid& g, const Line& line, float background, bool clamp_outside, float* out) {
  const LineCells cells(g, line);
  const __m256 bg = _mm256_set1_ps(background);
  for (int k = 0; k < line.count; k += 8) {
    const Cell c = cells.at(k, !clamp_outside);
    __m256 v;
    if (clamp_outside) {
      v = interpolate(g.data, c);
    } else if (_mm256_movemask_ps(c.inside) == 0) {
      v = bg;
    } else {
      v = _mm256_blendv_ps(bg, interpolate(g.data, c), c.inside);
    }
    store_partial(out + k, v, line.count - k);
  }
}

void trilinear_pair(const FloatGrid& g, const float* second, const Line& line, float* out_first,
                    float* out_second) {
  const LineCells cells(g, line);
  for (int k = 0; k < line.count; k += 8) {
    const Cell c = cells.at(k, false);
    store_partial(out_first + k, interpolate(g.data, c), line.count - k);
    store_partial(out_second + k, interpolate(second, c), line.count - k);
  }
}

void nearest_line(const LabelGrid& g, const Line& line, std::uint16_t* out) {
  const int n = line.count;
  const __m256 half = _mm256_set1_ps(0.5f);
  const __m256 neg_one = _mm256_set1_ps(-1.0f);
  const __m256 dims_f[3] = {_mm256_set1_ps(static_cast<float>(g.nx)), _mm256_set1_ps(static_cast<float>(g.ny)),
                            _mm256_set1_ps(static_cast<float>(g.nz))};
  const __m256i zero_i = _mm256_setzero_si256();
  const __m256i dims_i[3] = {_mm256_set1_epi32(g.nx), _mm256_set1_epi32(g.ny), _mm256_set1_epi32(g.nz)};
  const __m256i stride_y = _mm256_set1_epi32(g.nx);
  const __m256i stride_z = _mm256_set1_epi32(g.nx * g.ny);
  const __m256i last_voxel = _mm256_set1_epi32(g.nx * g.ny * g.nz - 1);
  const __m256i low16 = _mm256_set1_epi32(0xffff);
  alignas(32) int idx[8];
  alignas(32) int ok[8];

  for (int k = 0; k < n; k += 8) {
    const __m256 fk = _mm256_add_ps(_mm256_set1_ps(static_cast<float>(k)), lane_offsets());
    __m256i valid = _mm256_set1_epi32(-1);
    __m256i ii[3];
    for (int a = 0; a < 3; ++a) {
      __m256 u = _mm256_add_ps(_mm256_set1_ps(line.start[a]), _mm256_mul_ps(fk, _mm256_set1_ps(line.step[a])));
      const __m256 in_band = _mm256_and_ps(_mm256_cmp_ps(u, neg_one, _CMP_GT_OQ), _mm256_cmp_ps(u, dims_f[a], _CMP_LT_OQ));
      valid = _mm256_and_si256(valid, _mm256_castps_si256(in_band));
      u = _mm256_blendv_ps(_mm256_setzero_ps(), u, in_band);
      ii[a] = _mm256_cvttps_epi32(_mm256_ceil_ps(_mm256_sub_ps(u, half)));
      valid = _mm256_and_si256(valid, _mm256_cmpgt_epi32(ii[a], _mm256_set1_epi32(-1)));
      valid = _mm256_and_si256(valid, _mm256_cmpgt_epi32(dims_i[a], ii[a]));
      ii[a] = _mm256_blendv_epi8(zero_i, ii[a], valid);
    }
    const __m256i lin = _mm256_add_epi32(ii[0], _mm256_add_epi32(_mm256_mullo_epi32(ii[1], stride_y),
                                                                  _mm256_mullo_epi32(ii[2], stride_z)));
    const int m = std::min(8, n - k);
    // A 32-bit gather at element idx also reads element idx + 1, which does
    // not exist for the final voxel; such vectors take the scalar path.
    if (_mm256_movemask_epi8(_mm256_and_si256(valid, _mm256_cmpeq_epi32(lin, last_voxel))) == 0) {
      const __m256i words = _mm256_mask_i32gather_epi32(zero_i, reinterpret_cast<const int*>(g.data), lin, valid, 2);
      const __m256i packed = _mm256_packus_epi32(_mm256_and_si256(words, low16), zero_i);
      const __m128i labels = _mm256_castsi256_si128(_mm256_permute4x64_epi64(packed, 0x08));
      if (m == 8) {
        _mm_storeu_si128(reinterpret_cast<__m128i*>(out + k), labels);
      } else {
        alignas(16) std::uint16_t tail[8];
        _mm_store_si128(reinterpret_cast<__m128i*>(tail), labels);
        std::copy(tail, tail + m, out + k);
      }
      continue;
    }
    _mm256_store_si256(reinterpret_cast<__m256i*>(idx), lin);
    _mm256_store_si256(reinterpret_cast<__m256i*>(ok), valid);
    for (int l = 0; l < m; ++l) out[k + l] = ok[l] ? g.data[static_cast<unsigned>(idx[l])] : std::uint16_t{0};
  }
}

__m256i tail_mask(int count) {
  return _mm256_cmpgt_epi32(_mm256_set1_epi32(count), _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7));
}

// dst[c] = sum_k kernel[k] * load(k)[c] over c in [0, width), taps in
// ascending order. With Sparse, a null row is a zero tap.
template <bool Sparse, class Load>
void correlate(float* dst, int width, const float* kernel, int taps, __m256i mask, Load load) {
  int c = 0;
  for (; c + 32 <= width; c += 32) {
    __m256 a0 = _mm256_setzero_ps(), a1 = a0, a2 = a0, a3 = a0;
    for (int k = 0; k < taps; ++k) {
      const float* p = load(k);
      if (Sparse && !p) continue;
      const __m256 w = _mm256_broadcast_ss(kernel + k);
      a0 = _mm256_add_ps(a0, _mm256_mul_ps(w, _mm256_loadu_ps(p + c)));
      a1 = _mm256_add_ps(a1, _mm256_mul_ps(w, _mm256_loadu_ps(p + c + 8)));
      a2 = _mm256_add_ps(a2, _mm256_mul_ps(w, _mm256_loadu_ps(p + c + 16)));
      a3 = _mm256_add_ps(a3, _mm256_mul_ps(w, _mm256_loadu_ps(p + c + 24)));
    }
    _mm256_storeu_ps(dst + c, a0);
    _mm256_storeu_ps(dst + c + 8, a1);
    _mm256_storeu_ps(dst + c + 16, a2);
    _mm256_storeu_ps(dst + c + 24, a3);
  }
  for (; c + 8 <= width; c += 8) {
    __m256 acc = _mm256_setzero_ps();
    for (int k = 0; k < taps; ++k) {
      const float* p = load(k);
      if (!Sparse || p) acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_broadcast_ss(kernel + k), _mm256_loadu_ps(p + c)));
    }
    _mm256_storeu_ps(dst + c, acc);
  }
  if (c < width) {
    __m256 acc = _mm256_setzero_ps();
    for (int k = 0; k < taps; ++k) {
      const float* p = load(k);
      if (!Sparse || p) acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_broadcast_ss(kernel + k), _mm256_maskload_ps(p + c, mask)));
    }
    _mm256_maskstore_ps(dst + c, mask, acc);
  }
}

void convolve_rows(const float* in, float* out, int rows, int width, const float* kernel, int radius, Edge edge) {
  const int taps = 2 * radius + 1;
  // Row copied into a padded buffer so every output column takes the vector path.
  thread_local std::vector<float> padded;
  padded.assign(static_cast<std::size_t>(width + 2 * radius + 8), 0.0f);
  const __m256i mask = tail_mask(width % 8);
  for (int r = 0; r < rows; ++r) {
    const float* src = in + static_cast<std::size_t>(r) * width;
    float* p = padded.data();
    const float left = edge == Edge::zero ? 0.0f : src[0];
    const float right = edge == Edge::zero ? 0.0f : src[width - 1];
    std::fill(p, p + radius, left);
    std::copy(src, src + width, p + radius);
    std::fill(p + radius + width, p + 2 * radius + width, right);
    correlate<false>(out + static_cast<std::size_t>(r) * width, width, kernel, taps, mask,
              [p](int k) { return static_cast<const float*>(p + k); });
  }
}

void convolve_cols(const float* in, float* out, int rows, int width, const float* kernel, int radius, Edge edge) {
  const int taps = 2 * radius + 1;
  const __m256i mask = tail_mask(width % 8);
  thread_local std::vector<const float*> src;
  src.resize(static_cast<std::size_t>(taps));
  for (int r = 0; r < rows; ++r) {
    // Source row per tap; null marks a zero-padded tap. Taps keep the
    // ascending order of the scalar reference.
    int used = 0;
    for (int k = -radius; k <= radius; ++k) {
      int rr = r + k;
      if (rr < 0 || rr >= rows) {
        if (edge == Edge::zero) {
          src[k + radius] = nullptr;
          continue;
        }
        rr = std::clamp(rr, 0, rows - 1);
      }
      src[k + radius] = in + static_cast<std::size_t>(rr) * width;
      ++used;
    }
    float* dst = out + static_cast<std::size_t>(r) * width;
    const float* const* rows_of = src.data();
    auto row = [rows_of](int k) { return rows_of[k]; };
    if (used == taps) {
      correlate<false>(dst, width, kernel, taps, mask, row);
    } else {
      correlate<true>(dst, width, kernel, taps, mask, row);
    }
  }
}

void energy_scan(const float* transmission, float e0, int rows, int width, float* energy) {
  if (rows <= 0) return;
  std::fill(energy, energy + width, e0);
  for (int r = 1; r < rows; ++r) {
    const float* prev = energy + static_cast<std::size_t>(r - 1) * width;
    const float* t = transmission + static_cast<std::size_t>(r - 1) * width;
    float* cur = energy + static_cast<std::size_t>(r) * width;
    int c = 0;
    for (; c + 8 <= width; c += 8) {
      _mm256_storeu_ps(cur + c, _mm256_mul_ps(_mm256_loadu_ps(prev + c), _mm256_loadu_ps(t + c)));
    }
    for (; c < width; ++c) cur[c] = prev[c] * t[c];
  }
}

void combine(const float* magnitude, const float* psf_boundary, const float* energy, const float* psf_scatter,
             float gain, int n, float* out) {
  const __m256 g = _mm256_set1_ps(gain);
  const __m256 zero = _mm256_setzero_ps();
  const __m256 one = _mm256_set1_ps(1.0f);
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 refl = _mm256_mul_ps(_mm256_loadu_ps(magnitude + i), _mm256_loadu_ps(psf_boundary + i));
    const __m256 sum = _mm256_fmadd_ps(_mm256_loadu_ps(energy + i), _mm256_loadu_ps(psf_scatter + i), refl);
    _mm256_storeu_ps(out + i, _mm256_min_ps(_mm256_max_ps(_mm256_mul_ps(g, sum), zero), one));
  }
  for (; i < n; ++i) {
    const float v = gain * (magnitude[i] * psf_boundary[i] + energy[i] * psf_scatter[i]);
    out[i] = std::min(std::max(v, 0.0f), 1.0f);
  }
}

void incidence_cosine(const float* f, int rows, int width, float sx, float sy, float* out) {
  const __m256 two = _mm256_set1_ps(2.0f);
  const __m256 vsx = _mm256_set1_ps(sx), vsy = _mm256_set1_ps(sy);
  const __m256 tiny = _mm256_set1_ps(1e-12f);
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 abs_mask = _mm256_castsi256_ps(_mm256_set1_epi32(0x7fffffff));
  for (int r = 0; r < rows; ++r) {
    const float* up = f + static_cast<std::size_t>(std::max(r - 1, 0)) * width;
    const float* mid = f + static_cast<std::size_t>(r) * width;
    const float* dn = f + static_cast<std::size_t>(std::min(r + 1, rows - 1)) * width;
    float* o = out + static_cast<std::size_t>(r) * width;
    auto scalar_at = [&](int c) {
      o[c] = sobel_cosine(up, mid, dn, std::max(c - 1, 0), c, std::min(c + 1, width - 1), sx, sy);
    };
    if (width < 10) {
      for (int c = 0; c < width; ++c) scalar_at(c);
      continue;
    }
    scalar_at(0);
    int c = 1;
    for (; c + 8 <= width - 1; c += 8) {
      auto ld = [](const float* p) { return _mm256_loadu_ps(p); };
      const __m256 ul = ld(up + c - 1), uc = ld(up + c), ur = ld(up + c + 1);
      const __m256 ml = ld(mid + c - 1), mr = ld(mid + c + 1);
      const __m256 dl = ld(dn + c - 1), dc = ld(dn + c), dr = ld(dn + c + 1);
      const __m256 right = _mm256_add_ps(_mm256_add_ps(ur, _mm256_mul_ps(two, mr)), dr);
      const __m256 left = _mm256_add_ps(_mm256_add_ps(ul, _mm256_mul_ps(two, ml)), dl);
      const __m256 down = _mm256_add_ps(_mm256_add_ps(dl, _mm256_mul_ps(two, dc)), dr);
      const __m256 upper = _mm256_add_ps(_mm256_add_ps(ul, _mm256_mul_ps(two, uc)), ur);
      const __m256 gx = _mm256_mul_ps(_mm256_sub_ps(right, left), vsx);
      const __m256 gy = _mm256_mul_ps(_mm256_sub_ps(down, upper), vsy);
      const __m256 mag = _mm256_sqrt_ps(_mm256_add_ps(_mm256_mul_ps(gx, gx), _mm256_mul_ps(gy, gy)));
      const __m256 cosv = _mm256_min_ps(_mm256_div_ps(_mm256_and_ps(gy, abs_mask), mag), one);
      _mm256_storeu_ps(o + c, _mm256_blendv_ps(one, cosv, _mm256_cmp_ps(mag, tiny, _CMP_GT_OQ)));
    }
    for (; c < width; ++c) scalar_at(c);
  }
}

void tissue_maps(const float* ct, const std::uint16_t* labels, const TissueLuts& luts, int rows, int width,
                 float* impedance, float* transmission, float* boundary) {
  const int n = rows * width;
  const __m256i vlast = _mm256_set1_epi32(luts.last);
  const __m256 floor_v = _mm256_set1_ps(luts.ct_floor), eps = _mm256_set1_ps(luts.epsilon);
  const __m256 offset = _mm256_set1_ps(luts.z_offset), one = _mm256_set1_ps(1.0f);
  auto load_labels = [labels](int i) {
    return _mm256_cvtepu16_epi32(_mm_loadu_si128(reinterpret_cast<const __m128i*>(labels + i)));
  };
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256i raw = load_labels(i);
    const __m256i l = _mm256_min_epi32(raw, vlast);
    const __m256 scale = _mm256_i32gather_ps(luts.scale, l, 4);
    const __m256 v = _mm256_max_ps(_mm256_sub_ps(_mm256_loadu_ps(ct + i), floor_v), eps);
    _mm256_storeu_ps(impedance + i, _mm256_add_ps(_mm256_mul_ps(scale, v), offset));
    _mm256_storeu_ps(transmission + i, _mm256_i32gather_ps(luts.transmission, l, 4));
    if (i >= width) {
      const __m256i same = _mm256_cmpeq_epi32(raw, load_labels(i - width));
      _mm256_storeu_ps(boundary + i, _mm256_andnot_ps(_mm256_castsi256_ps(same), one));
    } else {
      for (int j = i; j < i + 8; ++j) boundary[j] = j >= width && labels[j] != labels[j - width] ? 1.0f : 0.0f;
    }
  }
  for (; i < n; ++i) {
    const int l = std::min<int>(labels[i], luts.last);
    impedance[i] = luts.scale[l] * std::max(ct[i] - luts.ct_floor, luts.epsilon) + luts.z_offset;
    transmission[i] = luts.transmission[l];
    boundary[i] = i >= width && labels[i] != labels[i - width] ? 1.0f : 0.0f;
  }
}

void reflection_magnitude(const float* energy, const float* cosine, const float* impedance, int rows, int width,
                          float* out) {
  const int n = rows * width;
  std::fill(out, out + std::min(n, width), 0.0f);
  const __m256 abs_mask = _mm256_castsi256_ps(_mm256_set1_epi32(0x7fffffff));
  int i = width;
  for (; i + 8 <= n; i += 8) {
    const __m256 za = _mm256_loadu_ps(impedance + i), zb = _mm256_loadu_ps(impedance + i - width);
    const __m256 num = _mm256_mul_ps(_mm256_mul_ps(_mm256_loadu_ps(energy + i), _mm256_loadu_ps(cosine + i)),
                                     _mm256_sub_ps(za, zb));
    _mm256_storeu_ps(out + i, _mm256_and_ps(_mm256_div_ps(num, _mm256_add_ps(za, zb)), abs_mask));
  }
  for (; i < n; ++i) {
    const float za = impedance[i], zb = impedance[i - width];
    out[i] = std::abs(energy[i] * cosine[i] * (za - zb) / (za + zb));
  }
}

void scatter_gate(const float* n0, const float* n1, const std::uint16_t* labels, const float* sigma0,
                  const float* mu0, const float* mu1, int last, int n, float* out) {
  const __m256i vlast = _mm256_set1_epi32(last);
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m128i l16 = _mm_loadu_si128(reinterpret_cast<const __m128i*>(labels + i));
    const __m256i l = _mm256_min_epi32(_mm256_cvtepu16_epi32(l16), vlast);
    const __m256 s0 = _mm256_i32gather_ps(sigma0, l, 4);
    const __m256 m0 = _mm256_i32gather_ps(mu0, l, 4);
    const __m256 m1 = _mm256_i32gather_ps(mu1, l, 4);
    const __m256 v = _mm256_add_ps(_mm256_mul_ps(_mm256_loadu_ps(n0 + i), s0), m0);
    const __m256 keep = _mm256_cmp_ps(_mm256_loadu_ps(n1 + i), m1, _CMP_LE_OQ);
    _mm256_storeu_ps(out + i, _mm256_and_ps(v, keep));
  }
  for (; i < n; ++i) {
    const int l = std::min<int>(labels[i], last);
    out[i] = n1[i] <= mu1[l] ? n0[i] * sigma0[l] + mu0[l] : 0.0f;
  }
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{"avx2",           trilinear_line, trilinear_pair,       nearest_line,
                                 convolve_rows,    convolve_cols,  energy_scan,          combine,
                                 incidence_cosine, tissue_maps,    reflection_magnitude, scatter_gate};
  return table;
}

}  // namespace echosim::simd::detail
