#include "echosim/simd/kernels.hpp"
#include "kernels_internal.hpp"

#include <algorithm>
#include <cmath>

namespace echosim::simd {

namespace detail {

float trilinear_point(const FloatGrid& g, float x, float y, float z, float background, bool clamp_outside) {
  const float u[3] = {x, y, z};
  const int n[3] = {g.nx, g.ny, g.nz};
  int i0[3], i1[3];
  float t[3];
  for (int a = 0; a < 3; ++a) {
    if (!clamp_outside && !(u[a] >= -0.5f && u[a] <= static_cast<float>(n[a]) - 0.5f)) return background;
    float c = std::min(std::max(u[a], 0.0f), static_cast<float>(n[a] - 1));
    if (!(c == c)) c = 0.0f;
    const float fl = std::floor(c);
    i0[a] = static_cast<int>(fl);
    i1[a] = std::min(i0[a] + 1, n[a] - 1);
    t[a] = c - fl;
  }
  const std::size_t sx = 1, sy = static_cast<std::size_t>(g.nx), sz = sy * static_cast<std::size_t>(g.ny);
  auto at = [&](int i, int j, int k) { return g.data[i * sx + j * sy + k * sz]; };
  const float c00 = at(i0[0], i0[1], i0[2]) + t[0] * (at(i1[0], i0[1], i0[2]) - at(i0[0], i0[1], i0[2]));
  const float c10 = at(i0[0], i1[1], i0[2]) + t[0] * (at(i1[0], i1[1], i0[2]) - at(i0[0], i1[1], i0[2]));
  const float c01 = at(i0[0], i0[1], i1[2]) + t[0] * (at(i1[0], i0[1], i1[2]) - at(i0[0], i0[1], i1[2]));
  const float c11 = at(i0[0], i1[1], i1[2]) + t[0] * (at(i1[0], i1[1], i1[2]) - at(i0[0], i1[1], i1[2]));
  const float c0 = c00 + t[1] * (c10 - c00);
  const float c1 = c01 + t[1] * (c11 - c01);
  return c0 + t[2] * (c1 - c0);
}

std::uint16_t nearest_point(const LabelGrid& g, float x, float y, float z) {
  const float u[3] = {x, y, z};
  const int n[3] = {g.nx, g.ny, g.nz};
  int idx[3];
  for (int a = 0; a < 3; ++a) {
    if (!(u[a] > -1.0f && u[a] < static_cast<float>(n[a]))) return 0;
    idx[a] = static_cast<int>(std::ceil(u[a] - 0.5f));
    if (idx[a] < 0 || idx[a] >= n[a]) return 0;
  }
  return g.data[(static_cast<std::size_t>(idx[2]) * g.ny + idx[1]) * g.nx + idx[0]];
}

float edge_read(const float* row_or_col, int pos, int len, std::ptrdiff_t stride, Edge edge) {
  if (pos < 0 || pos >= len) {
    if (edge == Edge::zero) return 0.0f;
    pos = std::clamp(pos, 0, len - 1);
  }
  return row_or_col[pos * stride];
}

}  // namespace detail

namespace {

void trilinear_line(const FloatGrid& g, const Line& line, float background, bool clamp_outside, float* out) {
  for (int k = 0; k < line.count; ++k) {
    const float fk = static_cast<float>(k);
    out[k] = detail::trilinear_point(g, line.start[0] + fk * line.step[0], line.start[1] + fk * line.step[1],
                                     line.start[2] + fk * line.step[2], background, clamp_outside);
  }
}

void trilinear_pair(const FloatGrid& g, const float* second, const Line& line, float* out_first,
                    float* out_second) {
  trilinear_line(g, line, 0.0f, true, out_first);
  trilinear_line({second, g.nx, g.ny, g.nz}, line, 0.0f, true, out_second);
}

void nearest_line(const LabelGrid& g, const Line& line, std::uint16_t* out) {
  for (int k = 0; k < line.count; ++k) {
    const float fk = static_cast<float>(k);
    out[k] = detail::nearest_point(g, line.start[0] + fk * line.step[0], line.start[1] + fk * line.step[1],
                                   line.start[2] + fk * line.step[2]);
  }
}

void convolve_rows(const float* in, float* out, int rows, int width, const float* kernel, int radius, Edge edge) {
  for (int r = 0; r < rows; ++r) {
    const float* src = in + static_cast<std::size_t>(r) * width;
    float* dst = out + static_cast<std::size_t>(r) * width;
    for (int c = 0; c < width; ++c) {
      float acc = 0.0f;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[k + radius] * detail::edge_read(src, c + k, width, 1, edge);
      }
      dst[c] = acc;
    }
  }
}

void convolve_cols(const float* in, float* out, int rows, int width, const float* kernel, int radius, Edge edge) {
  for (int r = 0; r < rows; ++r) {
    float* dst = out + static_cast<std::size_t>(r) * width;
    for (int c = 0; c < width; ++c) {
      float acc = 0.0f;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[k + radius] * detail::edge_read(in + c, r + k, rows, width, edge);
      }
      dst[c] = acc;
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
    for (int c = 0; c < width; ++c) cur[c] = prev[c] * t[c];
  }
}

void combine(const float* magnitude, const float* psf_boundary, const float* energy, const float* psf_scatter,
             float gain, int n, float* out) {
  for (int i = 0; i < n; ++i) {
    const float v = gain * (magnitude[i] * psf_boundary[i] + energy[i] * psf_scatter[i]);
    out[i] = std::min(std::max(v, 0.0f), 1.0f);
  }
}

void incidence_cosine(const float* f, int rows, int width, float sx, float sy, float* out) {
  for (int r = 0; r < rows; ++r) {
    const float* up = f + static_cast<std::size_t>(std::max(r - 1, 0)) * width;
    const float* mid = f + static_cast<std::size_t>(r) * width;
    const float* dn = f + static_cast<std::size_t>(std::min(r + 1, rows - 1)) * width;
    float* o = out + static_cast<std::size_t>(r) * width;
    for (int c = 0; c < width; ++c) {
      const int cl = std::max(c - 1, 0), cr = std::min(c + 1, width - 1);
      o[c] = detail::sobel_cosine(up, mid, dn, cl, c, cr, sx, sy);
    }
  }
}

void tissue_maps(const float* ct, const std::uint16_t* labels, const TissueLuts& luts, int rows, int width,
                 float* impedance, float* transmission, float* boundary) {
  const std::size_t n = static_cast<std::size_t>(rows) * width;
  for (std::size_t i = 0; i < n; ++i) {
    const int l = std::min<int>(labels[i], luts.last);
    impedance[i] = luts.scale[l] * std::max(ct[i] - luts.ct_floor, luts.epsilon) + luts.z_offset;
    transmission[i] = luts.transmission[l];
    boundary[i] = i >= static_cast<std::size_t>(width) && labels[i] != labels[i - width] ? 1.0f : 0.0f;
  }
}

void reflection_magnitude(const float* energy, const float* cosine, const float* impedance, int rows, int width,
                          float* out) {
  const std::size_t n = static_cast<std::size_t>(rows) * width;
  std::fill(out, out + std::min<std::size_t>(n, width), 0.0f);
  for (std::size_t i = static_cast<std::size_t>(width); i < n; ++i) {
    const float za = impedance[i], zb = impedance[i - width];
    out[i] = std::abs(energy[i] * cosine[i] * (za - zb) / (za + zb));
  }
}

void scatter_gate(const float* n0, const float* n1, const std::uint16_t* labels, const float* sigma0,
                  const float* mu0, const float* mu1, int last, int n, float* out) {
  for (int i = 0; i < n; ++i) {
    const int l = std::min<int>(labels[i], last);
    out[i] = n1[i] <= mu1[l] ? n0[i] * sigma0[l] + mu0[l] : 0.0f;
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar",         trilinear_line,   trilinear_pair, nearest_line,
                                 convolve_rows,    convolve_cols,    energy_scan,    combine,
                                 incidence_cosine, tissue_maps,      reflection_magnitude, scatter_gate};
  return table;
}

}  // namespace echosim::simd
