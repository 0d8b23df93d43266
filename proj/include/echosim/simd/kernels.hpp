#pragma once

// Data-parallel inner loops of the image-formation pipeline.
//
// Every kernel has a scalar reference implementation and, on x86-64 builds,
// an AVX2/FMA variant. active_kernels() picks the best variant the running
// CPU supports; setting ECHOSIM_SIMD=scalar in the environment forces the
// reference path. The variants agree to float rounding (see test_kernels).

#include <cstdint>

namespace echosim::simd {

/// Read-only float grid addressed in voxel coordinates, x fastest.
struct FloatGrid {
  const float* data = nullptr;
  int nx = 0, ny = 0, nz = 0;
};

struct LabelGrid {
  const std::uint16_t* data = nullptr;
  int nx = 0, ny = 0, nz = 0;
};

/// Points p_k = start + k * step (voxel coordinates), k in [0, count).
struct Line {
  float start[3];
  float step[3];
  int count;
};

/// Per-label lookups indexed by min(label, last).
struct TissueLuts {
  const float* scale;
  const float* transmission;
  int last;
  float ct_floor, epsilon, z_offset;
};

enum class Edge : std::uint8_t {
  zero,   // samples beyond the border read as 0
  clamp,  // samples beyond the border repeat the edge value
};

struct KernelTable {
  const char* name;

  /// Trilinear samples along a line. With `clamp_outside` false, points whose
  /// coordinate leaves [-0.5, n - 0.5] on any axis yield `background`;
  /// otherwise every point is clamped into the grid.
  void (*trilinear_line)(const FloatGrid& grid, const Line& line, float background, bool clamp_outside,
                         float* out);

  /// Clamped trilinear samples of two grids with the same dims (`second`
  /// holds the values of the second grid) at the same points.
  void (*trilinear_pair)(const FloatGrid& first, const float* second, const Line& line, float* out_first,
                         float* out_second);

  /// Nearest-voxel labels along a line (ties to the lower index), 0 outside.
  void (*nearest_line)(const LabelGrid& grid, const Line& line, std::uint16_t* out);

  /// 1D correlation along the contiguous axis of a rows x width image.
  /// `kernel` has 2 * radius + 1 taps.
  void (*convolve_rows)(const float* in, float* out, int rows, int width, const float* kernel, int radius,
                        Edge edge);

  /// 1D correlation along the strided (row) axis.
  void (*convolve_cols)(const float* in, float* out, int rows, int width, const float* kernel, int radius,
                        Edge edge);

  /// energy[0][c] = e0; energy[r][c] = energy[r-1][c] * transmission[r-1][c].
  void (*energy_scan)(const float* transmission, float e0, int rows, int width, float* energy);

  /// out = clamp(gain * (magnitude * psf_boundary + energy * psf_scatter), 0, 1).
  void (*combine)(const float* magnitude, const float* psf_boundary, const float* energy,
                  const float* psf_scatter, float gain, int n, float* out);

  /// Cosine between the Sobel gradient of `field` (scaled by sx, sy per axis,
  /// edges clamped) and the row axis; 1 where the gradient vanishes.
  void (*incidence_cosine)(const float* field, int rows, int width, float sx, float sy, float* out);

  /// Per-pixel tissue maps of a rows x width sheet, with l = min(label, last):
  /// impedance = scale[l] * max(ct - ct_floor, epsilon) + z_offset,
  /// transmission = transmission_of[l], boundary = label differs from the row above (0 on row 0).
  void (*tissue_maps)(const float* ct, const std::uint16_t* labels, const TissueLuts& luts, int rows, int width,
                      float* impedance, float* transmission, float* boundary);

  /// out = |energy * cosine * (z - z_above) / (z + z_above)|, 0 on row 0.
  /// `out` may alias `cosine`.
  void (*reflection_magnitude)(const float* energy, const float* cosine, const float* impedance, int rows,
                               int width, float* out);

  /// Per-label gated scatter: out = n1 <= mu1[l] ? n0 * sigma0[l] + mu0[l] : 0,
  /// with l = min(label, last).
  void (*scatter_gate)(const float* n0, const float* n1, const std::uint16_t* labels, const float* sigma0,
                       const float* mu0, const float* mu1, int last, int n, float* out);
};

const KernelTable& scalar_kernels();

/// AVX2 variant, or nullptr when not compiled in or not supported by the CPU.
const KernelTable* avx2_kernels();

const KernelTable& active_kernels();

}  // namespace echosim::simd
