#pragma once

// Physics-based ultrasound image formation from CT/label plane slices.
//
// Per image column the beam travels along +row (depth). The image is the sum
// of a boundary reflection term and a gated, world-anchored scattering term:
//
//   I = clip(gain * (R + B), 0, 1)
//   R = |E cos(theta) (Z_y - Z_{y-1}) / (Z_y + Z_{y-1})| * (P conv G)
//   B = E * (P conv T),   T = N0 sigma0 + mu0 if N1 <= mu1 else 0
//   E(y) = E0 exp(-f sum_{v<y} alpha(v) dy)
//
// G marks rows whose label differs from the row above, so the impedance jump
// in R is taken across the same pair of rows. P is a separable Gaussian PSF.

#include "echosim/geometry.hpp"
#include "echosim/slicing.hpp"
#include "echosim/volume.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

namespace echosim {

struct TissueAcoustics {
  double impedance_scale = 1.0;
  double attenuation = 0.0;  // per mm per MHz, used directly as nepers
  double sigma0 = 0.0;
  double mu0 = 0.0;
  double mu1 = 0.0;  // gate threshold in [0, 1]
};

/// Per-label acoustic parameters plus the CT -> impedance map
/// Z = impedance_scale * max(ct - ct_floor, epsilon) + z_offset.
///
/// JSON schema:
///   { "ct_floor": -1100, "epsilon": 1, "z_offset": 0,
///     "fallback": {<entry>},
///     "labels": { "<label id>": {"impedance_scale": .., "attenuation": ..,
///                                "sigma0": .., "mu0": .., "mu1": ..}, ... } }
struct AcousticTable {
  double ct_floor = -1100.0;
  double epsilon = 1.0;
  double z_offset = 0.0;
  std::map<Label, TissueAcoustics> entries;
  TissueAcoustics fallback;  // generic soft tissue

  /// Defaults tuned for the procedural phantoms' tissue labels.
  static AcousticTable defaults();
  static AcousticTable from_json(const nlohmann::json& j);
  static AcousticTable load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  const TissueAcoustics& at(Label l) const;
  bool has(Label l) const { return entries.count(l) != 0; }
  /// Throws ConfigError on alpha < 0, sigma0 < 0, mu1 outside [0, 1],
  /// epsilon <= 0.
  void validate() const;
  /// Labels present in `labels` that fall back to the generic entry; each is
  /// reported once on std::clog.
  std::vector<Label> report_missing(const Volume& labels) const;
};

struct UsParams {
  double frequency_mhz = 5.0;
  double initial_energy = 1.0;
  double psf_sigma_lateral = 0.01;  // fraction of image width
  double psf_sigma_axial = 0.01;    // fraction of image height
  double psf_truncate = 3.0;
  double transition_sigma_px = 1.0;
  double gain = 25.0;
  double gamma = 1.0;
  std::vector<double> octave_scales{1.0, 4.0, 16.0};
  std::vector<double> octave_weights{0.6, 0.3, 0.1};
  double noise_spacing_mm = 0.0;  // base noise cell; 0 = volume spacing

  void validate() const;
  static UsParams from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Multi-scale speckle noise anchored to the patient frame. Octave o is a
/// grid of spacing base * octave_scales[o] covering the volume; N0 holds
/// standard normals per octave, N1 uniforms on the base octave only. Values
/// are a pure function of (seed, octave, grid index) and never change after
/// construction.
class NoiseFields {
 public:
  struct Octave {
    GridGeometry geometry;
    std::vector<float> n0;
    double weight = 0.0;
  };

  NoiseFields(const GridGeometry& volume, std::uint64_t seed, const UsParams& params);

  std::uint64_t seed() const { return seed_; }
  const std::vector<Octave>& octaves() const { return octaves_; }
  const GridGeometry& n1_geometry() const { return octaves_.front().geometry; }
  const std::vector<float>& n1() const { return n1_; }

  /// Scalar reference samplers (trilinear, clamped to the grid).
  double sample_n0(const Vec3& world) const;
  double sample_n1(const Vec3& world) const;

  static float n0_value(std::uint64_t seed, std::size_t octave, std::size_t index);
  static float n1_value(std::uint64_t seed, std::size_t index);

 private:
  std::uint64_t seed_;
  std::vector<Octave> octaves_;
  std::vector<float> n1_;
};

/// Row-major single-sheet float image.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, float fill = 0.0f) : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}
  float& at(int r, int c) { return data[static_cast<std::size_t>(r) * width + c]; }
  float at(int r, int c) const { return data[static_cast<std::size_t>(r) * width + c]; }
};

// Stages of the model on one sheet. `ct` and `labels` are row-major
// height x width.

Image impedance_map(std::span<const float> ct, std::span<const Label> labels, int height, int width,
                    const AcousticTable& table);

Image remaining_energy(std::span<const Label> labels, int height, int width, const AcousticTable& table,
                       const UsParams& params, double axial_res_mm);

struct BoundaryMaps {
  Image boundary;   // G in {0, 1}
  Image incidence;  // theta in [0, pi/2]
};
BoundaryMaps boundary_and_incidence(std::span<const Label> labels, int height, int width, const UsParams& params,
                                    double lateral_res_mm, double axial_res_mm);

/// Separable Gaussian PSF taps for an image of the given size.
struct PsfKernels {
  std::vector<float> lateral;
  std::vector<float> axial;
};
PsfKernels psf_kernels(int height, int width, const UsParams& params);

/// PSF convolution with zero padding.
Image convolve_psf(const Image& in, const PsfKernels& psf);

Image reflection_term(const Image& impedance, const Image& energy, const BoundaryMaps& boundary,
                      const PsfKernels& psf);

/// Scattering pattern T sampled at the pixel positions of `slices`, sheet e.
Image scatter_pattern(const PlaneSlices& slices, int sheet, const NoiseFields& noise, const AcousticTable& table,
                      const UsParams& params);

Image scatter_term(const Image& pattern, const Image& energy, const PsfKernels& psf);

/// Simulated frame: E sheets of height x width intensities in [0, 1], plus
/// the slices it was formed from.
struct UsFrame {
  SliceSpec spec;
  std::vector<float> image;
  PlaneSlices slices;
};

/// Reusable scratch buffers for the fast path.
struct UsWorkspace {
  std::vector<float> impedance, transmission, energy, field, field_tmp, magnitude, boundary, psf_boundary,
      pattern, psf_scatter, n0_tmp, scratch, transmission_of;
};

/// Precomputed per-label lookups for the fast path. Holds references to the
/// noise fields, which must outlive it.
class UsSimulator {
 public:
  UsSimulator(const AcousticTable& table, const NoiseFields& noise, const UsParams& params);

  const UsParams& params() const { return params_; }
  const NoiseFields& noise() const { return *noise_; }

  /// Writes E * height * width intensities into `image`.
  void simulate(const PlaneSlices& slices, std::span<float> image, UsWorkspace& ws) const;
  UsFrame simulate(const PlaneSlices& slices) const;

 private:
  void simulate_sheet(const PlaneSlices& slices, int sheet, float* out, UsWorkspace& ws) const;

  UsParams params_;
  const NoiseFields* noise_;
  std::vector<float> scale_, attenuation_, sigma0_, mu0_, mu1_;
  float ct_floor_, epsilon_, z_offset_;
};

UsFrame simulate_us(const PlaneSlices& slices, const AcousticTable& table, const NoiseFields& noise,
                    const UsParams& params);

/// Independent frames on up to `threads` workers; out[i] <- slices[i].
void simulate_us_batch(std::span<const PlaneSlices> slices, const UsSimulator& sim, std::span<UsFrame> out,
                       unsigned threads);

}  // namespace echosim
