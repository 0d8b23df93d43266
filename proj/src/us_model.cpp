#include "echosim/acoustics.hpp"

#include "echosim/errors.hpp"
#include "echosim/filters.hpp"
#include "echosim/simd/kernels.hpp"
#include "us_internal.hpp"

#include <algorithm>
#include <cmath>

namespace echosim {

namespace detail {

void transition_field(const Label* labels, int height, int width, double sigma_px, float* field, float* tmp) {
  const std::size_t n = static_cast<std::size_t>(height) * width;
  for (std::size_t i = 0; i < n; ++i) field[i] = static_cast<float>(labels[i]);
  const auto kernel = gaussian_kernel(sigma_px);
  const int radius = kernel_radius(kernel);
  if (radius == 0) return;
  const auto& k = simd::active_kernels();
  k.convolve_rows(field, tmp, height, width, kernel.data(), radius, simd::Edge::clamp);
  k.convolve_cols(tmp, field, height, width, kernel.data(), radius, simd::Edge::clamp);
}

void incidence_cosine(const float* f, int height, int width, double lateral_res, double axial_res, float* out) {
  simd::active_kernels().incidence_cosine(f, height, width, static_cast<float>(1.0 / (8.0 * lateral_res)),
                                          static_cast<float>(1.0 / (8.0 * axial_res)), out);
}

void apply_psf(const float* in, float* out, float* tmp, int height, int width, const PsfKernels& psf) {
  const auto& k = simd::active_kernels();
  k.convolve_rows(in, tmp, height, width, psf.lateral.data(), kernel_radius(psf.lateral), simd::Edge::zero);
  k.convolve_cols(tmp, out, height, width, psf.axial.data(), kernel_radius(psf.axial), simd::Edge::zero);
}

}  // namespace detail

namespace {

void check_dims(std::size_t n, int height, int width) {
  if (height < 1 || width < 1 || n != static_cast<std::size_t>(height) * width) {
    throw ConfigError("image buffer does not match its height x width");
  }
}

void check_same(const Image& a, const Image& b) {
  if (a.height != b.height || a.width != b.width) throw ConfigError("image dimensions differ");
}

}  // namespace

Image impedance_map(std::span<const float> ct, std::span<const Label> labels, int height, int width,
                    const AcousticTable& table) {
  check_dims(ct.size(), height, width);
  check_dims(labels.size(), height, width);
  Image z(height, width);
  for (std::size_t i = 0; i < ct.size(); ++i) {
    const double v = table.at(labels[i]).impedance_scale * std::max(ct[i] - table.ct_floor, table.epsilon) +
                     table.z_offset;
    z.data[i] = static_cast<float>(v);
  }
  return z;
}

Image remaining_energy(std::span<const Label> labels, int height, int width, const AcousticTable& table,
                       const UsParams& params, double axial_res_mm) {
  check_dims(labels.size(), height, width);
  Image e(height, width);
  for (int c = 0; c < width; ++c) {
    double integral = 0.0;
    for (int r = 0; r < height; ++r) {
      e.at(r, c) = static_cast<float>(params.initial_energy * std::exp(-params.frequency_mhz * integral));
      integral += table.at(labels[static_cast<std::size_t>(r) * width + c]).attenuation * axial_res_mm;
    }
  }
  return e;
}

BoundaryMaps boundary_and_incidence(std::span<const Label> labels, int height, int width, const UsParams& params,
                                    double lateral_res_mm, double axial_res_mm) {
  check_dims(labels.size(), height, width);
  BoundaryMaps m{Image(height, width), Image(height, width)};
  for (int r = 1; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * width + c;
      m.boundary.data[i] = labels[i] != labels[i - width] ? 1.0f : 0.0f;
    }
  }
  std::vector<float> field(labels.size()), tmp(labels.size());
  detail::transition_field(labels.data(), height, width, params.transition_sigma_px, field.data(), tmp.data());
  detail::incidence_cosine(field.data(), height, width, lateral_res_mm, axial_res_mm, tmp.data());
  for (std::size_t i = 0; i < tmp.size(); ++i) m.incidence.data[i] = std::acos(tmp[i]);
  return m;
}

PsfKernels psf_kernels(int height, int width, const UsParams& params) {
  return {gaussian_kernel(params.psf_sigma_lateral * width, params.psf_truncate),
          gaussian_kernel(params.psf_sigma_axial * height, params.psf_truncate)};
}

Image convolve_psf(const Image& in, const PsfKernels& psf) {
  Image out(in.height, in.width);
  std::vector<float> tmp(in.data.size());
  detail::apply_psf(in.data.data(), out.data.data(), tmp.data(), in.height, in.width, psf);
  return out;
}

Image reflection_term(const Image& impedance, const Image& energy, const BoundaryMaps& boundary,
                      const PsfKernels& psf) {
  check_same(impedance, energy);
  check_same(impedance, boundary.boundary);
  check_same(impedance, boundary.incidence);
  const int h = impedance.height, w = impedance.width;
  const Image spread = convolve_psf(boundary.boundary, psf);
  Image r(h, w);
  for (int y = 1; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double za = impedance.at(y, x), zb = impedance.at(y - 1, x);
      const double mag =
          std::abs(energy.at(y, x) * std::cos(static_cast<double>(boundary.incidence.at(y, x))) * (za - zb) / (za + zb));
      r.at(y, x) = static_cast<float>(mag * spread.at(y, x));
    }
  }
  return r;
}

Image scatter_pattern(const PlaneSlices& slices, int sheet, const NoiseFields& noise, const AcousticTable& table,
                      const UsParams& params) {
  (void)params;
  const SliceSpec& s = slices.spec;
  if (sheet < 0 || sheet >= s.elevation) throw ConfigError("sheet index out of range");
  Image t(s.height, s.width);
  for (int r = 0; r < s.height; ++r) {
    for (int c = 0; c < s.width; ++c) {
      const std::size_t i = slices.index(sheet, r, c);
      const TissueAcoustics& a = table.at(slices.labels[i]);
      const Vec3 p = slices.position(sheet, r, c);
      if (noise.sample_n1(p) <= a.mu1) t.at(r, c) = static_cast<float>(noise.sample_n0(p) * a.sigma0 + a.mu0);
    }
  }
  return t;
}

Image scatter_term(const Image& pattern, const Image& energy, const PsfKernels& psf) {
  check_same(pattern, energy);
  Image b = convolve_psf(pattern, psf);
  for (std::size_t i = 0; i < b.data.size(); ++i) b.data[i] *= energy.data[i];
  return b;
}

}  // namespace echosim
