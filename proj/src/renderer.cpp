#include "echosim/acoustics.hpp"

#include "echosim/errors.hpp"
#include "echosim/parallel.hpp"
#include "echosim/simd/kernels.hpp"
#include "us_internal.hpp"

#include <algorithm>
#include <cmath>

namespace echosim {

namespace {

simd::Line noise_line(const GridGeometry& g, const Vec3& start, const Vec3& step, int count) {
  const Vec3 s = g.to_voxel(start);
  const Vec3 d = step.cwiseQuotient(g.spacing);
  simd::Line line{};
  for (int a = 0; a < 3; ++a) {
    line.start[a] = static_cast<float>(s[a]);
    line.step[a] = static_cast<float>(d[a]);
  }
  line.count = count;
  return line;
}

simd::FloatGrid grid_view(const GridGeometry& g, const std::vector<float>& data) {
  return {data.data(), g.dims[0], g.dims[1], g.dims[2]};
}

}  // namespace

UsSimulator::UsSimulator(const AcousticTable& table, const NoiseFields& noise, const UsParams& params)
    : params_(params), noise_(&noise) {
  table.validate();
  params.validate();
  std::size_t n = 1;
  for (const auto& [id, entry] : table.entries) n = std::max<std::size_t>(n, static_cast<std::size_t>(id) + 1);
  // Slot n holds the fallback for ids beyond the table.
  for (std::size_t id = 0; id <= n; ++id) {
    const TissueAcoustics& a = id < n ? table.at(static_cast<Label>(id)) : table.fallback;
    scale_.push_back(static_cast<float>(a.impedance_scale));
    attenuation_.push_back(static_cast<float>(a.attenuation));
    sigma0_.push_back(static_cast<float>(a.sigma0));
    mu0_.push_back(static_cast<float>(a.mu0));
    mu1_.push_back(static_cast<float>(a.mu1));
  }
  ct_floor_ = static_cast<float>(table.ct_floor);
  epsilon_ = static_cast<float>(table.epsilon);
  z_offset_ = static_cast<float>(table.z_offset);
}

void UsSimulator::simulate_sheet(const PlaneSlices& slices, int sheet, float* out, UsWorkspace& ws) const {
  const SliceSpec& s = slices.spec;
  const int h = s.height, w = s.width;
  const std::size_t n = s.pixels_per_sheet();
  const std::size_t offset = static_cast<std::size_t>(sheet) * n;
  const Label* labels = slices.labels.data() + offset;
  const float* ct = slices.ct.data() + offset;
  const auto& k = simd::active_kernels();
  const std::size_t last = scale_.size() - 1;

  for (auto* buf : {&ws.impedance, &ws.transmission, &ws.energy, &ws.field, &ws.field_tmp, &ws.magnitude,
                    &ws.boundary, &ws.psf_boundary, &ws.pattern, &ws.psf_scatter, &ws.scratch}) {
    buf->resize(n);
  }
  ws.n0_tmp.resize(static_cast<std::size_t>(w));

  std::vector<float>& transmission_of = ws.transmission_of;
  transmission_of.resize(scale_.size());
  for (std::size_t i = 0; i < transmission_of.size(); ++i) {
    transmission_of[i] = static_cast<float>(std::exp(-params_.frequency_mhz * attenuation_[i] * s.res_axial));
  }

  float* z = ws.impedance.data();
  float* g = ws.boundary.data();
  const simd::TissueLuts luts{scale_.data(), transmission_of.data(), static_cast<int>(last), ct_floor_, epsilon_,
                              z_offset_};
  k.tissue_maps(ct, labels, luts, h, w, z, ws.transmission.data(), g);
  k.energy_scan(ws.transmission.data(), static_cast<float>(params_.initial_energy), h, w, ws.energy.data());

  detail::transition_field(labels, h, w, params_.transition_sigma_px, ws.field.data(), ws.field_tmp.data());
  float* mag = ws.magnitude.data();
  detail::incidence_cosine(ws.field.data(), h, w, s.res_lateral, s.res_axial, mag);
  const float* e = ws.energy.data();
  k.reflection_magnitude(e, mag, z, h, w, mag);

  const PsfKernels psf = psf_kernels(h, w, params_);
  detail::apply_psf(g, ws.psf_boundary.data(), ws.scratch.data(), h, w, psf);

  // Scattering pattern, sampled along each image row in the noise grids.
  const Mat3& R = slices.probe.rotation();
  const Vec3 step = R.col(0) * s.res_lateral;
  // The gate field shares the base octave's grid.
  const auto& octaves = noise_->octaves();
  const simd::FloatGrid base = grid_view(octaves.front().geometry, octaves.front().n0);
  for (int r = 0; r < h; ++r) {
    const Vec3 start = slices.probe.apply(s.local_offset(sheet, r, 0));
    float* n0 = ws.pattern.data() + static_cast<std::size_t>(r) * w;
    float* n1 = ws.field_tmp.data() + static_cast<std::size_t>(r) * w;
    float* tmp = ws.n0_tmp.data();
    std::fill(n0, n0 + w, 0.0f);
    for (std::size_t o = 0; o < octaves.size(); ++o) {
      const simd::Line line = noise_line(octaves[o].geometry, start, step, w);
      if (o == 0) {
        k.trilinear_pair(base, noise_->n1().data(), line, tmp, n1);
      } else {
        k.trilinear_line(grid_view(octaves[o].geometry, octaves[o].n0), line, 0.0f, true, tmp);
      }
      const float wt = static_cast<float>(octaves[o].weight);
      for (int c = 0; c < w; ++c) n0[c] += wt * tmp[c];
    }
  }
  k.scatter_gate(ws.pattern.data(), ws.field_tmp.data(), labels, sigma0_.data(), mu0_.data(), mu1_.data(),
                 static_cast<int>(last), static_cast<int>(n), ws.pattern.data());
  detail::apply_psf(ws.pattern.data(), ws.psf_scatter.data(), ws.scratch.data(), h, w, psf);

  k.combine(mag, ws.psf_boundary.data(), e, ws.psf_scatter.data(), static_cast<float>(params_.gain),
            static_cast<int>(n), out);
  if (params_.gamma != 1.0) {
    const float gm = static_cast<float>(params_.gamma);
    for (std::size_t i = 0; i < n; ++i) out[i] = std::pow(out[i], gm);
  }
}

void UsSimulator::simulate(const PlaneSlices& slices, std::span<float> image, UsWorkspace& ws) const {
  const SliceSpec& s = slices.spec;
  s.validate();
  if (slices.ct.size() != s.pixel_count() || slices.labels.size() != s.pixel_count()) {
    throw ConfigError("plane slices do not match their spec");
  }
  if (image.size() != s.pixel_count()) throw ConfigError("output image buffer has the wrong size");
  for (int e = 0; e < s.elevation; ++e) simulate_sheet(slices, e, image.data() + e * s.pixels_per_sheet(), ws);
}

UsFrame UsSimulator::simulate(const PlaneSlices& slices) const {
  UsFrame f;
  f.spec = slices.spec;
  f.slices = slices;
  f.image.resize(slices.spec.pixel_count());
  UsWorkspace ws;
  simulate(slices, f.image, ws);
  return f;
}

UsFrame simulate_us(const PlaneSlices& slices, const AcousticTable& table, const NoiseFields& noise,
                    const UsParams& params) {
  return UsSimulator(table, noise, params).simulate(slices);
}

void simulate_us_batch(std::span<const PlaneSlices> slices, const UsSimulator& sim, std::span<UsFrame> out,
                       unsigned threads) {
  if (slices.size() != out.size()) throw ConfigError("batch input and output sizes differ");
  parallel_for(slices.size(), threads, [&](std::size_t i) {
    thread_local UsWorkspace ws;
    UsFrame& f = out[i];
    f.spec = slices[i].spec;
    f.slices = slices[i];
    f.image.resize(slices[i].spec.pixel_count());
    sim.simulate(slices[i], f.image, ws);
  });
}

}  // namespace echosim
