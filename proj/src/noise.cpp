#include "echosim/acoustics.hpp"

#include "echosim/errors.hpp"
#include "echosim/rng.hpp"

#include <algorithm>
#include <cmath>

namespace echosim {

namespace {

constexpr std::uint64_t kN0Stream = 0x100;
constexpr std::uint64_t kN1Stream = 0x200;

GridGeometry octave_grid(const GridGeometry& volume, const Vec3& cell) {
  const Vec3 lo = volume.extent_min();
  const Vec3 hi = volume.extent_max();
  GridGeometry g;
  g.spacing = cell;
  for (int a = 0; a < 3; ++a) g.dims[a] = static_cast<int>(std::ceil((hi[a] - lo[a]) / cell[a])) + 2;
  g.origin = lo - 0.5 * cell;
  return g;
}

// Trilinear sample with every coordinate clamped into the grid.
double sample_clamped(const GridGeometry& g, const std::vector<float>& data, const Vec3& world) {
  const Vec3 u = g.to_voxel(world);
  int i0[3];
  double t[3];
  for (int a = 0; a < 3; ++a) {
    const double c = std::clamp(u[a], 0.0, static_cast<double>(g.dims[a] - 1));
    i0[a] = std::min(static_cast<int>(std::floor(c)), std::max(g.dims[a] - 2, 0));
    t[a] = g.dims[a] == 1 ? 0.0 : c - i0[a];
  }
  auto v = [&](int dx, int dy, int dz) {
    return static_cast<double>(data[g.index(std::min(i0[0] + dx, g.dims[0] - 1), std::min(i0[1] + dy, g.dims[1] - 1),
                                            std::min(i0[2] + dz, g.dims[2] - 1))]);
  };
  const double c00 = v(0, 0, 0) + t[0] * (v(1, 0, 0) - v(0, 0, 0));
  const double c10 = v(0, 1, 0) + t[0] * (v(1, 1, 0) - v(0, 1, 0));
  const double c01 = v(0, 0, 1) + t[0] * (v(1, 0, 1) - v(0, 0, 1));
  const double c11 = v(0, 1, 1) + t[0] * (v(1, 1, 1) - v(0, 1, 1));
  const double c0 = c00 + t[1] * (c10 - c00);
  const double c1 = c01 + t[1] * (c11 - c01);
  return c0 + t[2] * (c1 - c0);
}

}  // namespace

float NoiseFields::n0_value(std::uint64_t seed, std::size_t octave, std::size_t index) {
  return static_cast<float>(normal_at(seed, kN0Stream + octave, index));
}

float NoiseFields::n1_value(std::uint64_t seed, std::size_t index) {
  return static_cast<float>(uniform_at(seed, kN1Stream, index));
}

NoiseFields::NoiseFields(const GridGeometry& volume, std::uint64_t seed, const UsParams& params) : seed_(seed) {
  params.validate();
  volume.validate();
  const Vec3 base = params.noise_spacing_mm > 0.0 ? Vec3::Constant(params.noise_spacing_mm) : volume.spacing;
  for (std::size_t o = 0; o < params.octave_scales.size(); ++o) {
    Octave oct;
    oct.geometry = octave_grid(volume, base * params.octave_scales[o]);
    oct.weight = params.octave_weights[o];
    oct.n0.resize(oct.geometry.voxel_count());
    for (std::size_t i = 0; i < oct.n0.size(); ++i) oct.n0[i] = n0_value(seed, o, i);
    octaves_.push_back(std::move(oct));
  }
  n1_.resize(octaves_.front().geometry.voxel_count());
  for (std::size_t i = 0; i < n1_.size(); ++i) n1_[i] = n1_value(seed, i);
}

double NoiseFields::sample_n0(const Vec3& world) const {
  double sum = 0.0;
  for (const auto& o : octaves_) sum += o.weight * sample_clamped(o.geometry, o.n0, world);
  return sum;
}

double NoiseFields::sample_n1(const Vec3& world) const {
  return sample_clamped(octaves_.front().geometry, n1_, world);
}

}  // namespace echosim
