#include "echosim/volume.hpp"

#include "echosim/errors.hpp"

#include <algorithm>
#include <cmath>

namespace echosim {

void GridGeometry::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) throw ConfigError("volume dims must be >= 1 on every axis");
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
      throw ConfigError("volume spacing must be finite and > 0");
    }
    if (!std::isfinite(origin[a])) throw ConfigError("volume origin must be finite");
  }
}

const char* to_string(VolumeKind kind) { return kind == VolumeKind::ct ? "ct" : "label"; }

const char* to_string(ElemType elem) {
  switch (elem) {
    case ElemType::f32: return "f32";
    case ElemType::u8: return "u8";
    case ElemType::u16: return "u16";
  }
  return "?";
}

Volume Volume::make_ct(const GridGeometry& g, float fill) {
  g.validate();
  Volume v;
  v.geometry = g;
  v.kind = VolumeKind::ct;
  v.elem = ElemType::f32;
  v.scalars.assign(g.voxel_count(), fill);
  return v;
}

Volume Volume::make_labels(const GridGeometry& g, Label fill, ElemType elem) {
  g.validate();
  if (elem == ElemType::f32) throw UnsupportedElementError("label volumes must be u8 or u16");
  Volume v;
  v.geometry = g;
  v.kind = VolumeKind::label;
  v.elem = elem;
  v.labels.assign(g.voxel_count(), fill);
  return v;
}

void Volume::validate() const {
  geometry.validate();
  const std::size_t n = geometry.voxel_count();
  if (kind == VolumeKind::ct) {
    if (scalars.size() != n || !labels.empty()) throw InvariantError("ct volume data length mismatch");
  } else {
    if (labels.size() != n || !scalars.empty()) throw InvariantError("label volume data length mismatch");
    if (elem == ElemType::f32) throw InvariantError("label volume with f32 elements");
  }
}

double sample_trilinear(const Volume& v, const Vec3& world, double background) {
  const GridGeometry& g = v.geometry;
  const Vec3 u = g.to_voxel(world);
  int i0[3];
  double t[3];
  int i1[3];
  for (int a = 0; a < 3; ++a) {
    if (!(u[a] >= -0.5 && u[a] <= g.dims[a] - 0.5)) return background;
    const double c = std::clamp(u[a], 0.0, static_cast<double>(g.dims[a] - 1));
    const double fl = std::floor(c);
    i0[a] = static_cast<int>(fl);
    i1[a] = std::min(i0[a] + 1, g.dims[a] - 1);
    t[a] = c - fl;
  }
  auto at = [&](int i, int j, int k) -> double {
    const std::size_t idx = g.index(i, j, k);
    return v.kind == VolumeKind::ct ? v.scalars[idx] : static_cast<double>(v.labels[idx]);
  };
  const double c00 = at(i0[0], i0[1], i0[2]) * (1 - t[0]) + at(i1[0], i0[1], i0[2]) * t[0];
  const double c10 = at(i0[0], i1[1], i0[2]) * (1 - t[0]) + at(i1[0], i1[1], i0[2]) * t[0];
  const double c01 = at(i0[0], i0[1], i1[2]) * (1 - t[0]) + at(i1[0], i0[1], i1[2]) * t[0];
  const double c11 = at(i0[0], i1[1], i1[2]) * (1 - t[0]) + at(i1[0], i1[1], i1[2]) * t[0];
  const double c0 = c00 * (1 - t[1]) + c10 * t[1];
  const double c1 = c01 * (1 - t[1]) + c11 * t[1];
  return c0 * (1 - t[2]) + c1 * t[2];
}

Label sample_label(const Volume& v, const Vec3& world) {
  const GridGeometry& g = v.geometry;
  const Vec3 u = g.to_voxel(world);
  int idx[3];
  for (int a = 0; a < 3; ++a) {
    if (!std::isfinite(u[a])) return kBackgroundLabel;
    idx[a] = nearest_index(u[a]);
    if (idx[a] < 0 || idx[a] >= g.dims[a]) return kBackgroundLabel;
  }
  return v.labels[g.index(idx[0], idx[1], idx[2])];
}

}  // namespace echosim
