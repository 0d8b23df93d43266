#include "echosim/slicing.hpp"

#include "echosim/errors.hpp"
#include "echosim/simd/kernels.hpp"

namespace echosim {

void SliceSpec::validate() const {
  if (height < 1 || width < 1 || elevation < 1) throw ConfigError("slice dimensions must be >= 1");
  if (!(res_lateral > 0) || !(res_axial > 0) || !(res_elevation > 0)) {
    throw ConfigError("slice resolutions must be > 0");
  }
}

namespace {

simd::Line line_through(const GridGeometry& g, const Vec3& world_start, const Vec3& world_step, int count) {
  const Vec3 start = g.to_voxel(world_start);
  const Vec3 step = world_step.cwiseQuotient(g.spacing);
  simd::Line line{};
  for (int a = 0; a < 3; ++a) {
    line.start[a] = static_cast<float>(start[a]);
    line.step[a] = static_cast<float>(step[a]);
  }
  line.count = count;
  return line;
}

}  // namespace

void extract_plane_slices_into(const Volume& ct, const Volume& labels, const Pose& probe, const SliceSpec& spec,
                               double background, PlaneSlices& out) {
  spec.validate();
  if (ct.kind != VolumeKind::ct || !labels.is_label()) throw ConfigError("slicing expects a ct and a label volume");
  const std::size_t n = spec.pixel_count();
  out.spec = spec;
  out.probe = probe;
  out.ct.resize(n);
  out.labels.resize(n);

  const auto& k = simd::active_kernels();
  const simd::FloatGrid ct_grid{ct.scalars.data(), ct.geometry.dims[0], ct.geometry.dims[1], ct.geometry.dims[2]};
  const simd::LabelGrid label_grid{labels.labels.data(), labels.geometry.dims[0], labels.geometry.dims[1],
                                   labels.geometry.dims[2]};
  const Mat3& R = probe.rotation();
  const Vec3 col_step = R.col(0) * spec.res_lateral;

  for (int e = 0; e < spec.elevation; ++e) {
    for (int r = 0; r < spec.height; ++r) {
      const std::size_t row = out.index(e, r, 0);
      const Vec3 start = probe.apply(spec.local_offset(e, r, 0));
      k.trilinear_line(ct_grid, line_through(ct.geometry, start, col_step, spec.width),
                       static_cast<float>(background), false, out.ct.data() + row);
      k.nearest_line(label_grid, line_through(labels.geometry, start, col_step, spec.width), out.labels.data() + row);
    }
  }
}

PlaneSlices extract_plane_slices(const Volume& ct, const Volume& labels, const Pose& probe, const SliceSpec& spec,
                                 double background) {
  PlaneSlices out;
  extract_plane_slices_into(ct, labels, probe, spec, background, out);
  return out;
}

}  // namespace echosim
