#pragma once

#include "echosim/geometry.hpp"
#include "echosim/volume.hpp"

#include <vector>

namespace echosim {

/// Image plane layout: `height` rows along probe +z (depth), `width` columns
/// along probe +x, `elevation` sheets along probe +y.
struct SliceSpec {
  int height = 200;
  int width = 150;
  int elevation = 1;
  double res_lateral = 0.5;    // mm per column
  double res_axial = 0.5;      // mm per row
  double res_elevation = 1.0;  // mm per sheet

  void validate() const;
  std::size_t pixels_per_sheet() const { return static_cast<std::size_t>(height) * width; }
  std::size_t pixel_count() const { return pixels_per_sheet() * elevation; }

  /// Probe-frame offset of pixel (sheet e, row r, column c).
  Vec3 local_offset(int e, int r, int c) const {
    return {(c - (width - 1) / 2.0) * res_lateral, (e - (elevation - 1) / 2.0) * res_elevation, r * res_axial};
  }
};

/// CT and label samples on the probe's image plane(s). All grids are stored
/// sheet-major then row-major: index = (e * height + r) * width + c.
struct PlaneSlices {
  SliceSpec spec;
  Pose probe;
  std::vector<float> ct;
  std::vector<Label> labels;

  std::size_t index(int e, int r, int c) const {
    return (static_cast<std::size_t>(e) * spec.height + r) * spec.width + c;
  }
  /// World position of pixel (e, r, c).
  Vec3 position(int e, int r, int c) const { return probe.position() + probe.rotation() * spec.local_offset(e, r, c); }
};

/// Samples `ct` trilinearly and `labels` by nearest voxel at every pixel.
/// Pixel (e, r, c) lies at probe.position + probe.rotation * spec.local_offset(e, r, c);
/// row 0 sits on the probe face.
PlaneSlices extract_plane_slices(const Volume& ct, const Volume& labels, const Pose& probe, const SliceSpec& spec,
                                 double background = kDefaultBackgroundCt);

/// Same as above, writing into preallocated storage to avoid reallocation in
/// batched rendering.
void extract_plane_slices_into(const Volume& ct, const Volume& labels, const Pose& probe, const SliceSpec& spec,
                               double background, PlaneSlices& out);

}  // namespace echosim
