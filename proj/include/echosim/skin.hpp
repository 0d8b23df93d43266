#pragma once

#include "echosim/geometry.hpp"
#include "echosim/volume.hpp"

#include <cstdint>
#include <vector>

namespace echosim {

/// Dorsal skin as a heightfield over the x-y columns of a label volume.
///
/// Column (i, j) holds the world z of the center of its topmost body voxel and
/// the outward unit normal there. Continuous queries interpolate bilinearly
/// over a copy in which empty columns were filled from their nearest valid
/// neighbour; the domain is the rectangle spanned by valid column centers.
class SkinSurface {
 public:
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double column_x(int i) const { return origin_x_ + i * spacing_x_; }
  double column_y(int j) const { return origin_y_ + j * spacing_y_; }

  bool valid(int i, int j) const { return valid_[idx(i, j)] != 0; }
  /// NaN for empty columns.
  double height_at(int i, int j) const { return height_[idx(i, j)]; }
  const Vec3& normal_at(int i, int j) const { return normal_[idx(i, j)]; }

  bool in_domain(double x, double y) const;
  /// Nearest point of the domain rectangle.
  Eigen::Vector2d clamp_to_domain(double x, double y) const;
  double domain_min_x() const { return dom_min_x_; }
  double domain_max_x() const { return dom_max_x_; }
  double domain_min_y() const { return dom_min_y_; }
  double domain_max_y() const { return dom_max_y_; }

  double height(double x, double y) const;
  Vec3 normal(double x, double y) const;

  /// Probe contact frame at (x, y): origin on the heightfield, +z along the
  /// inward normal, +x along the world x axis projected onto the tangent
  /// plane, then rotated by `yaw` about +z.
  Pose contact_frame(double x, double y, double yaw) const;

  friend SkinSurface extract_skin_surface(const Volume& labels, const std::vector<Label>& body_labels,
                                          double sigma_voxels);

 private:
  std::size_t idx(int i, int j) const { return static_cast<std::size_t>(j) * nx_ + i; }
  void bilinear_cell(double x, double y, int& i0, int& j0, double& tx, double& ty) const;

  int nx_ = 0, ny_ = 0;
  double origin_x_ = 0, origin_y_ = 0, spacing_x_ = 1, spacing_y_ = 1;
  std::vector<double> height_;
  std::vector<Vec3> normal_;
  std::vector<std::uint8_t> valid_;
  std::vector<double> filled_height_;
  std::vector<Vec3> filled_normal_;
  double dom_min_x_ = 0, dom_max_x_ = 0, dom_min_y_ = 0, dom_max_y_ = 0;
};

/// Builds the heightfield from `labels`. Voxels whose label is in
/// `body_labels` (any non-zero label when empty) form the body. Normals are
/// the normalized negative gradient of the body occupancy smoothed by a
/// Gaussian of `sigma_voxels`, flipped into the +z hemisphere.
/// Throws DataError when no voxel belongs to the body.
SkinSurface extract_skin_surface(const Volume& labels, const std::vector<Label>& body_labels = {},
                                 double sigma_voxels = 2.0);

}  // namespace echosim
