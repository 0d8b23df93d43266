#include "echosim/skin.hpp"

#include "echosim/errors.hpp"
#include "echosim/filters.hpp"
#include "echosim/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace echosim {

namespace {

// Separable Gaussian smoothing of a dense x-fastest float volume, in place.
void smooth_volume(std::vector<float>& data, const std::array<int, 3>& dims, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  const int radius = kernel_radius(kernel);
  if (radius == 0) return;
  const auto& k = simd::active_kernels();
  const int nx = dims[0], ny = dims[1], nz = dims[2];
  std::vector<float> tmp(data.size());
  k.convolve_rows(data.data(), tmp.data(), ny * nz, nx, kernel.data(), radius, simd::Edge::clamp);
  for (int z = 0; z < nz; ++z) {
    const std::size_t off = static_cast<std::size_t>(z) * nx * ny;
    k.convolve_cols(tmp.data() + off, data.data() + off, ny, nx, kernel.data(), radius, simd::Edge::clamp);
  }
  k.convolve_cols(data.data(), tmp.data(), nz, nx * ny, kernel.data(), radius, simd::Edge::clamp);
  data.swap(tmp);
}

}  // namespace

SkinSurface extract_skin_surface(const Volume& labels, const std::vector<Label>& body_labels, double sigma_voxels) {
  if (!labels.is_label()) throw ConfigError("skin extraction needs a label volume");
  labels.validate();
  const GridGeometry& g = labels.geometry;
  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];

  auto is_body = [&](Label l) {
    if (body_labels.empty()) return l != kBackgroundLabel;
    return std::find(body_labels.begin(), body_labels.end(), l) != body_labels.end();
  };

  std::vector<float> occupancy(g.voxel_count());
  for (std::size_t i = 0; i < occupancy.size(); ++i) occupancy[i] = is_body(labels.labels[i]) ? 1.0f : 0.0f;

  SkinSurface s;
  s.nx_ = nx;
  s.ny_ = ny;
  s.origin_x_ = g.origin.x();
  s.origin_y_ = g.origin.y();
  s.spacing_x_ = g.spacing.x();
  s.spacing_y_ = g.spacing.y();
  s.height_.assign(static_cast<std::size_t>(nx) * ny, std::numeric_limits<double>::quiet_NaN());
  s.normal_.assign(static_cast<std::size_t>(nx) * ny, Vec3::UnitZ());
  s.valid_.assign(static_cast<std::size_t>(nx) * ny, 0);

  std::vector<int> top(static_cast<std::size_t>(nx) * ny, -1);
  bool any = false;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      for (int k = nz - 1; k >= 0; --k) {
        if (occupancy[g.index(i, j, k)] > 0.5f) {
          top[s.idx(i, j)] = k;
          any = true;
          break;
        }
      }
    }
  }
  if (!any) throw DataError("skin extraction: the volume contains no body voxels");

  smooth_volume(occupancy, g.dims, sigma_voxels);

  auto at = [&](int i, int j, int k) {
    return static_cast<double>(occupancy[g.index(std::clamp(i, 0, nx - 1), std::clamp(j, 0, ny - 1),
                                                 std::clamp(k, 0, nz - 1))]);
  };
  auto diff = [&](int i, int j, int k, int axis) {
    int lo[3] = {i, j, k}, hi[3] = {i, j, k};
    lo[axis] = std::max(lo[axis] - 1, 0);
    hi[axis] = std::min(hi[axis] + 1, g.dims[axis] - 1);
    const int span = hi[axis] - lo[axis];
    if (span == 0) return 0.0;
    return (at(hi[0], hi[1], hi[2]) - at(lo[0], lo[1], lo[2])) / (span * g.spacing[axis]);
  };

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int k = top[s.idx(i, j)];
      if (k < 0) continue;
      s.valid_[s.idx(i, j)] = 1;
      s.height_[s.idx(i, j)] = g.origin.z() + k * g.spacing.z();
      Vec3 n = -Vec3(diff(i, j, k, 0), diff(i, j, k, 1), diff(i, j, k, 2));
      if (n.norm() < 1e-12) {
        n = Vec3::UnitZ();
      } else {
        n.normalize();
        if (n.z() < 0.0) n = -n;
      }
      s.normal_[s.idx(i, j)] = n;
      xmin = std::min(xmin, s.column_x(i));
      xmax = std::max(xmax, s.column_x(i));
      ymin = std::min(ymin, s.column_y(j));
      ymax = std::max(ymax, s.column_y(j));
    }
  }
  s.dom_min_x_ = xmin;
  s.dom_max_x_ = xmax;
  s.dom_min_y_ = ymin;
  s.dom_max_y_ = ymax;

  // Nearest-valid fill (breadth-first over 4-neighbours) for interpolation.
  s.filled_height_ = s.height_;
  s.filled_normal_ = s.normal_;
  std::vector<std::uint8_t> done = s.valid_;
  std::deque<std::pair<int, int>> queue;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (done[s.idx(i, j)]) queue.emplace_back(i, j);
    }
  }
  while (!queue.empty()) {
    const auto [i, j] = queue.front();
    queue.pop_front();
    const int nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
    for (const auto& p : nb) {
      if (p[0] < 0 || p[0] >= nx || p[1] < 0 || p[1] >= ny || done[s.idx(p[0], p[1])]) continue;
      done[s.idx(p[0], p[1])] = 1;
      s.filled_height_[s.idx(p[0], p[1])] = s.filled_height_[s.idx(i, j)];
      s.filled_normal_[s.idx(p[0], p[1])] = s.filled_normal_[s.idx(i, j)];
      queue.emplace_back(p[0], p[1]);
    }
  }
  return s;
}

bool SkinSurface::in_domain(double x, double y) const {
  return x >= dom_min_x_ && x <= dom_max_x_ && y >= dom_min_y_ && y <= dom_max_y_;
}

Eigen::Vector2d SkinSurface::clamp_to_domain(double x, double y) const {
  return {std::clamp(x, dom_min_x_, dom_max_x_), std::clamp(y, dom_min_y_, dom_max_y_)};
}

void SkinSurface::bilinear_cell(double x, double y, int& i0, int& j0, double& tx, double& ty) const {
  const Eigen::Vector2d c = clamp_to_domain(x, y);
  auto cell = [](double u, int n, int& i, double& t) {
    if (n == 1) {
      i = 0;
      t = 0.0;
      return;
    }
    i = std::clamp(static_cast<int>(std::floor(u)), 0, n - 2);
    t = std::clamp(u - i, 0.0, 1.0);
  };
  cell((c.x() - origin_x_) / spacing_x_, nx_, i0, tx);
  cell((c.y() - origin_y_) / spacing_y_, ny_, j0, ty);
}

double SkinSurface::height(double x, double y) const {
  int i0, j0;
  double tx, ty;
  bilinear_cell(x, y, i0, j0, tx, ty);
  const int i1 = std::min(i0 + 1, nx_ - 1), j1 = std::min(j0 + 1, ny_ - 1);
  const double h00 = filled_height_[idx(i0, j0)], h10 = filled_height_[idx(i1, j0)];
  const double h01 = filled_height_[idx(i0, j1)], h11 = filled_height_[idx(i1, j1)];
  return (1 - ty) * ((1 - tx) * h00 + tx * h10) + ty * ((1 - tx) * h01 + tx * h11);
}

Vec3 SkinSurface::normal(double x, double y) const {
  int i0, j0;
  double tx, ty;
  bilinear_cell(x, y, i0, j0, tx, ty);
  const int i1 = std::min(i0 + 1, nx_ - 1), j1 = std::min(j0 + 1, ny_ - 1);
  const Vec3 n = (1 - ty) * ((1 - tx) * filled_normal_[idx(i0, j0)] + tx * filled_normal_[idx(i1, j0)]) +
                 ty * ((1 - tx) * filled_normal_[idx(i0, j1)] + tx * filled_normal_[idx(i1, j1)]);
  const double len = n.norm();
  return len > 1e-12 ? Vec3(n / len) : Vec3::UnitZ();
}

Pose SkinSurface::contact_frame(double x, double y, double yaw) const {
  const Vec3 z = -normal(x, y);
  Vec3 ax = Vec3::UnitX() - Vec3::UnitX().dot(z) * z;
  if (ax.norm() < 1e-6) ax = Vec3::UnitY() - Vec3::UnitY().dot(z) * z;
  ax.normalize();
  const Vec3 ay = z.cross(ax);
  Mat3 R;
  R.col(0) = ax;
  R.col(1) = ay;
  R.col(2) = z;
  return {Vec3(x, y, height(x, y)), R * rot_z(yaw)};
}

}  // namespace echosim
