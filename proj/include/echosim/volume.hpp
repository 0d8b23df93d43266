#pragma once

#include "echosim/geometry.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace echosim {

using Label = std::uint16_t;

constexpr double kDefaultBackgroundCt = -1000.0;
constexpr Label kBackgroundLabel = 0;

/// Axis-aligned voxel lattice. `origin` is the world position of the center
/// of voxel (0, 0, 0); voxel (i, j, k) sits at origin + (i, j, k) * spacing.
struct GridGeometry {
  std::array<int, 3> dims{1, 1, 1};
  Vec3 spacing = Vec3::Ones();
  Vec3 origin = Vec3::Zero();

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
  }
  Vec3 to_voxel(const Vec3& world) const { return (world - origin).cwiseQuotient(spacing); }
  Vec3 to_world(const Vec3& voxel) const { return origin + voxel.cwiseProduct(spacing); }
  Vec3 voxel_center(int i, int j, int k) const { return to_world(Vec3(i, j, k)); }
  Vec3 extent_min() const { return origin - 0.5 * spacing; }
  Vec3 extent_max() const {
    return origin + (Vec3(dims[0], dims[1], dims[2]) - Vec3::Constant(0.5)).cwiseProduct(spacing);
  }

  /// Throws ConfigError unless dims >= 1 and spacing > 0.
  void validate() const;
};

enum class VolumeKind { ct, label };
enum class ElemType { f32, u8, u16 };

const char* to_string(VolumeKind kind);
const char* to_string(ElemType elem);

/// Scalar (CT) or label voxel grid. CT data lives in `scalars`, label data in
/// `labels`; the other vector stays empty. `elem` records the on-disk element
/// type so that save/load round-trips byte-exactly.
struct Volume {
  GridGeometry geometry;
  VolumeKind kind = VolumeKind::ct;
  ElemType elem = ElemType::f32;
  std::vector<float> scalars;
  std::vector<Label> labels;

  static Volume make_ct(const GridGeometry& g, float fill = 0.0f);
  static Volume make_labels(const GridGeometry& g, Label fill = kBackgroundLabel,
                            ElemType elem = ElemType::u8);

  bool is_label() const { return kind == VolumeKind::label; }
  float scalar_at(int i, int j, int k) const { return scalars[geometry.index(i, j, k)]; }
  Label label_at(int i, int j, int k) const { return labels[geometry.index(i, j, k)]; }

  /// Checks the Volume invariants; throws InvariantError on violation.
  void validate() const;
};

/// Trilinear interpolation of the 8 voxels around `world`. Points whose voxel
/// coordinate leaves [-0.5, n - 0.5] on any axis return `background`; inside
/// that band neighbour indices are clamped to the edge.
double sample_trilinear(const Volume& v, const Vec3& world,
                        double background = kDefaultBackgroundCt);

/// Nearest voxel label. Exact ties between two voxels resolve to the lower
/// index. Points outside the grid return the background label.
Label sample_label(const Volume& v, const Vec3& world);

/// Nearest-voxel index along one axis for continuous voxel coordinate u,
/// with the lower index winning ties: ceil(u - 0.5).
inline int nearest_index(double u) { return static_cast<int>(std::ceil(u - 0.5)); }

// ---------------------------------------------------------------------------
// .svol I/O

Volume load_volume(const std::filesystem::path& path);
void save_volume(const Volume& v, const std::filesystem::path& path);

/// Encodes a volume into the exact bytes save_volume would write.
std::vector<std::uint8_t> encode_svol(const Volume& v);
Volume decode_svol(const std::vector<std::uint8_t>& bytes);

/// FNV-1a 64 over the encoded payload (header excluded).
std::uint64_t payload_hash(const Volume& v);

// ---------------------------------------------------------------------------
// Landmarks sidecar: named poses, position in mm + quaternion wxyz.

using LandmarkSet = std::map<std::string, Pose>;

void save_landmarks(const LandmarkSet& landmarks, const std::filesystem::path& path);
LandmarkSet load_landmarks(const std::filesystem::path& path);

}  // namespace echosim
