#pragma once

#include "echosim/geometry.hpp"
#include "echosim/volume.hpp"

#include <cstdint>
#include <string>

namespace echosim {

namespace tissue {
constexpr Label background = 0;
constexpr Label skin = 1;
constexpr Label fat = 2;
constexpr Label muscle = 3;
constexpr Label bone = 4;
}  // namespace tissue

enum class PhantomKind { slab, torso };

/// Throws ConfigError for anything other than "slab" or "torso".
PhantomKind parse_phantom_kind(const std::string& name);
const char* to_string(PhantomKind kind);

// Procedural phantom geometry, all lengths in mm.
//
// slab:  flat body (skin over muscle) whose topmost voxel centers lie at
//        z = top_z.
// torso: ellipsoidal body centered at the origin with skin, fat and muscle
//        layers, and a vertebra-like bone: a cylindrical body along the
//        vertebra's local y axis, a lamina plate above it and a posterior
//        process reaching toward the skin. The vertebra frame {V} sits at
//        the cylinder center; its xy offset and yaw are drawn from the seed.
struct SlabSpec {
  double top_z = 100.0;
  double skin_thickness = 3.0;
  double half_extent = 48.0;
  double spacing = 1.0;
};

struct TorsoSpec {
  Vec3 body_semi_axes{150.0, 260.0, 90.0};
  double skin_thickness = 2.0;
  double fat_thickness = 10.0;

  double vertebra_depth_z = 30.0;  // world z of the vertebra center
  double vertebra_offset_range = 5.0;
  double vertebra_yaw_range = 0.1;
  double body_radius = 18.0;
  double body_length = 26.0;  // along the spine (local y)
  double lamina_half_width = 30.0;
  double lamina_half_length = 10.0;
  double lamina_thickness = 10.0;
  double process_half_width = 4.0;
  double process_half_length = 10.0;
  double process_height = 12.0;

  // Planned drill path: entry on the skin at local x = entry_offset_x, tilted
  // medially by entry_tilt radians, target `trajectory_length` mm deep.
  double entry_offset_x = 18.0;
  double entry_tilt = 0.17453292519943295;  // 10 degrees
  double trajectory_length = 50.0;

  Vec3 extent_min{-110.0, -110.0, -40.0};
  Vec3 extent_max{110.0, 110.0, 100.0};
  double spacing = 1.0;

  /// Exact solid volume of the vertebra in mm^3 (the three parts are disjoint).
  double vertebra_volume() const;
  /// True when `local` (vertebra frame) lies inside the bone.
  bool inside_vertebra(const Vec3& local) const;
  /// World z of the analytic body surface above (x, y), NaN outside.
  double surface_z(double x, double y) const;
};

/// CT intensity ranges (HU-like) each tissue's base value is drawn from; a
/// per-voxel Gaussian texture of `texture_sigma` is added on top.
struct TissueIntensityRanges {
  double skin[2] = {20.0, 60.0};
  double fat[2] = {-120.0, -80.0};
  double muscle[2] = {35.0, 65.0};
  double bone[2] = {400.0, 700.0};
  double air = -1000.0;
  double texture_sigma = 8.0;
};

struct Phantom {
  Volume ct;
  Volume labels;
  /// torso: "vertebra" {V}, "goal" {G} (drill target, +z along the drill
  /// path into the bone), "skin_entry" (p_l with the goal's orientation).
  /// slab: "surface_center".
  LandmarkSet landmarks;
  std::string id;
};

/// Deterministic in (kind, seed).
Phantom generate_phantom(PhantomKind kind, std::uint64_t seed);
Phantom generate_slab(const SlabSpec& spec, std::uint64_t seed);
Phantom generate_torso(const TorsoSpec& spec, std::uint64_t seed);

}  // namespace echosim
