#pragma once

#include "echosim/acoustics.hpp"
#include "echosim/geometry.hpp"
#include "echosim/phantom.hpp"
#include "echosim/skin.hpp"
#include "echosim/slicing.hpp"
#include "echosim/volume.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace echosim {

/// Where a patient comes from: a procedural phantom, or a CT/label pair of
/// .svol files plus a landmarks JSON.
struct PatientSpec {
  PhantomKind phantom = PhantomKind::torso;
  std::uint64_t phantom_seed = 0;
  std::optional<std::uint64_t> noise_seed;  // derived from phantom_seed when unset
  std::string ct_path, labels_path, landmarks_path;
  AcousticTable table = AcousticTable::defaults();
  UsParams us;

  static PatientSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  std::uint64_t resolved_noise_seed() const;
};

/// Immutable per-patient data shared read-only by every env slot.
class Patient {
 public:
  explicit Patient(const PatientSpec& spec);

  /// Process-wide cache keyed by the PatientSpec canonical JSON.
  static std::shared_ptr<const Patient> shared(const PatientSpec& spec);

  const PatientSpec& spec() const { return spec_; }
  const std::string& id() const { return id_; }
  const Volume& ct() const { return ct_; }
  const Volume& labels() const { return labels_; }
  const SkinSurface& skin() const { return skin_; }
  const NoiseFields& noise() const { return *noise_; }
  const UsSimulator& simulator() const { return *sim_; }
  const LandmarkSet& landmarks() const { return landmarks_; }

  bool has_landmark(const std::string& name) const { return landmarks_.count(name) != 0; }
  /// Throws ConfigError when missing.
  const Pose& landmark(const std::string& name) const;

  /// Navigation target: probe contact frame on the skin above the vertebra
  /// (or the slab's surface center), yawed like the vertebra.
  const Pose& nav_goal() const { return nav_goal_; }

  /// Upper surface of the bone: centers of bone voxels whose +z neighbour is
  /// not bone. Empty for patients without bone.
  const std::vector<Vec3>& surface_points() const { return surface_points_; }
  /// Area represented by one surface point (x-y voxel face), mm^2.
  double surface_point_area() const { return surface_point_area_; }

  /// Slices the volumes at `probe` and runs the ultrasound model into `image`.
  void render(const Pose& probe, const SliceSpec& spec, PlaneSlices& slices, std::span<float> image,
              UsWorkspace& ws) const;

 private:
  PatientSpec spec_;
  std::string id_;
  Volume ct_, labels_;
  LandmarkSet landmarks_;
  SkinSurface skin_;
  std::unique_ptr<NoiseFields> noise_;
  std::unique_ptr<UsSimulator> sim_;
  Pose nav_goal_;
  std::vector<Vec3> surface_points_;
  double surface_point_area_ = 0.0;
};

struct BatchTiming {
  double wall_ms = 0.0;
  double slice_ms = 0.0;      // summed over workers
  double acoustics_ms = 0.0;  // summed over workers
};

/// Renders one frame per pose into `images` (poses.size() x spec.pixel_count())
/// on up to `threads` workers.
BatchTiming render_batch(const Patient& patient, std::span<const Pose> poses, const SliceSpec& spec,
                         std::span<float> images, unsigned threads);

/// `count` probe contact poses drawn on the skin within `half_extent` mm of
/// the navigation goal, with uniform yaw.
std::vector<Pose> random_skin_poses(const Patient& patient, int count, std::uint64_t seed,
                                    double half_extent = 40.0);

/// Yaw of a rotation about world +z, from its x axis.
double yaw_of(const Mat3& R);

}  // namespace echosim
