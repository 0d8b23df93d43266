#pragma once

#include "echosim/patient.hpp"
#include "echosim/slicing.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>

namespace echosim {

enum class Task { nav, recon, surgery };

Task parse_task(const std::string& name);
const char* to_string(Task task);

struct NavConfig {
  PatientSpec patient;
  SliceSpec image{200, 150, 1, 0.5, 0.5, 1.0};
  double init_half_extent = 65.0;  // mm, square region around the goal
  std::array<double, 2> init_yaw{1.5, 3.5};
  double w1 = 0.045;
  int episode_length = 300;
  double max_translation = 2.0;  // mm per step, per axis
  double max_rotation = 0.05;    // rad per step

  void validate() const;
};

struct ReconConfig {
  PatientSpec patient;
  SliceSpec image{200, 150, 1, 0.5, 0.5, 1.0};
  int grid = 40;             // occupancy grid cells per side
  double grid_voxel = 3.0;   // mm
  double miss_prob = 0.2;
  double w2 = 0.01;
  double w3 = 1.0;
  double init_half_extent = 15.0;
  double slab_half_thickness = 1.5;  // visibility band around the image plane, mm
  int episode_length = 300;
  double max_translation = 2.0;
  double max_rotation = 0.05;
  double max_pitch = 0.6;  // absolute

  void validate() const;
};

struct SurgeryConfig {
  PatientSpec patient;
  SliceSpec image{50, 37, 5, 2.0, 2.0, 10.0};
  double skin_distance = 50.0;    // l
  double drill_diameter = 6.0;    // d
  double probe_offset = 30.0;     // mm along the vertebra's lateral axis
  double probe_lambda = 5.0;      // tangential randomization half-range
  double w4 = 30.0;
  double w5 = 5.0;
  double w6 = 300.0;
  int episode_length = 600;
  double max_translation = 1.0;
  double max_rotation = 0.02;
  double init_lateral = 20.0;                  // drill start, x/y half-range in {G}
  std::array<double, 2> init_depth{-100.0, -70.0};  // drill start z range in {G}
  double init_rotation = 0.3;                  // max start tilt, rad

  void validate() const;
  Vec3 skin_point() const { return {0.0, 0.0, -skin_distance}; }
};

using TaskConfig = std::variant<NavConfig, ReconConfig, SurgeryConfig>;

/// Parses a task config. Missing keys keep their defaults; unknown keys are
/// rejected. `task` selects the schema when the JSON lacks a "task" field.
TaskConfig config_from_json(const nlohmann::json& j, std::optional<Task> task = std::nullopt);
TaskConfig load_config(const std::filesystem::path& path, std::optional<Task> task = std::nullopt);
TaskConfig default_config(Task task);
Task task_of(const TaskConfig& c);

/// Fully resolved config, defaults filled in; keys are sorted so the dump is
/// canonical.
nlohmann::json config_to_json(const TaskConfig& c);

/// FNV-1a 64 of the canonical dump.
std::uint64_t config_hash(const TaskConfig& c);
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace echosim
