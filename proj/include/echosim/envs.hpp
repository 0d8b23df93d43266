#pragma once

// Batched task environments.
//
// Every env owns N independent slots stepped in parallel. Buffers are flat,
// row-major and slot-major:
//   observations  N x obs_size float32   (layout per task in obs_shape)
//   poses         N x pose_dim float64   (surgery only: position mm + quaternion wxyz)
//   actions       N x action_dim float64
//   rewards, costs N float64; terminated, truncated N uint8
// Episodes run for exactly episode_length steps; the step that reaches it
// sets terminated. Stepping a terminated slot throws InvariantError.

#include "echosim/env_config.hpp"
#include "echosim/geometry.hpp"
#include "echosim/patient.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace echosim {

struct SpaceInfo {
  std::vector<int> obs_shape;  // per slot
  int pose_dim = 0;
  int action_dim = 0;
  std::vector<double> action_low, action_high;

  std::size_t obs_size() const;
  nlohmann::json to_json() const;
};

using Metrics = std::map<std::string, double>;

class VecEnv {
 public:
  VecEnv(int num_envs, unsigned threads);
  virtual ~VecEnv() = default;
  VecEnv(const VecEnv&) = delete;
  VecEnv& operator=(const VecEnv&) = delete;

  virtual Task task() const = 0;
  virtual const Patient& patient() const = 0;
  virtual int episode_length() const = 0;

  const SpaceInfo& spaces() const { return spaces_; }
  int num_envs() const { return num_envs_; }
  unsigned threads() const { return threads_; }
  void set_threads(unsigned threads) { threads_ = threads == 0 ? 1 : threads; }

  /// Resets every slot; seeds.size() must equal num_envs().
  void reset(std::span<const std::uint64_t> seeds);
  /// Resets one slot, leaving the others untouched.
  void reset_slot(int slot, std::uint64_t seed);
  /// actions: num_envs() x action_dim, row-major.
  void step(std::span<const double> actions);

  std::span<const float> observations() const { return obs_; }
  std::span<const float> observation(int slot) const;
  std::span<const double> poses() const { return poses_; }
  std::span<const double> rewards() const { return rewards_; }
  std::span<const double> costs() const { return costs_; }
  std::span<const std::uint8_t> terminated() const { return terminated_; }
  std::span<const std::uint8_t> truncated() const { return truncated_; }

  int step_count(int slot) const { return steps_.at(slot); }
  std::uint64_t slot_seed(int slot) const { return seeds_.at(slot); }

  /// True state of a slot as a flat vector (layout per task, see info()).
  virtual std::vector<double> state(int slot) const = 0;
  /// Metrics of the slot's current state / trajectory so far.
  virtual Metrics metrics(int slot) const = 0;
  /// JSON info: "step", "state", "metrics" plus task-specific fields.
  virtual nlohmann::json info(int slot) const;

 protected:
  virtual void do_reset(int slot, std::uint64_t seed) = 0;
  /// Applies one action and sets rewards_[slot], costs_[slot] and the slot's
  /// observation buffers.
  virtual void do_step(int slot, const double* action) = 0;

  void init_buffers(SpaceInfo spaces);
  float* obs_ptr(int slot) { return obs_.data() + static_cast<std::size_t>(slot) * spaces_.obs_size(); }
  double* pose_ptr(int slot) { return poses_.data() + static_cast<std::size_t>(slot) * spaces_.pose_dim; }
  void check_slot(int slot) const;

  std::vector<double> rewards_, costs_;

 private:
  int num_envs_;
  unsigned threads_;
  SpaceInfo spaces_;
  std::vector<float> obs_;
  std::vector<double> poses_;
  std::vector<std::uint8_t> terminated_, truncated_;
  std::vector<int> steps_;
  std::vector<std::uint64_t> seeds_;
  std::vector<std::uint8_t> ready_;
};

// ---------------------------------------------------------------------------
// Navigation: probe on the skin, action (dx mm, dy mm, dyaw rad) in probe
// axes; reward w1 (|p_t| - |p_t+1|) + |q_t| - |q_t+1| with (p, q) the goal
// frame in the probe frame. Observation: H x W image.
// state(): [x, y, yaw].

class NavEnv : public VecEnv {
 public:
  NavEnv(const NavConfig& config, int num_envs, unsigned threads);

  Task task() const override { return Task::nav; }
  const Patient& patient() const override { return *patient_; }
  int episode_length() const override { return config_.episode_length; }
  const NavConfig& config() const { return config_; }

  const Pose& probe(int slot) const { return slots_.at(slot).probe; }
  const Pose& goal() const { return patient_->nav_goal(); }
  /// Goal frame expressed in the probe frame.
  Pose goal_in_probe(int slot) const { return relative_pose(probe(slot), goal()); }
  bool was_clamped(int slot) const { return slots_.at(slot).clamped; }

  std::vector<double> state(int slot) const override;
  Metrics metrics(int slot) const override;
  nlohmann::json info(int slot) const override;

  /// Position error projected on the probe's x-y plane (mm) and |yaw| (deg).
  static Metrics nav_metrics(const Pose& goal_in_probe);

 protected:
  void do_reset(int slot, std::uint64_t seed) override;
  void do_step(int slot, const double* action) override;

 private:
  struct Slot {
    double x = 0, y = 0, yaw = 0;
    Pose probe;
    bool clamped = false;
  };
  void render(int slot);

  NavConfig config_;
  std::shared_ptr<const Patient> patient_;
  std::vector<Slot> slots_;
};

// ---------------------------------------------------------------------------
// Reconstruction: action (dx, dy, dyaw, dpitch); pitch is clamped to
// +-max_pitch. Reward is the marginal gain of
//   F = area(M) - w2 * sum(|dx| + |dy| + w3 |dyaw| + w3 |dpitch|)
// where M is the set of detected upper-surface points and the penalty uses
// the applied deltas. Observation: grid^3 occupancy of M in the imaging frame.
// state(): [x, y, yaw, pitch].

class ReconEnv : public VecEnv {
 public:
  ReconEnv(const ReconConfig& config, int num_envs, unsigned threads);

  Task task() const override { return Task::recon; }
  const Patient& patient() const override { return *patient_; }
  int episode_length() const override { return config_.episode_length; }
  const ReconConfig& config() const { return config_; }

  /// Probe pose on the skin (no pitch) and the pitched imaging pose.
  const Pose& contact(int slot) const { return slots_.at(slot).contact; }
  const Pose& imaging(int slot) const { return slots_.at(slot).imaging; }
  Pose imaging_pose(double x, double y, double yaw, double pitch) const;

  /// Indices of upper-surface points inside the imaging band of `imaging`.
  std::vector<std::size_t> visible_points(const Pose& imaging) const;
  /// Occupancy grid of `points` (world) around `imaging`, written to `out`
  /// (grid^3, index (y * grid + z) * grid + x in imaging-frame cells).
  static void occupancy_grid(std::span<const Vec3> points, const Pose& imaging, int grid, double voxel,
                             std::span<float> out);

  /// F for `count` detected points and an accumulated motion penalty.
  static double objective_value(double point_area, std::size_t count, double w2, double penalty) {
    return point_area * static_cast<double>(count) - w2 * penalty;
  }

  double objective(int slot) const { return slots_.at(slot).objective; }
  std::size_t covered_count(int slot) const { return slots_.at(slot).covered_count; }
  const std::vector<std::uint8_t>& covered(int slot) const { return slots_.at(slot).covered; }

  std::vector<double> state(int slot) const override;
  Metrics metrics(int slot) const override;
  nlohmann::json info(int slot) const override;

 protected:
  void do_reset(int slot, std::uint64_t seed) override;
  void do_step(int slot, const double* action) override;

 private:
  struct Slot {
    double x = 0, y = 0, yaw = 0, pitch = 0;
    Pose contact, imaging;
    std::vector<std::uint8_t> covered;
    std::size_t covered_count = 0;
    double penalty = 0, objective = 0, path_length = 0, total_rotation = 0;
    bool clamped = false;
  };
  void observe(int slot);

  ReconConfig config_;
  std::shared_ptr<const Patient> patient_;
  std::vector<Slot> slots_;
};

// ---------------------------------------------------------------------------
// Surgery: a fixed 3D ultrasound probe watches the drill approach. Action
// (dp mm, dq rotation vector rad) in the drill frame {D}. Regions in the goal
// frame {G} (tip position p): free if p_z <= -l; drill if |p_xy| <= d/2 and
// -l < p_z <= 0; unsafe otherwise. Observation: E x H x W image stack plus
// the drill pose in the probe frame (position + quaternion wxyz).
// state(): drill pose in {G}: [p (3), quaternion wxyz (4)].

enum class Region : std::uint8_t { free, drill, unsafe };
const char* to_string(Region r);
Region classify_region(const Vec3& p_in_goal, double skin_distance, double drill_diameter);

class SurgeryEnv : public VecEnv {
 public:
  SurgeryEnv(const SurgeryConfig& config, int num_envs, unsigned threads);

  Task task() const override { return Task::surgery; }
  const Patient& patient() const override { return *patient_; }
  int episode_length() const override { return config_.episode_length; }
  const SurgeryConfig& config() const { return config_; }

  const Pose& goal() const { return goal_; }
  const Pose& drill(int slot) const { return slots_.at(slot).drill; }
  const Pose& probe(int slot) const { return slots_.at(slot).probe; }
  /// Drill frame expressed in the goal frame.
  Pose drill_in_goal(int slot) const { return relative_pose(goal_, drill(slot)); }

  double reward_for(const Pose& before_in_goal, const Pose& after_in_goal) const;

  std::vector<double> state(int slot) const override;
  Metrics metrics(int slot) const override;
  nlohmann::json info(int slot) const override;

  static Metrics surgery_metrics(const Pose& drill_in_goal, double safe_ratio);

 protected:
  void do_reset(int slot, std::uint64_t seed) override;
  void do_step(int slot, const double* action) override;

 private:
  struct Slot {
    Pose drill, probe;
    int safe_states = 0, total_states = 0;
  };
  void write_pose(int slot);

  SurgeryConfig config_;
  std::shared_ptr<const Patient> patient_;
  Pose goal_;
  std::vector<Slot> slots_;
};

std::unique_ptr<VecEnv> make_env(const TaskConfig& config, int num_envs, unsigned threads = 1);

/// Pose as JSON {"position": [..], "quaternion_wxyz": [..]}.
nlohmann::json pose_to_json(const Pose& p);

}  // namespace echosim
