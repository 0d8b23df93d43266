#pragma once

// Scripted full-state policies: proportional navigation and surgery experts
// and the open-loop lawnmower planner for reconstruction.

#include "echosim/envs.hpp"

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace echosim {

struct ExpertParams {
  double gain = 0.2;               // proportional gain, (0, 1]
  double switch_distance = 2.0;    // mm from the skin point before drilling
  double switch_angle_deg = 2.0;   // drill axis alignment before drilling

  void validate() const;
};

/// gain * [p_x, p_y, yaw] of the goal in the probe frame. The translation is
/// scaled uniformly into the +-max_translation box, the yaw clamped.
std::array<double, 3> nav_expert_action(const Pose& goal_in_probe, const ExpertParams& params,
                                        double max_translation, double max_rotation);

/// Phase 1 drives the tip toward the skin point p_l while servoing the drill
/// axis onto the goal axis; phase 2 (inside the drill corridor, or within
/// switch_distance of p_l and aligned) drives the tip toward the goal. Both
/// commands are scaled uniformly into the per-step box.
std::array<double, 6> surgery_expert_action(const Pose& drill_in_goal, const SurgeryConfig& config,
                                            const ExpertParams& params);
bool surgery_expert_drilling(const Pose& drill_in_goal, const SurgeryConfig& config, const ExpertParams& params);

struct LawnmowerParams {
  double length = 80.0;   // pass length along probe y, mm
  int passes = 3;
  double spacing = 20.0;  // between passes along probe x, mm
  double pitch = 0.3;     // toggled at each pass end, rad
};

/// Per-step (dx, dy, dyaw, dpitch) actions: move to the start corner, then
/// alternate passes along probe y separated by steps along probe x.
std::vector<std::array<double, 4>> lawnmower_plan(const LawnmowerParams& params, double max_translation,
                                                  double max_rotation);
/// Analytic translation length of the plan:
/// length/2 + (passes-1) spacing/2 + passes length + (passes-1) spacing.
double lawnmower_path_length(const LawnmowerParams& params);

/// Fills num_envs x action_dim actions for the env's current states.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual void act(const VecEnv& env, std::span<double> actions) const = 0;
};

/// "expert" (nav, surgery), "heuristic" (recon; "expert" is an alias) or
/// "zero" (any task). Throws ConfigError for a mismatched name/task.
std::unique_ptr<Policy> make_policy(const std::string& name, Task task, const ExpertParams& params = {},
                                    const LawnmowerParams& plan = {});

}  // namespace echosim
