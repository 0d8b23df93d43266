#include "echosim/experts.hpp"

#include "echosim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace echosim {

namespace {

// Uniform scale that brings max |v_i| within `limit`.
double box_scale(const double* v, int n, double limit) {
  double m = 0.0;
  for (int i = 0; i < n; ++i) m = std::max(m, std::abs(v[i]));
  return m > limit ? limit / m : 1.0;
}

int steps_for(double distance, double limit) {
  return distance <= 0.0 ? 0 : static_cast<int>(std::ceil(distance / limit - 1e-12));
}

class NavExpert : public Policy {
 public:
  explicit NavExpert(const ExpertParams& p) : params_(p) {}
  std::string name() const override { return "expert"; }
  void act(const VecEnv& env, std::span<double> actions) const override {
    const auto& nav = dynamic_cast<const NavEnv&>(env);
    for (int i = 0; i < env.num_envs(); ++i) {
      const auto a = nav_expert_action(nav.goal_in_probe(i), params_, nav.config().max_translation,
                                       nav.config().max_rotation);
      std::copy(a.begin(), a.end(), actions.begin() + 3 * i);
    }
  }

 private:
  ExpertParams params_;
};

class SurgeryExpert : public Policy {
 public:
  explicit SurgeryExpert(const ExpertParams& p) : params_(p) {}
  std::string name() const override { return "expert"; }
  void act(const VecEnv& env, std::span<double> actions) const override {
    const auto& s = dynamic_cast<const SurgeryEnv&>(env);
    for (int i = 0; i < env.num_envs(); ++i) {
      const auto a = surgery_expert_action(s.drill_in_goal(i), s.config(), params_);
      std::copy(a.begin(), a.end(), actions.begin() + 6 * i);
    }
  }

 private:
  ExpertParams params_;
};

class LawnmowerPolicy : public Policy {
 public:
  explicit LawnmowerPolicy(const LawnmowerParams& p) : params_(p) {}
  std::string name() const override { return "heuristic"; }
  void act(const VecEnv& env, std::span<double> actions) const override {
    const auto& r = dynamic_cast<const ReconEnv&>(env);
    if (!plan_ || plan_translation_ != r.config().max_translation || plan_rotation_ != r.config().max_rotation) {
      plan_ = lawnmower_plan(params_, r.config().max_translation, r.config().max_rotation);
      plan_translation_ = r.config().max_translation;
      plan_rotation_ = r.config().max_rotation;
    }
    for (int i = 0; i < env.num_envs(); ++i) {
      const std::size_t t = static_cast<std::size_t>(env.step_count(i));
      const std::array<double, 4> a = t < plan_->size() ? (*plan_)[t] : std::array<double, 4>{};
      std::copy(a.begin(), a.end(), actions.begin() + 4 * i);
    }
  }

 private:
  LawnmowerParams params_;
  mutable std::optional<std::vector<std::array<double, 4>>> plan_;
  mutable double plan_translation_ = 0, plan_rotation_ = 0;
};

class ZeroPolicy : public Policy {
 public:
  std::string name() const override { return "zero"; }
  void act(const VecEnv&, std::span<double> actions) const override {
    std::fill(actions.begin(), actions.end(), 0.0);
  }
};

}  // namespace

void ExpertParams::validate() const {
  if (!(gain > 0.0 && gain <= 1.0)) throw ConfigError("expert gain must lie in (0, 1]");
  if (!(switch_distance > 0.0) || !(switch_angle_deg > 0.0)) throw ConfigError("expert thresholds must be > 0");
}

std::array<double, 3> nav_expert_action(const Pose& goal_in_probe, const ExpertParams& params,
                                        double max_translation, double max_rotation) {
  const Vec3& p = goal_in_probe.position();
  double t[2] = {params.gain * p.x(), params.gain * p.y()};
  const double s = box_scale(t, 2, max_translation);
  const double yaw = std::clamp(params.gain * goal_in_probe.angle_axis().z(), -max_rotation, max_rotation);
  return {t[0] * s, t[1] * s, yaw};
}

bool surgery_expert_drilling(const Pose& rel, const SurgeryConfig& config, const ExpertParams& params) {
  const Vec3& p = rel.position();
  if (classify_region(p, config.skin_distance, config.drill_diameter) == Region::drill) return true;
  const double axis_deg = angle_between(rel.axis_z(), Vec3::UnitZ()) * 180.0 / M_PI;
  return (p - config.skin_point()).norm() <= params.switch_distance && axis_deg <= params.switch_angle_deg;
}

std::array<double, 6> surgery_expert_action(const Pose& rel, const SurgeryConfig& config,
                                            const ExpertParams& params) {
  const Vec3& p = rel.position();
  const Vec3 target = surgery_expert_drilling(rel, config, params) ? Vec3::Zero() : config.skin_point();
  // Displacement wanted in {G}, expressed in {D}.
  const Vec3 move = rel.rotation().transpose() * (params.gain * (target - p));
  const Vec3 turn = -params.gain * rel.angle_axis();
  const double ms = box_scale(move.data(), 3, config.max_translation);
  const double ts = box_scale(turn.data(), 3, config.max_rotation);
  return {move.x() * ms, move.y() * ms, move.z() * ms, turn.x() * ts, turn.y() * ts, turn.z() * ts};
}

std::vector<std::array<double, 4>> lawnmower_plan(const LawnmowerParams& params, double max_translation,
                                                  double max_rotation) {
  if (!(max_translation > 0.0) || !(max_rotation > 0.0)) throw ConfigError("plan limits must be > 0");
  if (params.length < 0.0 || params.spacing < 0.0 || params.passes < 0) throw ConfigError("plan extents must be >= 0");
  std::vector<std::array<double, 4>> plan;
  if (params.length == 0.0 || params.passes == 0) return plan;

  // Translate by (dx, dy) in steps bounded per axis.
  auto translate = [&](double dx, double dy) {
    const int n = std::max(steps_for(std::abs(dx), max_translation), steps_for(std::abs(dy), max_translation));
    double done_x = 0.0, done_y = 0.0;
    for (int k = 1; k <= n; ++k) {
      const double sx = std::clamp(dx - done_x, -max_translation, max_translation);
      const double sy = std::clamp(dy - done_y, -max_translation, max_translation);
      done_x += sx;
      done_y += sy;
      plan.push_back({sx, sy, 0.0, 0.0});
    }
  };
  double pitch = 0.0;
  auto pitch_to = [&](double target) {
    const int n = steps_for(std::abs(target - pitch), max_rotation);
    for (int k = 0; k < n; ++k) {
      const double d = std::clamp(target - pitch, -max_rotation, max_rotation);
      pitch += d;
      plan.push_back({0.0, 0.0, 0.0, d});
    }
  };

  translate(-0.5 * (params.passes - 1) * params.spacing, -0.5 * params.length);
  double direction = 1.0;
  for (int k = 0; k < params.passes; ++k) {
    translate(0.0, direction * params.length);
    pitch_to(k % 2 == 0 ? params.pitch : -params.pitch);
    if (k + 1 < params.passes) translate(params.spacing, 0.0);
    direction = -direction;
  }
  return plan;
}

double lawnmower_path_length(const LawnmowerParams& p) {
  if (p.length == 0.0 || p.passes == 0) return 0.0;
  const double n = p.passes;
  return 0.5 * p.length + 0.5 * (n - 1) * p.spacing + n * p.length + (n - 1) * p.spacing;
}

std::unique_ptr<Policy> make_policy(const std::string& name, Task task, const ExpertParams& params,
                                    const LawnmowerParams& plan) {
  params.validate();
  if (name == "zero") return std::make_unique<ZeroPolicy>();
  if (name == "expert" || name == "heuristic") {
    switch (task) {
      case Task::nav:
        if (name == "expert") return std::make_unique<NavExpert>(params);
        break;
      case Task::surgery:
        if (name == "expert") return std::make_unique<SurgeryExpert>(params);
        break;
      case Task::recon: return std::make_unique<LawnmowerPolicy>(plan);
    }
  }
  throw ConfigError("policy '" + name + "' is not available for task '" + to_string(task) + "'");
}

}  // namespace echosim
