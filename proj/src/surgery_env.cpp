#include "echosim/envs.hpp"

#include "echosim/errors.hpp"
#include "echosim/rng.hpp"

#include <algorithm>
#include <cmath>

namespace echosim {

namespace {

constexpr std::uint64_t kSurgeryInit = 0x53555247;

}  // namespace

const char* to_string(Region r) {
  switch (r) {
    case Region::free: return "free";
    case Region::drill: return "drill";
    case Region::unsafe: return "unsafe";
  }
  return "?";
}

Region classify_region(const Vec3& p, double skin_distance, double drill_diameter) {
  if (p.z() <= -skin_distance) return Region::free;
  if (p.z() <= 0.0 && std::hypot(p.x(), p.y()) <= 0.5 * drill_diameter) return Region::drill;
  return Region::unsafe;
}

SurgeryEnv::SurgeryEnv(const SurgeryConfig& config, int num_envs, unsigned threads)
    : VecEnv(num_envs, threads), config_(config), patient_(Patient::shared(config.patient)) {
  config_.validate();
  goal_ = patient_->landmark("goal");
  const double t = config_.max_translation, r = config_.max_rotation;
  init_buffers({{config_.image.elevation, config_.image.height, config_.image.width},
                7,
                6,
                {-t, -t, -t, -r, -r, -r},
                {t, t, t, r, r, r}});
  slots_.resize(num_envs);
}

void SurgeryEnv::write_pose(int slot) {
  const Pose rel = relative_pose(slots_[slot].probe, slots_[slot].drill);
  const auto q = rel.quaternion().wxyz();
  double* out = pose_ptr(slot);
  out[0] = rel.position().x();
  out[1] = rel.position().y();
  out[2] = rel.position().z();
  std::copy(q.begin(), q.end(), out + 3);
}

void SurgeryEnv::do_reset(int slot, std::uint64_t seed) {
  CounterRng rng(seed, kSurgeryInit);
  Slot& s = slots_[slot];
  s = Slot{};

  const Pose& vertebra = patient_->landmark("vertebra");
  const double lam = config_.probe_lambda;
  const Vec3 anchor =
      vertebra.apply(Vec3(config_.probe_offset + rng.uniform(-lam, lam), rng.uniform(-lam, lam), 0.0));
  const SkinSurface& skin = patient_->skin();
  const Eigen::Vector2d xy = skin.clamp_to_domain(anchor.x(), anchor.y());
  s.probe = skin.contact_frame(xy.x(), xy.y(), yaw_of(vertebra.rotation()));

  const double L = config_.init_lateral;
  const Vec3 p(rng.uniform(-L, L), rng.uniform(-L, L), rng.uniform(config_.init_depth[0], config_.init_depth[1]));
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  if (axis.norm() < 1e-12) axis = Vec3::UnitX();
  const double angle = rng.uniform(0.0, config_.init_rotation);
  s.drill = compose(goal_, Pose(p, rotation_of(axis.normalized() * angle)));

  thread_local PlaneSlices slices;
  thread_local UsWorkspace ws;
  patient_->render(s.probe, config_.image, slices, std::span<float>(obs_ptr(slot), spaces().obs_size()), ws);
  write_pose(slot);
  s.total_states = 1;
  s.safe_states =
      classify_region(drill_in_goal(slot).position(), config_.skin_distance, config_.drill_diameter) != Region::unsafe;
}

double SurgeryEnv::reward_for(const Pose& before, const Pose& after) const {
  const Vec3& p0 = before.position();
  const Vec3& p1 = after.position();
  const double rot = config_.w5 * (before.angle_axis().norm() - after.angle_axis().norm());
  switch (classify_region(p0, config_.skin_distance, config_.drill_diameter)) {
    case Region::free: {
      const Vec3 pl = config_.skin_point();
      return config_.w4 * ((p0 - pl).norm() - (p1 - pl).norm()) + rot;
    }
    case Region::drill: return config_.w6 * (p0.norm() - p1.norm()) + rot;
    case Region::unsafe: return 0.0;
  }
  return 0.0;
}

void SurgeryEnv::do_step(int slot, const double* action) {
  Slot& s = slots_[slot];
  const double t = config_.max_translation, r = config_.max_rotation;
  Vec3 dp, dq;
  for (int a = 0; a < 3; ++a) {
    dp[a] = std::clamp(action[a], -t, t);
    dq[a] = std::clamp(action[3 + a], -r, r);
  }
  const Pose before = drill_in_goal(slot);
  s.drill = Pose(s.drill.position() + s.drill.rotation() * dp, s.drill.rotation() * rotation_of(dq));
  const Pose after = drill_in_goal(slot);

  const Region region = classify_region(before.position(), config_.skin_distance, config_.drill_diameter);
  rewards_[slot] = reward_for(before, after);
  costs_[slot] = region == Region::unsafe ? 1.0 : 0.0;
  ++s.total_states;
  if (classify_region(after.position(), config_.skin_distance, config_.drill_diameter) != Region::unsafe) {
    ++s.safe_states;
  }
  write_pose(slot);
}

std::vector<double> SurgeryEnv::state(int slot) const {
  check_slot(slot);
  const Pose rel = drill_in_goal(slot);
  const auto q = rel.quaternion().wxyz();
  return {rel.position().x(), rel.position().y(), rel.position().z(), q[0], q[1], q[2], q[3]};
}

Metrics SurgeryEnv::surgery_metrics(const Pose& rel, double safe_ratio) {
  const Vec3& p = rel.position();
  return {{"insertion_error_mm", std::abs(p.z())},
          {"side_error_mm", std::hypot(p.x(), p.y())},
          {"rotation_error_deg", angle_between(rel.axis_z(), Vec3::UnitZ()) * 180.0 / M_PI},
          {"safe_ratio", safe_ratio}};
}

Metrics SurgeryEnv::metrics(int slot) const {
  check_slot(slot);
  const Slot& s = slots_[slot];
  return surgery_metrics(drill_in_goal(slot), static_cast<double>(s.safe_states) / s.total_states);
}

nlohmann::json SurgeryEnv::info(int slot) const {
  nlohmann::json j = VecEnv::info(slot);
  j["drill"] = pose_to_json(drill(slot));
  j["probe"] = pose_to_json(probe(slot));
  j["region"] = to_string(classify_region(drill_in_goal(slot).position(), config_.skin_distance,
                                          config_.drill_diameter));
  return j;
}

}  // namespace echosim
