#include "echosim/envs.hpp"

#include "echosim/errors.hpp"
#include "echosim/rng.hpp"

#include <algorithm>
#include <cmath>

namespace echosim {

namespace {

constexpr std::uint64_t kNavInit = 0x4e4156;
constexpr int kMaxResample = 1000;

}  // namespace

NavEnv::NavEnv(const NavConfig& config, int num_envs, unsigned threads)
    : VecEnv(num_envs, threads), config_(config), patient_(Patient::shared(config.patient)) {
  config_.validate();
  const double t = config_.max_translation, r = config_.max_rotation;
  init_buffers({{config_.image.height, config_.image.width}, 0, 3, {-t, -t, -r}, {t, t, r}});
  slots_.resize(num_envs);
}

void NavEnv::render(int slot) {
  thread_local PlaneSlices slices;
  thread_local UsWorkspace ws;
  patient_->render(slots_[slot].probe, config_.image, slices,
                   std::span<float>(obs_ptr(slot), spaces().obs_size()), ws);
}

void NavEnv::do_reset(int slot, std::uint64_t seed) {
  CounterRng rng(seed, kNavInit);
  const SkinSurface& skin = patient_->skin();
  const Vec3& g = goal().position();
  Slot& s = slots_[slot];
  int tries = 0;
  do {
    if (++tries > kMaxResample) throw DataError("nav reset: init region does not overlap the skin domain");
    s.x = g.x() + rng.uniform(-config_.init_half_extent, config_.init_half_extent);
    s.y = g.y() + rng.uniform(-config_.init_half_extent, config_.init_half_extent);
  } while (!skin.in_domain(s.x, s.y));
  s.yaw = rng.uniform(config_.init_yaw[0], config_.init_yaw[1]);
  s.clamped = false;
  s.probe = skin.contact_frame(s.x, s.y, s.yaw);
  render(slot);
}

void NavEnv::do_step(int slot, const double* action) {
  Slot& s = slots_[slot];
  const double t = config_.max_translation, r = config_.max_rotation;
  const double dx = std::clamp(action[0], -t, t);
  const double dy = std::clamp(action[1], -t, t);
  const double da = std::clamp(action[2], -r, r);

  const Pose before = goal_in_probe(slot);
  const Vec3 moved = s.probe.position() + s.probe.rotation() * Vec3(dx, dy, 0.0);
  const SkinSurface& skin = patient_->skin();
  s.clamped = !skin.in_domain(moved.x(), moved.y());
  const Eigen::Vector2d xy = skin.clamp_to_domain(moved.x(), moved.y());
  s.x = xy.x();
  s.y = xy.y();
  s.yaw += da;
  s.probe = skin.contact_frame(s.x, s.y, s.yaw);
  const Pose after = goal_in_probe(slot);

  rewards_[slot] = config_.w1 * (before.position().norm() - after.position().norm()) +
                   (before.angle_axis().norm() - after.angle_axis().norm());
  costs_[slot] = 0.0;
  render(slot);
}

std::vector<double> NavEnv::state(int slot) const {
  check_slot(slot);
  const Slot& s = slots_[slot];
  return {s.x, s.y, s.yaw};
}

Metrics NavEnv::nav_metrics(const Pose& goal_in_probe) {
  const Vec3& p = goal_in_probe.position();
  return {{"position_error_mm", std::hypot(p.x(), p.y())},
          {"rotation_error_deg", std::abs(goal_in_probe.angle_axis().z()) * 180.0 / M_PI}};
}

Metrics NavEnv::metrics(int slot) const {
  check_slot(slot);
  return nav_metrics(goal_in_probe(slot));
}

nlohmann::json NavEnv::info(int slot) const {
  nlohmann::json j = VecEnv::info(slot);
  j["probe"] = pose_to_json(probe(slot));
  j["goal_in_probe"] = pose_to_json(goal_in_probe(slot));
  j["clamped"] = was_clamped(slot);
  return j;
}

}  // namespace echosim
