#include "echosim/envs.hpp"

#include "echosim/errors.hpp"
#include "echosim/parallel.hpp"

#include <cmath>

namespace echosim {

std::size_t SpaceInfo::obs_size() const {
  std::size_t n = 1;
  for (int d : obs_shape) n *= static_cast<std::size_t>(d);
  return n;
}

nlohmann::json SpaceInfo::to_json() const {
  return {{"obs_shape", obs_shape},
          {"obs_dtype", "float32"},
          {"pose_dim", pose_dim},
          {"action_dim", action_dim},
          {"action_low", action_low},
          {"action_high", action_high}};
}

nlohmann::json pose_to_json(const Pose& p) {
  const auto q = p.quaternion().wxyz();
  return {{"position", {p.position().x(), p.position().y(), p.position().z()}}, {"quaternion_wxyz", q}};
}

VecEnv::VecEnv(int num_envs, unsigned threads) : num_envs_(num_envs), threads_(threads == 0 ? 1 : threads) {
  if (num_envs < 1) throw ConfigError("number of envs must be >= 1");
}

void VecEnv::init_buffers(SpaceInfo spaces) {
  spaces_ = std::move(spaces);
  const std::size_t n = static_cast<std::size_t>(num_envs_);
  obs_.assign(n * spaces_.obs_size(), 0.0f);
  poses_.assign(n * spaces_.pose_dim, 0.0);
  rewards_.assign(n, 0.0);
  costs_.assign(n, 0.0);
  terminated_.assign(n, 0);
  truncated_.assign(n, 0);
  steps_.assign(n, 0);
  seeds_.assign(n, 0);
  ready_.assign(n, 0);
}

void VecEnv::check_slot(int slot) const {
  if (slot < 0 || slot >= num_envs_) throw ConfigError("env slot " + std::to_string(slot) + " out of range");
}

std::span<const float> VecEnv::observation(int slot) const {
  check_slot(slot);
  return std::span<const float>(obs_).subspan(static_cast<std::size_t>(slot) * spaces_.obs_size(),
                                              spaces_.obs_size());
}

void VecEnv::reset(std::span<const std::uint64_t> seeds) {
  if (seeds.size() != static_cast<std::size_t>(num_envs_)) {
    throw ConfigError("reset needs one seed per env (" + std::to_string(num_envs_) + ")");
  }
  parallel_for(seeds.size(), threads_, [&](std::size_t i) { reset_slot(static_cast<int>(i), seeds[i]); });
}

void VecEnv::reset_slot(int slot, std::uint64_t seed) {
  check_slot(slot);
  seeds_[slot] = seed;
  steps_[slot] = 0;
  rewards_[slot] = 0.0;
  costs_[slot] = 0.0;
  terminated_[slot] = 0;
  truncated_[slot] = 0;
  do_reset(slot, seed);
  ready_[slot] = 1;
}

void VecEnv::step(std::span<const double> actions) {
  const std::size_t dim = static_cast<std::size_t>(spaces_.action_dim);
  if (actions.size() != static_cast<std::size_t>(num_envs_) * dim) {
    throw ConfigError("step expects " + std::to_string(num_envs_) + " x " + std::to_string(dim) + " actions");
  }
  for (double a : actions) {
    if (!std::isfinite(a)) throw ConfigError("actions must be finite");
  }
  for (int i = 0; i < num_envs_; ++i) {
    if (!ready_[i]) throw InvariantError("env slot " + std::to_string(i) + " stepped before reset");
    if (terminated_[i]) throw InvariantError("env slot " + std::to_string(i) + " stepped after termination");
  }
  parallel_for(static_cast<std::size_t>(num_envs_), threads_, [&](std::size_t i) {
    const int slot = static_cast<int>(i);
    do_step(slot, actions.data() + i * dim);
    ++steps_[slot];
    terminated_[slot] = steps_[slot] >= episode_length() ? 1 : 0;
  });
}

nlohmann::json VecEnv::info(int slot) const {
  check_slot(slot);
  return {{"step", steps_[slot]}, {"state", state(slot)}, {"metrics", metrics(slot)}};
}

std::unique_ptr<VecEnv> make_env(const TaskConfig& config, int num_envs, unsigned threads) {
  return std::visit(
      [&](const auto& c) -> std::unique_ptr<VecEnv> {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, NavConfig>) return std::make_unique<NavEnv>(c, num_envs, threads);
        else if constexpr (std::is_same_v<C, ReconConfig>) return std::make_unique<ReconEnv>(c, num_envs, threads);
        else return std::make_unique<SurgeryEnv>(c, num_envs, threads);
      },
      config);
}

}  // namespace echosim
