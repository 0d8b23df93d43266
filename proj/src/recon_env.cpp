#include "echosim/envs.hpp"

#include "echosim/errors.hpp"
#include "echosim/rng.hpp"

#include <algorithm>
#include <cmath>

namespace echosim {

namespace {

constexpr std::uint64_t kReconInit = 0x524543;
constexpr std::uint64_t kReconMiss = 0x4d495353;

}  // namespace

ReconEnv::ReconEnv(const ReconConfig& config, int num_envs, unsigned threads)
    : VecEnv(num_envs, threads), config_(config), patient_(Patient::shared(config.patient)) {
  config_.validate();
  const double t = config_.max_translation, r = config_.max_rotation;
  init_buffers({{config_.grid, config_.grid, config_.grid}, 0, 4, {-t, -t, -r, -r}, {t, t, r, r}});
  slots_.resize(num_envs);
}

Pose ReconEnv::imaging_pose(double x, double y, double yaw, double pitch) const {
  return compose(patient_->skin().contact_frame(x, y, yaw), Pose(Vec3::Zero(), rot_y(pitch)));
}

std::vector<std::size_t> ReconEnv::visible_points(const Pose& imaging) const {
  const SliceSpec& im = config_.image;
  const double half_width = 0.5 * (im.width - 1) * im.res_lateral;
  const double depth = (im.height - 1) * im.res_axial;
  const auto& pts = patient_->surface_points();
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3 q = imaging.apply_inverse(pts[i]);
    if (std::abs(q.y()) <= config_.slab_half_thickness && std::abs(q.x()) <= half_width && q.z() >= 0.0 &&
        q.z() <= depth) {
      out.push_back(i);
    }
  }
  return out;
}

void ReconEnv::occupancy_grid(std::span<const Vec3> points, const Pose& imaging, int grid, double voxel,
                              std::span<float> out) {
  if (out.size() != static_cast<std::size_t>(grid) * grid * grid) throw ConfigError("occupancy buffer size");
  std::fill(out.begin(), out.end(), 0.0f);
  const double half = 0.5 * grid;
  for (const Vec3& p : points) {
    const Vec3 q = imaging.apply_inverse(p);
    const double u[3] = {q.x() / voxel + half, q.y() / voxel + half, q.z() / voxel + half};
    int idx[3];
    bool inside = true;
    for (int a = 0; a < 3; ++a) {
      const double f = std::floor(u[a]);
      if (!(f >= 0.0 && f < grid)) {
        inside = false;
        break;
      }
      idx[a] = static_cast<int>(f);
    }
    if (!inside) continue;
    out[(static_cast<std::size_t>(idx[1]) * grid + idx[2]) * grid + idx[0]] = 1.0f;
  }
}

void ReconEnv::observe(int slot) {
  const Slot& s = slots_[slot];
  const auto& pts = patient_->surface_points();
  std::vector<Vec3> covered;
  covered.reserve(s.covered_count);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (s.covered[i]) covered.push_back(pts[i]);
  }
  const std::size_t n = static_cast<std::size_t>(config_.grid) * config_.grid * config_.grid;
  occupancy_grid(covered, s.imaging, config_.grid, config_.grid_voxel, std::span<float>(obs_ptr(slot), n));
}

void ReconEnv::do_reset(int slot, std::uint64_t seed) {
  CounterRng rng(seed, kReconInit);
  const Vec3 center =
      patient_->has_landmark("vertebra") ? patient_->landmark("vertebra").position() : patient_->nav_goal().position();
  Slot& s = slots_[slot];
  s = Slot{};
  const double h = config_.init_half_extent;
  const Eigen::Vector2d xy =
      patient_->skin().clamp_to_domain(center.x() + rng.uniform(-h, h), center.y() + rng.uniform(-h, h));
  s.x = xy.x();
  s.y = xy.y();
  s.contact = patient_->skin().contact_frame(s.x, s.y, s.yaw);
  s.imaging = imaging_pose(s.x, s.y, s.yaw, s.pitch);
  s.covered.assign(patient_->surface_points().size(), 0);
  observe(slot);
}

void ReconEnv::do_step(int slot, const double* action) {
  Slot& s = slots_[slot];
  const double t = config_.max_translation, r = config_.max_rotation;
  const double dx = std::clamp(action[0], -t, t);
  const double dy = std::clamp(action[1], -t, t);
  const double da = std::clamp(action[2], -r, r);
  const double new_pitch = std::clamp(s.pitch + std::clamp(action[3], -r, r), -config_.max_pitch, config_.max_pitch);
  const double db = new_pitch - s.pitch;

  const SkinSurface& skin = patient_->skin();
  const Vec3 moved = s.contact.position() + s.contact.rotation() * Vec3(dx, dy, 0.0);
  s.clamped = !skin.in_domain(moved.x(), moved.y());
  const Eigen::Vector2d xy = skin.clamp_to_domain(moved.x(), moved.y());
  s.x = xy.x();
  s.y = xy.y();
  s.yaw += da;
  s.pitch = new_pitch;
  s.contact = skin.contact_frame(s.x, s.y, s.yaw);
  s.imaging = imaging_pose(s.x, s.y, s.yaw, s.pitch);

  s.path_length += std::abs(dx) + std::abs(dy);
  s.total_rotation += std::abs(da) + std::abs(db);
  s.penalty += std::abs(dx) + std::abs(dy) + config_.w3 * (std::abs(da) + std::abs(db));

  const std::uint64_t step = static_cast<std::uint64_t>(step_count(slot));
  for (std::size_t i : visible_points(s.imaging)) {
    if (s.covered[i]) continue;
    if (config_.miss_prob > 0.0 && uniform_at(slot_seed(slot), kReconMiss, (step << 32) | i) < config_.miss_prob) {
      continue;
    }
    s.covered[i] = 1;
    ++s.covered_count;
  }

  const double before = s.objective;
  s.objective = objective_value(patient_->surface_point_area(), s.covered_count, config_.w2, s.penalty);
  rewards_[slot] = s.objective - before;
  costs_[slot] = 0.0;
  observe(slot);
}

std::vector<double> ReconEnv::state(int slot) const {
  check_slot(slot);
  const Slot& s = slots_[slot];
  return {s.x, s.y, s.yaw, s.pitch};
}

Metrics ReconEnv::metrics(int slot) const {
  check_slot(slot);
  const Slot& s = slots_[slot];
  const std::size_t total = patient_->surface_points().size();
  return {{"coverage_ratio", total == 0 ? 0.0 : static_cast<double>(s.covered_count) / total},
          {"total_rotation_rad", s.total_rotation},
          {"path_length_mm", s.path_length},
          {"objective", s.objective}};
}

nlohmann::json ReconEnv::info(int slot) const {
  nlohmann::json j = VecEnv::info(slot);
  j["probe"] = pose_to_json(contact(slot));
  j["imaging"] = pose_to_json(imaging(slot));
  j["covered_points"] = covered_count(slot);
  j["clamped"] = slots_.at(slot).clamped;
  return j;
}

}  // namespace echosim
