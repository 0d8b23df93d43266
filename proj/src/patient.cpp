#include "echosim/patient.hpp"

#include "echosim/errors.hpp"
#include "echosim/parallel.hpp"
#include "echosim/rng.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>

namespace echosim {

double yaw_of(const Mat3& R) { return std::atan2(R(1, 0), R(0, 0)); }

PatientSpec PatientSpec::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("patient must be a JSON object");
  PatientSpec s;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "phantom") s.phantom = parse_phantom_kind(value.get<std::string>());
      else if (key == "phantom_seed") s.phantom_seed = value.get<std::uint64_t>();
      else if (key == "noise_seed") s.noise_seed = value.is_null() ? std::nullopt
                                                                    : std::optional(value.get<std::uint64_t>());
      else if (key == "ct") s.ct_path = value.get<std::string>();
      else if (key == "labels") s.labels_path = value.get<std::string>();
      else if (key == "landmarks") s.landmarks_path = value.get<std::string>();
      else if (key == "acoustic_table") {
        s.table = value.is_string() ? AcousticTable::load(value.get<std::string>()) : AcousticTable::from_json(value);
      } else if (key == "us") s.us = UsParams::from_json(value);
      else throw ConfigError("unknown patient key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("patient: ") + e.what());
  }
  if (s.ct_path.empty() != s.labels_path.empty()) throw ConfigError("patient: ct and labels must be given together");
  return s;
}

nlohmann::json PatientSpec::to_json() const {
  nlohmann::json j{{"phantom", to_string(phantom)},
                   {"phantom_seed", phantom_seed},
                   {"noise_seed", resolved_noise_seed()},
                   {"acoustic_table", table.to_json()},
                   {"us", us.to_json()}};
  if (!ct_path.empty()) {
    j["ct"] = ct_path;
    j["labels"] = labels_path;
  }
  if (!landmarks_path.empty()) j["landmarks"] = landmarks_path;
  return j;
}

std::uint64_t PatientSpec::resolved_noise_seed() const {
  return noise_seed ? *noise_seed : hash_combine(phantom_seed, 0x6e6f697365ULL);
}

Patient::Patient(const PatientSpec& spec) : spec_(spec) {
  if (!spec.ct_path.empty()) {
    ct_ = load_volume(spec.ct_path);
    labels_ = load_volume(spec.labels_path);
    if (ct_.kind != VolumeKind::ct || !labels_.is_label()) throw DataError("patient: expected a ct and a label volume");
    if (ct_.geometry.dims != labels_.geometry.dims || !ct_.geometry.spacing.isApprox(labels_.geometry.spacing) ||
        !ct_.geometry.origin.isApprox(labels_.geometry.origin)) {
      throw DataError("patient: ct and label volumes are not on the same grid");
    }
    if (!spec.landmarks_path.empty()) landmarks_ = load_landmarks(spec.landmarks_path);
    id_ = "file:" + spec.ct_path;
  } else {
    Phantom p = generate_phantom(spec.phantom, spec.phantom_seed);
    ct_ = std::move(p.ct);
    labels_ = std::move(p.labels);
    landmarks_ = std::move(p.landmarks);
    id_ = p.id;
    if (!spec.landmarks_path.empty()) landmarks_ = load_landmarks(spec.landmarks_path);
  }
  spec.table.validate();
  spec.table.report_missing(labels_);
  skin_ = extract_skin_surface(labels_);
  noise_ = std::make_unique<NoiseFields>(ct_.geometry, spec.resolved_noise_seed(), spec.us);
  sim_ = std::make_unique<UsSimulator>(spec.table, *noise_, spec.us);

  if (has_landmark("vertebra")) {
    const Pose& v = landmarks_.at("vertebra");
    nav_goal_ = skin_.contact_frame(v.position().x(), v.position().y(), yaw_of(v.rotation()));
  } else if (has_landmark("surface_center")) {
    const Pose& c = landmarks_.at("surface_center");
    nav_goal_ = skin_.contact_frame(c.position().x(), c.position().y(), 0.0);
  } else {
    nav_goal_ = skin_.contact_frame(0.5 * (skin_.domain_min_x() + skin_.domain_max_x()),
                                    0.5 * (skin_.domain_min_y() + skin_.domain_max_y()), 0.0);
  }

  const GridGeometry& g = labels_.geometry;
  for (int k = 0; k < g.dims[2]; ++k) {
    for (int j = 0; j < g.dims[1]; ++j) {
      for (int i = 0; i < g.dims[0]; ++i) {
        if (labels_.label_at(i, j, k) != tissue::bone) continue;
        if (k + 1 < g.dims[2] && labels_.label_at(i, j, k + 1) == tissue::bone) continue;
        surface_points_.push_back(g.voxel_center(i, j, k));
      }
    }
  }
  surface_point_area_ = g.spacing.x() * g.spacing.y();
}

std::shared_ptr<const Patient> Patient::shared(const PatientSpec& spec) {
  static std::mutex mutex;
  static std::map<std::string, std::shared_ptr<const Patient>> cache;
  const std::string key = spec.to_json().dump();
  std::lock_guard lock(mutex);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto p = std::make_shared<const Patient>(spec);
  cache.emplace(key, p);
  return p;
}

const Pose& Patient::landmark(const std::string& name) const {
  const auto it = landmarks_.find(name);
  if (it == landmarks_.end()) throw ConfigError("patient " + id_ + " has no landmark '" + name + "'");
  return it->second;
}

void Patient::render(const Pose& probe, const SliceSpec& spec, PlaneSlices& slices, std::span<float> image,
                     UsWorkspace& ws) const {
  extract_plane_slices_into(ct_, labels_, probe, spec, kDefaultBackgroundCt, slices);
  sim_->simulate(slices, image, ws);
}

BatchTiming render_batch(const Patient& patient, std::span<const Pose> poses, const SliceSpec& spec,
                         std::span<float> images, unsigned threads) {
  spec.validate();
  const std::size_t n = spec.pixel_count();
  if (images.size() != poses.size() * n) throw ConfigError("render_batch: image buffer has the wrong size");
  using clock = std::chrono::steady_clock;
  std::atomic<std::int64_t> slice_ns{0}, acoustics_ns{0};
  const auto start = clock::now();
  parallel_for(poses.size(), threads, [&](std::size_t i) {
    thread_local PlaneSlices slices;
    thread_local UsWorkspace ws;
    const auto t0 = clock::now();
    extract_plane_slices_into(patient.ct(), patient.labels(), poses[i], spec, kDefaultBackgroundCt, slices);
    const auto t1 = clock::now();
    patient.simulator().simulate(slices, images.subspan(i * n, n), ws);
    const auto t2 = clock::now();
    slice_ns += std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
    acoustics_ns += std::chrono::duration_cast<std::chrono::nanoseconds>(t2 - t1).count();
  });
  BatchTiming t;
  t.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - start).count();
  t.slice_ms = slice_ns.load() * 1e-6;
  t.acoustics_ms = acoustics_ns.load() * 1e-6;
  return t;
}

std::vector<Pose> random_skin_poses(const Patient& patient, int count, std::uint64_t seed, double half_extent) {
  CounterRng rng(seed, 0x504f534553ULL);
  const Vec3& c = patient.nav_goal().position();
  std::vector<Pose> poses;
  poses.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    const double x = c.x() + rng.uniform(-half_extent, half_extent);
    const double y = c.y() + rng.uniform(-half_extent, half_extent);
    const double yaw = rng.uniform(-M_PI, M_PI);
    const Eigen::Vector2d xy = patient.skin().clamp_to_domain(x, y);
    poses.push_back(patient.skin().contact_frame(xy.x(), xy.y(), yaw));
  }
  return poses;
}

}  // namespace echosim
