#include "echosim/env_config.hpp"

#include "echosim/errors.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace echosim {

Task parse_task(const std::string& name) {
  if (name == "nav") return Task::nav;
  if (name == "recon") return Task::recon;
  if (name == "surgery") return Task::surgery;
  throw ConfigError("unknown task '" + name + "' (expected nav, recon or surgery)");
}

const char* to_string(Task task) {
  switch (task) {
    case Task::nav: return "nav";
    case Task::recon: return "recon";
    case Task::surgery: return "surgery";
  }
  return "?";
}

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace {

// Reads known keys from an object and rejects the rest.
class Reader {
 public:
  Reader(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const nlohmann::json* sub(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

SliceSpec slice_from_json(const nlohmann::json& j, SliceSpec s) {
  Reader r(j, "image");
  r.get("height", s.height);
  r.get("width", s.width);
  r.get("elevation", s.elevation);
  r.get("res_lateral", s.res_lateral);
  r.get("res_axial", s.res_axial);
  r.get("res_elevation", s.res_elevation);
  r.finish();
  s.validate();
  return s;
}

nlohmann::json slice_to_json(const SliceSpec& s) {
  return {{"height", s.height},           {"width", s.width},         {"elevation", s.elevation},
          {"res_lateral", s.res_lateral}, {"res_axial", s.res_axial}, {"res_elevation", s.res_elevation}};
}

void common(Reader& r, PatientSpec& patient, SliceSpec& image) {
  if (const auto* p = r.sub("patient")) patient = PatientSpec::from_json(*p);
  if (const auto* i = r.sub("image")) image = slice_from_json(*i, image);
}

void require(bool ok, const char* msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

void NavConfig::validate() const {
  image.validate();
  require(image.elevation == 1, "nav: image elevation must be 1");
  require(init_half_extent > 0, "nav: init_half_extent must be > 0");
  require(init_yaw[0] <= init_yaw[1], "nav: init_yaw must be [lo, hi]");
  require(w1 > 0, "nav: w1 must be > 0");
  require(episode_length >= 1, "nav: episode_length must be >= 1");
  require(max_translation > 0 && max_rotation > 0, "nav: action limits must be > 0");
}

void ReconConfig::validate() const {
  image.validate();
  require(grid >= 1, "recon: grid must be >= 1");
  require(grid_voxel > 0, "recon: grid_voxel must be > 0");
  require(miss_prob >= 0 && miss_prob < 1, "recon: miss_prob must lie in [0, 1)");
  require(w2 >= 0 && w3 >= 0, "recon: weights must be >= 0");
  require(init_half_extent >= 0, "recon: init_half_extent must be >= 0");
  require(slab_half_thickness > 0, "recon: slab_half_thickness must be > 0");
  require(episode_length >= 1, "recon: episode_length must be >= 1");
  require(max_translation > 0 && max_rotation > 0 && max_pitch >= 0, "recon: action limits must be > 0");
}

void SurgeryConfig::validate() const {
  image.validate();
  require(skin_distance > 0, "surgery: skin_distance (l) must be > 0");
  require(drill_diameter > 0, "surgery: drill_diameter (d) must be > 0");
  require(probe_lambda >= 0, "surgery: probe_lambda must be >= 0");
  require(episode_length >= 1, "surgery: episode_length must be >= 1");
  require(max_translation > 0 && max_rotation > 0, "surgery: action limits must be > 0");
  require(init_lateral >= 0 && init_rotation >= 0, "surgery: init ranges must be >= 0");
  require(init_depth[0] <= init_depth[1] && init_depth[1] <= -skin_distance,
          "surgery: init_depth must be [lo, hi] with hi <= -skin_distance");
}

TaskConfig default_config(Task task) {
  switch (task) {
    case Task::nav: return NavConfig{};
    case Task::recon: return ReconConfig{};
    case Task::surgery: return SurgeryConfig{};
  }
  throw ConfigError("unknown task");
}

Task task_of(const TaskConfig& c) { return static_cast<Task>(c.index()); }

TaskConfig config_from_json(const nlohmann::json& j, std::optional<Task> task) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (const auto it = j.find("task"); it != j.end()) {
    if (!it->is_string()) throw ConfigError("config.task must be a string");
    const Task named = parse_task(it->get<std::string>());
    if (task && *task != named) {
      throw ConfigError(std::string("config is for task '") + to_string(named) + "', expected '" + to_string(*task) +
                        "'");
    }
    task = named;
  }
  if (!task) throw ConfigError("config has no 'task' field");
  Reader r(j, "config");
  std::string ignored;
  r.get("task", ignored);
  switch (*task) {
    case Task::nav: {
      NavConfig c;
      common(r, c.patient, c.image);
      r.get("init_half_extent", c.init_half_extent);
      r.get("init_yaw", c.init_yaw);
      r.get("w1", c.w1);
      r.get("episode_length", c.episode_length);
      r.get("max_translation", c.max_translation);
      r.get("max_rotation", c.max_rotation);
      r.finish();
      c.validate();
      return c;
    }
    case Task::recon: {
      ReconConfig c;
      common(r, c.patient, c.image);
      r.get("grid", c.grid);
      r.get("grid_voxel", c.grid_voxel);
      r.get("miss_prob", c.miss_prob);
      r.get("w2", c.w2);
      r.get("w3", c.w3);
      r.get("init_half_extent", c.init_half_extent);
      r.get("slab_half_thickness", c.slab_half_thickness);
      r.get("episode_length", c.episode_length);
      r.get("max_translation", c.max_translation);
      r.get("max_rotation", c.max_rotation);
      r.get("max_pitch", c.max_pitch);
      r.finish();
      c.validate();
      return c;
    }
    case Task::surgery: {
      SurgeryConfig c;
      common(r, c.patient, c.image);
      r.get("skin_distance", c.skin_distance);
      r.get("drill_diameter", c.drill_diameter);
      r.get("probe_offset", c.probe_offset);
      r.get("probe_lambda", c.probe_lambda);
      r.get("w4", c.w4);
      r.get("w5", c.w5);
      r.get("w6", c.w6);
      r.get("episode_length", c.episode_length);
      r.get("max_translation", c.max_translation);
      r.get("max_rotation", c.max_rotation);
      r.get("init_lateral", c.init_lateral);
      r.get("init_depth", c.init_depth);
      r.get("init_rotation", c.init_rotation);
      r.finish();
      c.validate();
      return c;
    }
  }
  throw ConfigError("unknown task");
}

TaskConfig load_config(const std::filesystem::path& path, std::optional<Task> task) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j, task);
}

nlohmann::json config_to_json(const TaskConfig& config) {
  return std::visit(
      [](const auto& c) -> nlohmann::json {
        using C = std::decay_t<decltype(c)>;
        nlohmann::json j{{"patient", c.patient.to_json()},
                         {"image", slice_to_json(c.image)},
                         {"episode_length", c.episode_length},
                         {"max_translation", c.max_translation},
                         {"max_rotation", c.max_rotation}};
        if constexpr (std::is_same_v<C, NavConfig>) {
          j["task"] = "nav";
          j["init_half_extent"] = c.init_half_extent;
          j["init_yaw"] = c.init_yaw;
          j["w1"] = c.w1;
        } else if constexpr (std::is_same_v<C, ReconConfig>) {
          j["task"] = "recon";
          j["grid"] = c.grid;
          j["grid_voxel"] = c.grid_voxel;
          j["miss_prob"] = c.miss_prob;
          j["w2"] = c.w2;
          j["w3"] = c.w3;
          j["init_half_extent"] = c.init_half_extent;
          j["slab_half_thickness"] = c.slab_half_thickness;
          j["max_pitch"] = c.max_pitch;
        } else {
          j["task"] = "surgery";
          j["skin_distance"] = c.skin_distance;
          j["drill_diameter"] = c.drill_diameter;
          j["probe_offset"] = c.probe_offset;
          j["probe_lambda"] = c.probe_lambda;
          j["w4"] = c.w4;
          j["w5"] = c.w5;
          j["w6"] = c.w6;
          j["init_lateral"] = c.init_lateral;
          j["init_depth"] = c.init_depth;
          j["init_rotation"] = c.init_rotation;
        }
        return j;
      },
      config);
}

std::uint64_t config_hash(const TaskConfig& c) {
  const std::string s = config_to_json(c).dump();
  return fnv1a64(s.data(), s.size());
}

}  // namespace echosim
