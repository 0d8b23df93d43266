#include "echosim/datasets.hpp"

#include "echosim/errors.hpp"
#include "echosim/rng.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace echosim {

namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little, "dataset tensors are written in host order");

std::string episode_name(int k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "episode_%06d", k);
  return buf;
}

void write_file(const fs::path& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot create " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw DataError("write failed: " + path.string());
}

void write_text(const fs::path& path, const std::string& text) { write_file(path, text.data(), text.size()); }

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_obs(const fs::path& dir, int t, std::span<const float> obs) {
  write_file(dir / ("obs_" + std::to_string(t) + ".f32"), obs.data(), obs.size_bytes());
}

nlohmann::json shape_json(const VecEnv& env) {
  return {{"dtype", "float32"},
          {"byte_order", "little"},
          {"shape", env.spaces().obs_shape},
          {"layout", "row-major"},
          {"pose_dim", env.spaces().pose_dim}};
}

nlohmann::json step_line(const VecEnv& env, int slot, int t, std::span<const double> action) {
  nlohmann::json line{{"t", t},
                      {"action", std::vector<double>(action.begin(), action.end())},
                      {"reward", env.rewards()[slot]},
                      {"cost", env.costs()[slot]},
                      {"terminated", env.terminated()[slot] != 0},
                      {"truncated", env.truncated()[slot] != 0},
                      {"state", env.state(slot)}};
  const int pd = env.spaces().pose_dim;
  if (pd > 0) {
    const auto p = env.poses().subspan(static_cast<std::size_t>(slot) * pd, pd);
    line["pose"] = std::vector<double>(p.begin(), p.end());
  }
  return line;
}

std::vector<EpisodeSummary> rollout_impl(const TaskConfig& config, int episodes, std::uint64_t seed,
                                         const fs::path* out, const RecordOptions& options) {
  if (episodes < 0) throw ConfigError("episode count must be >= 0");
  if (options.num_envs < 1) throw ConfigError("number of envs must be >= 1");
  const Task task = task_of(config);
  const auto policy = make_policy(options.policy, task, options.expert, options.plan);
  const nlohmann::json config_json = config_to_json(config);
  const std::string hash = hex64(config_hash(config));
  if (out) fs::create_directories(*out);

  std::vector<EpisodeSummary> summaries;
  for (int start = 0; start < episodes; start += options.num_envs) {
    const int n = std::min(options.num_envs, episodes - start);
    auto env = make_env(config, n, options.threads);
    std::vector<std::uint64_t> seeds(n);
    for (int i = 0; i < n; ++i) seeds[i] = episode_seed(seed, start + i);

    std::vector<fs::path> tmp(n);
    std::vector<std::string> lines(n);
    std::vector<EpisodeSummary> batch(n);
    std::vector<nlohmann::json> initial_state(n);
    try {
      if (out) {
        for (int i = 0; i < n; ++i) {
          tmp[i] = *out / (episode_name(start + i) + ".tmp");
          fs::remove_all(tmp[i]);
          fs::create_directories(tmp[i]);
        }
      }
      env->reset(seeds);
      for (int i = 0; i < n; ++i) {
        batch[i].episode_seed = seeds[i];
        batch[i].initial_metrics = env->metrics(i);
        initial_state[i] = env->state(i);
        if (out) {
          write_text(tmp[i] / "shape.json", shape_json(*env).dump(2) + "\n");
          if (options.save_observations) write_obs(tmp[i], 0, env->observation(i));
        }
      }
      const std::size_t dim = static_cast<std::size_t>(env->spaces().action_dim);
      std::vector<double> actions(static_cast<std::size_t>(n) * dim);
      for (int t = 1; t <= env->episode_length(); ++t) {
        policy->act(*env, actions);
        env->step(actions);
        for (int i = 0; i < n; ++i) {
          batch[i].reward_total += env->rewards()[i];
          batch[i].cost_total += env->costs()[i];
          if (out) {
            lines[i] += step_line(*env, i, t, std::span<const double>(actions).subspan(i * dim, dim)).dump();
            lines[i] += '\n';
            if (options.save_observations) write_obs(tmp[i], t, env->observation(i));
          }
        }
      }
      for (int i = 0; i < n; ++i) {
        batch[i].steps = env->step_count(i);
        batch[i].final_metrics = env->metrics(i);
        if (!out) continue;
        write_text(tmp[i] / "steps.jsonl", lines[i]);
        const nlohmann::json meta{{"format_version", kDatasetFormatVersion},
                                  {"task", to_string(task)},
                                  {"config", config_json},
                                  {"config_hash", hash},
                                  {"seed", seed},
                                  {"episode_index", start + i},
                                  {"episode_seed", seeds[i]},
                                  {"patient_id", env->patient().id()},
                                  {"policy", policy->name()},
                                  {"steps", batch[i].steps},
                                  {"observations", options.save_observations},
                                  {"initial_state", initial_state[i]},
                                  {"initial_metrics", batch[i].initial_metrics},
                                  {"final_metrics", batch[i].final_metrics},
                                  {"reward_total", batch[i].reward_total},
                                  {"cost_total", batch[i].cost_total},
                                  {"steps_checksum", hex64(fnv1a64(lines[i].data(), lines[i].size()))}};
        write_text(tmp[i] / "meta.json", meta.dump(2) + "\n");
        const fs::path final_dir = *out / episode_name(start + i);
        fs::remove_all(final_dir);
        fs::rename(tmp[i], final_dir);
        batch[i].dir = final_dir;
      }
    } catch (...) {
      for (const auto& p : tmp) {
        std::error_code ec;
        if (!p.empty()) fs::remove_all(p, ec);
      }
      throw;
    }
    summaries.insert(summaries.end(), batch.begin(), batch.end());
  }
  return summaries;
}

template <typename A, typename B>
bool same_vector(const A& a, const B& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] == b[i])) return false;
  }
  return true;
}

bool same_bytes(const fs::path& file, std::span<const float> data) {
  const std::string bytes = read_text(file);
  return bytes.size() == data.size_bytes() && std::memcmp(bytes.data(), data.data(), bytes.size()) == 0;
}

}  // namespace

std::uint64_t episode_seed(std::uint64_t seed, int k) {
  return hash_combine(seed, static_cast<std::uint64_t>(k) + 0x45504953ULL);
}

std::vector<EpisodeSummary> record_rollouts(const TaskConfig& config, int episodes, std::uint64_t seed,
                                            const fs::path& out, const RecordOptions& options) {
  return rollout_impl(config, episodes, seed, &out, options);
}

std::vector<EpisodeSummary> run_rollouts(const TaskConfig& config, int episodes, std::uint64_t seed,
                                         const RecordOptions& options) {
  return rollout_impl(config, episodes, seed, nullptr, options);
}

ReplayResult replay_episode(const fs::path& dir) {
  ReplayResult result;
  const nlohmann::json meta = read_json(dir / "meta.json");
  if (meta.value("format_version", 0) != kDatasetFormatVersion) throw DataError("unsupported dataset format version");
  const TaskConfig config = config_from_json(meta.at("config"));
  if (hex64(config_hash(config)) != meta.at("config_hash").get<std::string>()) {
    result.mismatch = "config hash differs from meta.json";
    return result;
  }
  const bool with_obs = meta.value("observations", false);
  auto env = make_env(config, 1, 1);
  const std::uint64_t eseed = meta.at("episode_seed").get<std::uint64_t>();
  const std::uint64_t seeds[1] = {eseed};
  env->reset(seeds);
  if (!same_vector(env->state(0), meta.at("initial_state").get<std::vector<double>>())) {
    result.mismatch = "initial state";
    return result;
  }
  if (with_obs && !same_bytes(dir / "obs_0.f32", env->observation(0))) {
    result.mismatch = "observation 0";
    return result;
  }

  std::istringstream lines(read_text(dir / "steps.jsonl"));
  std::string text;
  while (std::getline(lines, text)) {
    const nlohmann::json line = nlohmann::json::parse(text);
    const int t = line.at("t").get<int>();
    const auto action = line.at("action").get<std::vector<double>>();
    env->step(action);
    result.steps = env->step_count(0);
    auto fail = [&](const std::string& what) {
      result.mismatch = what + " at step " + std::to_string(t);
      return result;
    };
    if (t != result.steps) return fail("step index");
    if (!(env->rewards()[0] == line.at("reward").get<double>())) return fail("reward");
    if (!(env->costs()[0] == line.at("cost").get<double>())) return fail("cost");
    if ((env->terminated()[0] != 0) != line.at("terminated").get<bool>()) return fail("terminated flag");
    if ((env->truncated()[0] != 0) != line.at("truncated").get<bool>()) return fail("truncated flag");
    if (!same_vector(env->state(0), line.at("state").get<std::vector<double>>())) return fail("state");
    if (line.contains("pose") && !same_vector(env->poses(), line.at("pose").get<std::vector<double>>())) {
      return fail("pose");
    }
    if (with_obs && !same_bytes(dir / ("obs_" + std::to_string(t) + ".f32"), env->observation(0))) {
      return fail("observation");
    }
  }
  if (result.steps != meta.at("steps").get<int>()) {
    result.mismatch = "step count";
    return result;
  }
  const Metrics final_metrics = env->metrics(0);
  const auto stored = meta.at("final_metrics").get<Metrics>();
  if (final_metrics != stored) {
    result.mismatch = "final metrics";
    return result;
  }
  result.identical = true;
  return result;
}

nlohmann::json DatasetStats::to_json() const {
  return {{"episodes", episodes},
          {"corrupt", corrupt},
          {"total_steps", total_steps},
          {"mean_reward_total", mean_reward_total},
          {"mean_cost_total", mean_cost_total},
          {"mean_final_metrics", mean_final_metrics},
          {"episodes_per_task", episodes_per_task}};
}

DatasetStats dataset_stats(const fs::path& dir) {
  DatasetStats stats;
  if (!fs::is_directory(dir)) throw DataError("not a dataset directory: " + dir.string());
  std::vector<fs::path> episodes;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "meta.json")) episodes.push_back(entry.path());
  }
  std::sort(episodes.begin(), episodes.end());

  Metrics sums;
  double reward_sum = 0.0, cost_sum = 0.0;
  for (const auto& ep : episodes) {
    try {
      const nlohmann::json meta = read_json(ep / "meta.json");
      const std::string steps_text = read_text(ep / "steps.jsonl");
      if (hex64(fnv1a64(steps_text.data(), steps_text.size())) != meta.at("steps_checksum").get<std::string>()) {
        throw DataError("steps checksum mismatch");
      }
      double reward = 0.0, cost = 0.0;
      long long count = 0;
      std::istringstream lines(steps_text);
      std::string text;
      while (std::getline(lines, text)) {
        const nlohmann::json line = nlohmann::json::parse(text);
        reward += line.at("reward").get<double>();
        cost += line.at("cost").get<double>();
        ++count;
      }
      if (count != meta.at("steps").get<long long>()) throw DataError("step count mismatch");
      if (meta.value("observations", false)) {
        const nlohmann::json shape = read_json(ep / "shape.json");
        std::uintmax_t expected = 4;
        for (int d : shape.at("shape").get<std::vector<int>>()) expected *= static_cast<std::uintmax_t>(d);
        for (long long t = 0; t <= count; ++t) {
          const fs::path f = ep / ("obs_" + std::to_string(t) + ".f32");
          if (!fs::exists(f) || fs::file_size(f) != expected) throw DataError("tensor size mismatch");
        }
      }
      const auto final_metrics = meta.at("final_metrics").get<Metrics>();
      for (const auto& [k, v] : final_metrics) sums[k] += v;
      reward_sum += reward;
      cost_sum += cost;
      stats.total_steps += count;
      ++stats.episodes_per_task[meta.at("task").get<std::string>()];
      ++stats.episodes;
    } catch (const std::exception&) {
      stats.corrupt.push_back(ep.filename().string());
    }
  }
  if (stats.episodes > 0) {
    stats.mean_reward_total = reward_sum / stats.episodes;
    stats.mean_cost_total = cost_sum / stats.episodes;
    for (const auto& [k, v] : sums) stats.mean_final_metrics[k] = v / stats.episodes;
  }
  return stats;
}

}  // namespace echosim
