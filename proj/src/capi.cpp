#include "echosim/capi.h"

#include "echosim/envs.hpp"
#include "echosim/errors.hpp"

#include <memory>
#include <string>

struct echosim_env {
  std::unique_ptr<echosim::VecEnv> env;
  std::string spaces;
  std::string config;
  std::uint64_t config_hash = 0;
  std::string info;
};

namespace {

thread_local std::string last_error;

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return 0;
  } catch (const echosim::ConfigError& e) {
    last_error = e.what();
    return 2;
  } catch (const echosim::DataError& e) {
    last_error = e.what();
    return 3;
  } catch (const echosim::InvariantError& e) {
    last_error = e.what();
    return 4;
  } catch (const std::exception& e) {
    last_error = e.what();
    return 1;
  }
}

int create(const echosim::TaskConfig& config, int num_envs, unsigned threads, echosim_env** out) {
  auto h = std::make_unique<echosim_env>();
  h->env = echosim::make_env(config, num_envs, threads);
  h->spaces = h->env->spaces().to_json().dump();
  h->config = echosim::config_to_json(config).dump();
  h->config_hash = echosim::config_hash(config);
  *out = h.release();
  return 0;
}

}  // namespace

extern "C" {

const char* echosim_last_error(void) { return last_error.c_str(); }

const char* echosim_version(void) { return "1.0.0"; }

int echosim_env_create(const char* task, const char* config_path, int num_envs, unsigned threads,
                       echosim_env** out) {
  return guarded([&] {
    if (!task || !out) throw echosim::ConfigError("task and out must not be NULL");
    const echosim::Task t = echosim::parse_task(task);
    const echosim::TaskConfig config = (config_path && *config_path) ? echosim::load_config(config_path, t)
                                                                    : echosim::default_config(t);
    create(config, num_envs, threads, out);
  });
}

int echosim_env_create_json(const char* task, const char* config_json, int num_envs, unsigned threads,
                            echosim_env** out) {
  return guarded([&] {
    if (!task || !out) throw echosim::ConfigError("task and out must not be NULL");
    const echosim::Task t = echosim::parse_task(task);
    echosim::TaskConfig config = echosim::default_config(t);
    if (config_json && *config_json) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(config_json);
      } catch (const nlohmann::json::parse_error& e) {
        throw echosim::ConfigError(e.what());
      }
      config = echosim::config_from_json(j, t);
    }
    create(config, num_envs, threads, out);
  });
}

void echosim_env_destroy(echosim_env* env) { delete env; }

int echosim_env_num_envs(const echosim_env* env) { return env->env->num_envs(); }
int echosim_env_action_dim(const echosim_env* env) { return env->env->spaces().action_dim; }
int echosim_env_pose_dim(const echosim_env* env) { return env->env->spaces().pose_dim; }
size_t echosim_env_obs_size(const echosim_env* env) { return env->env->spaces().obs_size(); }
int echosim_env_episode_length(const echosim_env* env) { return env->env->episode_length(); }
const char* echosim_env_spaces_json(const echosim_env* env) { return env->spaces.c_str(); }
const char* echosim_env_config_json(const echosim_env* env) { return env->config.c_str(); }
uint64_t echosim_env_config_hash(const echosim_env* env) { return env->config_hash; }

int echosim_env_reset(echosim_env* env, const uint64_t* seeds) {
  return guarded([&] {
    if (!seeds) throw echosim::ConfigError("seeds must not be NULL");
    env->env->reset(std::span<const std::uint64_t>(seeds, static_cast<std::size_t>(env->env->num_envs())));
  });
}

int echosim_env_step(echosim_env* env, const double* actions) {
  return guarded([&] {
    if (!actions) throw echosim::ConfigError("actions must not be NULL");
    const std::size_t n = static_cast<std::size_t>(env->env->num_envs()) * env->env->spaces().action_dim;
    env->env->step(std::span<const double>(actions, n));
  });
}

const float* echosim_env_observations(const echosim_env* env) { return env->env->observations().data(); }
const double* echosim_env_poses(const echosim_env* env) {
  return env->env->spaces().pose_dim > 0 ? env->env->poses().data() : nullptr;
}
const double* echosim_env_rewards(const echosim_env* env) { return env->env->rewards().data(); }
const double* echosim_env_costs(const echosim_env* env) { return env->env->costs().data(); }
const uint8_t* echosim_env_terminated(const echosim_env* env) { return env->env->terminated().data(); }
const uint8_t* echosim_env_truncated(const echosim_env* env) { return env->env->truncated().data(); }

const char* echosim_env_info_json(echosim_env* env, int slot) {
  const int rc = guarded([&] { env->info = env->env->info(slot).dump(); });
  return rc == 0 ? env->info.c_str() : nullptr;
}

}  // extern "C"
