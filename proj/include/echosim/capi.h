#ifndef ECHOSIM_CAPI_H
#define ECHOSIM_CAPI_H

/* C ABI over the batched environments, for foreign-function bindings.
 *
 * Return codes: 0 success, 2 configuration error, 3 data error,
 * 4 invariant violation, 1 anything else. echosim_last_error() holds the
 * message of the last failure on the calling thread.
 *
 * Buffer pointers stay valid until the next reset/step/destroy on the same
 * handle. Layouts are row-major, slot-major, little-endian (see
 * docs/PROTOCOL.md). */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct echosim_env echosim_env;

const char* echosim_last_error(void);
const char* echosim_version(void);

/* task: "nav", "recon" or "surgery". config_path may be NULL or empty for
 * the task defaults. */
int echosim_env_create(const char* task, const char* config_path, int num_envs, unsigned threads,
                       echosim_env** out);
/* config_json: UTF-8 JSON text of a task config (NULL for defaults). */
int echosim_env_create_json(const char* task, const char* config_json, int num_envs, unsigned threads,
                            echosim_env** out);
void echosim_env_destroy(echosim_env* env);

int echosim_env_num_envs(const echosim_env* env);
int echosim_env_action_dim(const echosim_env* env);
int echosim_env_pose_dim(const echosim_env* env);
size_t echosim_env_obs_size(const echosim_env* env);
int echosim_env_episode_length(const echosim_env* env);
/* Space descriptor as JSON: obs_shape, obs_dtype, pose_dim, action_dim,
 * action_low, action_high. Owned by the handle. */
const char* echosim_env_spaces_json(const echosim_env* env);
/* Fully resolved config JSON and its FNV-1a 64 hash. */
const char* echosim_env_config_json(const echosim_env* env);
uint64_t echosim_env_config_hash(const echosim_env* env);

/* seeds: num_envs values. */
int echosim_env_reset(echosim_env* env, const uint64_t* seeds);
/* actions: num_envs x action_dim doubles. */
int echosim_env_step(echosim_env* env, const double* actions);

const float* echosim_env_observations(const echosim_env* env);  /* num_envs x obs_size */
const double* echosim_env_poses(const echosim_env* env);        /* num_envs x pose_dim, NULL if 0 */
const double* echosim_env_rewards(const echosim_env* env);
const double* echosim_env_costs(const echosim_env* env);
const uint8_t* echosim_env_terminated(const echosim_env* env);
const uint8_t* echosim_env_truncated(const echosim_env* env);

/* Info JSON for one slot (true state, metrics, task fields). Owned by the
 * handle, overwritten by the next call. NULL on error. */
const char* echosim_env_info_json(echosim_env* env, int slot);

#ifdef __cplusplus
}
#endif

#endif
