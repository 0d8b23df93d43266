#pragma once

// Demonstration recording, replay verification and dataset summaries.
// The on-disk layout is described in docs/FORMAT.md.

#include "echosim/env_config.hpp"
#include "echosim/envs.hpp"
#include "echosim/experts.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace echosim {

constexpr int kDatasetFormatVersion = 1;

struct RecordOptions {
  std::string policy = "expert";
  int num_envs = 1;        // slots stepped together; results do not depend on it
  unsigned threads = 1;
  bool save_observations = true;
  ExpertParams expert;
  LawnmowerParams plan;
};

struct EpisodeSummary {
  std::filesystem::path dir;
  std::uint64_t episode_seed = 0;
  int steps = 0;
  Metrics initial_metrics;
  Metrics final_metrics;
  double reward_total = 0.0;
  double cost_total = 0.0;
};

/// Seed of episode k of a recording started with `seed`.
std::uint64_t episode_seed(std::uint64_t seed, int k);

/// Rolls out `episodes` episodes into out/episode_NNNNNN/ directories. An
/// episode is written to a temporary directory and renamed when complete;
/// on failure the partial directory is removed and the error rethrown.
std::vector<EpisodeSummary> record_rollouts(const TaskConfig& config, int episodes, std::uint64_t seed,
                                            const std::filesystem::path& out, const RecordOptions& options = {});

/// Rolls out without writing anything.
std::vector<EpisodeSummary> run_rollouts(const TaskConfig& config, int episodes, std::uint64_t seed,
                                         const RecordOptions& options = {});

struct ReplayResult {
  bool identical = false;
  int steps = 0;
  std::string mismatch;  // first difference, empty when identical
};

/// Re-simulates an episode from its (config, seed, actions) and compares
/// rewards, costs, flags, states, poses, metrics and stored observations
/// bit for bit.
ReplayResult replay_episode(const std::filesystem::path& episode_dir);

struct DatasetStats {
  int episodes = 0;  // readable episodes
  std::vector<std::string> corrupt;
  long long total_steps = 0;
  double mean_reward_total = 0.0;
  double mean_cost_total = 0.0;
  Metrics mean_final_metrics;
  std::map<std::string, int> episodes_per_task;

  nlohmann::json to_json() const;
};

/// Aggregates from the files alone. Episodes whose steps checksum, step
/// count or tensor sizes do not match their meta.json are listed as corrupt.
DatasetStats dataset_stats(const std::filesystem::path& dir);

}  // namespace echosim
