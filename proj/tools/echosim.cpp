// echosim command-line tool: render, rollout, bench, stats, replay.
//
// Exit codes: 0 success, 2 config/usage error, 3 data error,
// 4 internal invariant violation.

#include "echosim/datasets.hpp"
#include "echosim/env_config.hpp"
#include "echosim/envs.hpp"
#include "echosim/errors.hpp"
#include "echosim/experts.hpp"
#include "echosim/parallel.hpp"
#include "echosim/patient.hpp"
#include "echosim/simd/cpu.hpp"
#include "echosim/simd/kernels.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#ifdef ECHOSIM_HAVE_PNG
#include <png.h>
#endif

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace echosim;

namespace {

struct Common {
  std::string task;  // empty: taken from --config, else nav
  std::string config;
  std::uint64_t seed = 0;
  int envs = 1;
  int episodes = 10;
  std::string out;
  unsigned threads = 0;  // 0: all hardware threads
  std::string format;
};

void add_common(CLI::App* cmd, Common& c, std::string& format, const std::vector<std::string>& formats) {
  cmd->add_option("--task", c.task, "Task (default: the config's task, else nav)")
      ->check(CLI::IsMember({"nav", "recon", "surgery"}));
  cmd->add_option("--config", c.config, "Task config JSON");
  cmd->add_option("--seed", c.seed, "Seed (any 64-bit value)")->capture_default_str();
  cmd->add_option("--threads", c.threads, "Worker threads, 0 for all cores")->capture_default_str();
  cmd->add_option("--format", format, "Output format")->check(CLI::IsMember(formats))->capture_default_str();
}

unsigned resolve_threads(unsigned t) { return t == 0 ? default_thread_count() : t; }

TaskConfig load_task_config(const Common& c) {
  if (c.config.empty()) return default_config(parse_task(c.task.empty() ? "nav" : c.task));
  return c.task.empty() ? load_config(c.config) : load_config(c.config, parse_task(c.task));
}

PatientSpec& patient_of(TaskConfig& config) {
  return std::visit([](auto& cfg) -> PatientSpec& { return cfg.patient; }, config);
}

SliceSpec image_of(const TaskConfig& config) {
  return std::visit([](const auto& cfg) { return cfg.image; }, config);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
  if (!f) throw DataError("write failed: " + path.string());
}

// Line and column of a byte offset, both 1-based.
std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

// Pose list: a JSON array (or {"poses": [...]}) of
// {"position": [x, y, z], "quaternion_wxyz": [w, x, y, z]}.
std::vector<Pose> load_poses(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open pose file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string text = ss.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    throw DataError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": byte " +
                    std::to_string(e.byte) + ": " + e.what());
  }
  if (j.is_object() && j.contains("poses")) j = j.at("poses");
  if (!j.is_array()) throw DataError(path.string() + ": expected an array of poses");
  std::vector<Pose> poses;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string where = path.string() + ": pose " + std::to_string(i) + ": ";
    try {
      const auto p = j[i].at("position").get<std::array<double, 3>>();
      const auto q = j[i].at("quaternion_wxyz").get<std::array<double, 4>>();
      const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
      if (!(std::abs(n - 1.0) < 1e-3)) throw DataError(where + "quaternion is not unit length");
      for (double v : p) {
        if (!std::isfinite(v)) throw DataError(where + "position is not finite");
      }
      poses.push_back(Pose::from_quaternion({p[0], p[1], p[2]}, {q[0] / n, q[1] / n, q[2] / n, q[3] / n}));
    } catch (const json::exception& e) {
      throw DataError(where + e.what());
    }
  }
  if (poses.empty()) throw DataError(path.string() + ": no poses");
  return poses;
}

#ifdef ECHOSIM_HAVE_PNG
// 8-bit grayscale, elevation sheets stacked vertically.
void write_png(const fs::path& path, std::span<const float> image, const SliceSpec& spec) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw DataError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw DataError("png encoding failed: " + path.string());
  }
  const int rows = spec.height * spec.elevation;
  png_init_io(png, fp);
  png_set_IHDR(png, info, spec.width, rows, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(spec.width);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < spec.width; ++c) {
      const float v = image[static_cast<std::size_t>(r) * spec.width + c];
      row[c] = static_cast<png_byte>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}
#endif

int cmd_render(const Common& c, const std::string& ct, const std::string& labels, const std::string& landmarks,
               const std::string& poses_path, int frames, int batch) {
  using clock = std::chrono::steady_clock;
  TaskConfig config = load_task_config(c);
  PatientSpec& ps = patient_of(config);
  if (!ct.empty() || !labels.empty()) {
    if (ct.empty() || labels.empty()) throw ConfigError("--ct and --labels must be given together");
    ps.ct_path = ct;
    ps.labels_path = labels;
  }
  if (!landmarks.empty()) ps.landmarks_path = landmarks;
  const SliceSpec spec = image_of(config);
  const unsigned threads = resolve_threads(c.threads);

  const auto t_load = clock::now();
  Patient patient(ps);
  const double load_ms = std::chrono::duration<double, std::milli>(clock::now() - t_load).count();

  std::vector<Pose> poses;
  if (!poses_path.empty()) {
    poses = load_poses(poses_path);
  } else {
    if (frames < 1) throw ConfigError("--frames must be >= 1");
    poses = random_skin_poses(patient, frames, c.seed);
  }
  if (batch < 1) batch = static_cast<int>(poses.size());

  const fs::path out(c.out);
  fs::create_directories(out);
  const std::size_t n = spec.pixel_count();
  std::vector<float> images;
  BatchTiming total;
  double io_ms = 0.0;
  json pose_list = json::array();
  for (std::size_t begin = 0; begin < poses.size(); begin += static_cast<std::size_t>(batch)) {
    const std::size_t count = std::min<std::size_t>(batch, poses.size() - begin);
    images.assign(count * n, 0.0f);
    const BatchTiming t = render_batch(patient, std::span(poses).subspan(begin, count), spec, images, threads);
    total.wall_ms += t.wall_ms;
    total.slice_ms += t.slice_ms;
    total.acoustics_ms += t.acoustics_ms;

    const auto t_io = clock::now();
    for (std::size_t i = 0; i < count; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "frame_%06zu", begin + i);
      const std::span<const float> img(images.data() + i * n, n);
      std::ofstream f(out / (std::string(name) + ".raw"), std::ios::binary);
      f.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size_bytes()));
      if (!f) throw DataError("write failed: " + (out / name).string());
#ifdef ECHOSIM_HAVE_PNG
      if (c.format == "png") write_png(out / (std::string(name) + ".png"), img, spec);
#endif
      pose_list.push_back(pose_to_json(poses[begin + i]));
    }
    io_ms += std::chrono::duration<double, std::milli>(clock::now() - t_io).count();
  }
#ifndef ECHOSIM_HAVE_PNG
  if (c.format == "png") std::cerr << "echosim: built without libpng, wrote raw frames only\n";
#endif
  write_text(out / "poses.json", pose_list.dump(1) + "\n");

  const json report{
      {"frames", poses.size()},
      {"height", spec.height},
      {"width", spec.width},
      {"elevation", spec.elevation},
      {"bytes_per_frame", n * sizeof(float)},
      {"dtype", "float32"},
      {"threads", threads},
      {"batch", batch},
      {"kernels", simd::active_kernels().name},
      {"patient", patient.id()},
      {"seed", c.seed},
      {"wall_ms", total.wall_ms},
      {"frames_per_s", total.wall_ms > 0 ? 1000.0 * static_cast<double>(poses.size()) / total.wall_ms : 0.0},
      {"stages",
       {{"patient_load_ms", load_ms},
        {"slicing_ms", total.slice_ms},
        {"acoustics_ms", total.acoustics_ms},
        {"write_ms", io_ms}}}};
  write_text(out / "timing.json", report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
  return 0;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

int cmd_rollout(const Common& c, const std::string& policy, bool no_obs) {
  const TaskConfig config = load_task_config(c);
  RecordOptions opt;
  opt.policy = policy;
  opt.num_envs = c.envs;
  opt.threads = resolve_threads(c.threads);
  opt.save_observations = !no_obs;
  if (c.episodes < 1) throw ConfigError("--episodes must be >= 1");
  make_policy(policy, task_of(config), opt.expert, opt.plan);  // rejects mismatched policy/task early

  const std::vector<EpisodeSummary> eps = c.out.empty() ? run_rollouts(config, c.episodes, c.seed, opt)
                                                        : record_rollouts(config, c.episodes, c.seed, c.out, opt);

  std::vector<std::string> keys;
  for (const auto& [k, v] : eps.front().final_metrics) keys.push_back(k);
  Metrics mean_init, mean_final;
  double mean_reward = 0.0, mean_cost = 0.0;
  for (const auto& e : eps) {
    for (const auto& k : keys) {
      mean_init[k] += e.initial_metrics.at(k) / eps.size();
      mean_final[k] += e.final_metrics.at(k) / eps.size();
    }
    mean_reward += e.reward_total / eps.size();
    mean_cost += e.cost_total / eps.size();
  }

  if (c.format == "json") {
    json rows = json::array();
    for (std::size_t i = 0; i < eps.size(); ++i) {
      rows.push_back({{"episode", i},
                      {"episode_seed", eps[i].episode_seed},
                      {"steps", eps[i].steps},
                      {"reward_total", eps[i].reward_total},
                      {"cost_total", eps[i].cost_total},
                      {"initial_metrics", eps[i].initial_metrics},
                      {"final_metrics", eps[i].final_metrics}});
    }
    const json report{{"task", to_string(task_of(config))},
                      {"policy", policy},
                      {"seed", c.seed},
                      {"episodes", rows},
                      {"mean", {{"reward_total", mean_reward},
                                {"cost_total", mean_cost},
                                {"initial_metrics", mean_init},
                                {"final_metrics", mean_final}}}};
    std::cout << report.dump(2) << "\n";
    return 0;
  }

  const bool csv = c.format == "csv";
  std::vector<std::string> header{"episode", "episode_seed", "steps", "reward_total", "cost_total"};
  for (const auto& k : keys) header.push_back("initial_" + k);
  for (const auto& k : keys) header.push_back("final_" + k);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    std::vector<std::string> r{std::to_string(i), std::to_string(eps[i].episode_seed), std::to_string(eps[i].steps),
                               fmt(eps[i].reward_total), fmt(eps[i].cost_total)};
    for (const auto& k : keys) r.push_back(fmt(eps[i].initial_metrics.at(k)));
    for (const auto& k : keys) r.push_back(fmt(eps[i].final_metrics.at(k)));
    rows.push_back(std::move(r));
  }
  std::vector<std::string> mean{"mean", "", "", fmt(mean_reward), fmt(mean_cost)};
  for (const auto& k : keys) mean.push_back(fmt(mean_init[k]));
  for (const auto& k : keys) mean.push_back(fmt(mean_final[k]));
  rows.push_back(std::move(mean));

  if (csv) {
    auto line = [](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size(); ++i) std::cout << (i ? "," : "") << r[i];
      std::cout << "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return 0;
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) {
    width[i] = header[i].size();
    for (const auto& r : rows) width[i] = std::max(width[i], r[i].size());
  }
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) std::cout << (i ? "  " : "") << std::setw(int(width[i])) << r[i];
    std::cout << "\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
  return 0;
}

int cmd_bench(const Common& c, int batches) {
  if (batches < 1) throw ConfigError("--frames must be >= 1");
  if (c.envs < 1) throw ConfigError("--envs must be >= 1");
  const TaskConfig config = load_task_config(c);
  const SliceSpec spec = image_of(config);
  const auto patient = Patient::shared(std::visit([](const auto& cfg) { return cfg.patient; }, config));
  const std::vector<Pose> poses = random_skin_poses(*patient, c.envs, c.seed);
  std::vector<float> images(poses.size() * spec.pixel_count());

  const unsigned max_threads = resolve_threads(c.threads);
  std::vector<unsigned> counts;
  for (unsigned t = 1; t < max_threads; t *= 2) counts.push_back(t);
  counts.push_back(max_threads);

  json results = json::array();
  double base_ms = 0.0;
  for (unsigned t : counts) {
    render_batch(*patient, poses, spec, images, t);  // warm-up
    std::vector<double> ms;
    BatchTiming sum;
    for (int b = 0; b < batches; ++b) {
      const BatchTiming bt = render_batch(*patient, poses, spec, images, t);
      ms.push_back(bt.wall_ms);
      sum.slice_ms += bt.slice_ms / batches;
      sum.acoustics_ms += bt.acoustics_ms / batches;
    }
    std::sort(ms.begin(), ms.end());
    const double median = ms[ms.size() / 2];
    if (t == 1) base_ms = median;
    results.push_back({{"threads", t},
                       {"ms_per_batch_median", median},
                       {"ms_per_batch_min", ms.front()},
                       {"frames_per_s", 1000.0 * static_cast<double>(poses.size()) / median},
                       {"slicing_ms", sum.slice_ms},
                       {"acoustics_ms", sum.acoustics_ms},
                       {"speedup", median > 0 ? base_ms / median : 0.0}});
  }
  const json report{{"envs", poses.size()},
                    {"batches", batches},
                    {"height", spec.height},
                    {"width", spec.width},
                    {"elevation", spec.elevation},
                    {"kernels", simd::active_kernels().name},
                    {"avx2", simd::cpu_features().avx2},
                    {"hardware_threads", default_thread_count()},
                    {"results", results}};
  if (!c.out.empty()) write_text(c.out, report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
  return 0;
}

std::vector<fs::path> episode_dirs(const fs::path& path) {
  if (fs::exists(path / "meta.json")) return {path};
  std::vector<fs::path> dirs;
  if (!fs::is_directory(path)) throw DataError("not a dataset or episode directory: " + path.string());
  for (const auto& e : fs::directory_iterator(path)) {
    const std::string name = e.path().filename().string();
    if (e.is_directory() && name.rfind("episode_", 0) == 0 && name.find(".tmp") == std::string::npos) {
      dirs.push_back(e.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw DataError("no episodes under " + path.string());
  return dirs;
}

int cmd_stats(const std::string& dir) {
  const DatasetStats s = dataset_stats(dir);
  std::cout << s.to_json().dump(2) << "\n";
  return s.corrupt.empty() ? 0 : 3;
}

int cmd_replay(const std::string& dir) {
  int failures = 0;
  for (const fs::path& ep : episode_dirs(dir)) {
    const ReplayResult r = replay_episode(ep);
    std::cout << ep.filename().string() << " " << (r.identical ? "identical" : "MISMATCH") << " steps=" << r.steps;
    if (!r.identical) std::cout << " " << r.mismatch;
    std::cout << "\n";
    failures += r.identical ? 0 : 1;
  }
  return failures == 0 ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ultrasound simulation environments: rendering, rollouts, datasets, benchmarks"};
  app.require_subcommand(1);
  Common c;

  std::string render_format = "raw", rollout_format = "table", bench_format = "json";
  std::string ct, labels, landmarks, poses_path;
  int frames = 1, batch = 0;
  auto* render = app.add_subcommand("render", "Render B-mode frames for a pose list or a random skin sweep");
  add_common(render, c, render_format, {"raw", "png"});
  render->add_option("--out", c.out, "Output directory")->required();
  render->add_option("--ct", ct, "CT volume (.svol), replaces the configured phantom");
  render->add_option("--labels", labels, "Label volume (.svol)");
  render->add_option("--landmarks", landmarks, "Landmarks JSON");
  render->add_option("--poses", poses_path, "Pose list JSON");
  render->add_option("--frames", frames, "Sweep length when no pose list is given")->capture_default_str();
  render->add_option("--envs", batch, "Frames rendered per batch, 0 for all");

  std::string policy = "expert";
  bool no_obs = false;
  auto* rollout = app.add_subcommand("rollout", "Roll out a policy, optionally recording a dataset");
  add_common(rollout, c, rollout_format, {"table", "csv", "json"});
  rollout->add_option("--policy", policy, "expert, heuristic or zero")->capture_default_str();
  rollout->add_option("--envs", c.envs, "Environments stepped together")->capture_default_str();
  rollout->add_option("--episodes", c.episodes, "Episode count")->capture_default_str();
  rollout->add_option("--out", c.out, "Dataset directory (omit to only print metrics)");
  rollout->add_flag("--no-obs", no_obs, "Do not store observations");

  int batches = 10, bench_envs = 100;
  auto* bench = app.add_subcommand("bench", "Batched rendering throughput over thread counts");
  add_common(bench, c, bench_format, {"json"});
  bench->add_option("--envs", bench_envs, "Frames per batch")->capture_default_str();
  bench->add_option("--frames", batches, "Timed batches per thread count")->capture_default_str();
  bench->add_option("--out", c.out, "Also write the report to this file");

  std::string dir;
  auto* stats = app.add_subcommand("stats", "Summarize a recorded dataset");
  stats->add_option("dir", dir, "Dataset directory")->required();
  auto* replay = app.add_subcommand("replay", "Re-simulate recorded episodes and compare bit for bit");
  replay->add_option("dir", dir, "Dataset or episode directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (render->parsed()) c.format = render_format;
    if (rollout->parsed()) c.format = rollout_format;
    if (render->parsed()) return cmd_render(c, ct, labels, landmarks, poses_path, frames, batch);
    if (rollout->parsed()) return cmd_rollout(c, policy, no_obs);
    if (bench->parsed()) {
      c.envs = bench_envs;
      return cmd_bench(c, batches);
    }
    if (stats->parsed()) return cmd_stats(dir);
    if (replay->parsed()) return cmd_replay(dir);
  } catch (const ConfigError& e) {
    std::cerr << "echosim: config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "echosim: data error: " << e.what() << "\n";
    return 3;
  } catch (const InvariantError& e) {
    std::cerr << "echosim: invariant violation: " << e.what() << "\n";
    return 4;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "echosim: data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "echosim: internal error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
