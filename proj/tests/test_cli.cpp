#include "echosim/env_config.hpp"

#include "test_support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(ECHOSIM_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string hash_file(const fs::path& p) {
  const std::string s = slurp(p);
  return echosim::hex64(echosim::fnv1a64(s.data(), s.size()));
}

}  // namespace

TEST_CASE("render writes raw float frames and a timing report") {
  const fs::path a = testsupport::scratch_dir("render_a"), b = testsupport::scratch_dir("render_b");
  const Run r = run("render --task nav --seed 4 --frames 3 --out " + a.string());
  REQUIRE(r.code == 0);
  for (int i = 0; i < 3; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%06d.raw", i);
    CHECK(fs::file_size(a / name) == 200u * 150u * 4u);
  }
  const json timing = json::parse(slurp(a / "timing.json"));
  CHECK(timing.at("frames") == 3);
  CHECK(timing.at("bytes_per_frame") == 200 * 150 * 4);
  CHECK(timing.at("stages").contains("acoustics_ms"));
  CHECK(json::parse(slurp(a / "poses.json")).size() == 3);

  REQUIRE(run("render --task nav --seed 4 --frames 3 --envs 2 --out " + b.string()).code == 0);
  CHECK(hash_file(a / "frame_000002.raw") == hash_file(b / "frame_000002.raw"));
  CHECK(hash_file(a / "poses.json") == hash_file(b / "poses.json"));

  const fs::path c = testsupport::scratch_dir("render_c");
  REQUIRE(run("render --task surgery --seed 4 --frames 1 --out " + c.string()).code == 0);
  CHECK(fs::file_size(c / "frame_000000.raw") == 5u * 50u * 37u * 4u);
}

TEST_CASE("render from a pose list") {
  const fs::path dir = testsupport::scratch_dir("render_poses");
  {
    std::ofstream f(dir / "poses.json");
    f << R"([{"position": [0, 0, 89], "quaternion_wxyz": [0, 1, 0, 0]},
             {"position": [5, 0, 88], "quaternion_wxyz": [0, 1, 0, 0]}])";
  }
  REQUIRE(run("render --poses " + (dir / "poses.json").string() + " --out " + (dir / "out").string()).code == 0);
  CHECK(fs::exists(dir / "out" / "frame_000001.raw"));
  {
    std::ofstream f(dir / "bad.json");
    f << R"([{"position": [0, 0], "quaternion_wxyz": [1, 0, 0, 0]}])";
  }
  CHECK(run("render --poses " + (dir / "bad.json").string() + " --out " + (dir / "o2").string()).code == 3);
}

TEST_CASE("zero-policy rollout leaves the probe where it started") {
  const Run r = run("rollout --task nav --policy zero --episodes 2 --seed 3 --format json");
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j.at("policy") == "zero");
  for (const auto& e : j.at("episodes")) {
    CHECK(e.at("steps") == 300);
    CHECK(e.at("reward_total") == 0.0);
    CHECK(e.at("final_metrics").at("position_error_mm").get<double>() ==
          doctest::Approx(e.at("initial_metrics").at("position_error_mm").get<double>()).epsilon(1e-12));
  }
}

TEST_CASE("rollout formats and recorded datasets") {
  const Run csv = run("rollout --task nav --episodes 2 --envs 2 --seed 1 --format csv");
  REQUIRE(csv.code == 0);
  CHECK(csv.out.rfind("episode,episode_seed,steps,reward_total,cost_total", 0) == 0);
  const Run table = run("rollout --task recon --episodes 1 --seed 1");
  CHECK(table.code == 0);
  CHECK(table.out.find("final_coverage_ratio") != std::string::npos);

  const fs::path dir = testsupport::scratch_dir("rollout");
  const fs::path cfg = dir / "surgery.json";
  {
    std::ofstream f(cfg);
    f << R"({"task": "surgery", "episode_length": 15})";
  }
  REQUIRE(run("rollout --config " + cfg.string() + " --episodes 2 --seed 8 --out " + (dir / "data").string()).code == 0);
  const Run replay = run("replay " + (dir / "data").string());
  CHECK(replay.code == 0);
  CHECK(replay.out.find("episode_000001 identical steps=15") != std::string::npos);
  const Run stats = run("stats " + (dir / "data").string());
  CHECK(stats.code == 0);
  const json s = json::parse(stats.out);
  CHECK(s.at("episodes") == 2);
  CHECK(s.at("total_steps") == 30);
  CHECK(s.at("episodes_per_task").at("surgery") == 2);
}

TEST_CASE("bench smoke run") {
  const fs::path dir = testsupport::scratch_dir("bench");
  const Run r = run("bench --envs 1 --frames 1 --threads 1 --out " + (dir / "bench.json").string());
  REQUIRE(r.code == 0);
  const json j = json::parse(slurp(dir / "bench.json"));
  for (const char* key : {"envs", "batches", "height", "width", "elevation", "kernels", "avx2", "hardware_threads", "results"}) {
    CHECK_MESSAGE(j.contains(key), key);
  }
  REQUIRE(j.at("results").size() == 1);
  const json& row = j.at("results")[0];
  CHECK(row.at("threads") == 1);
  CHECK(row.at("ms_per_batch_median").get<double>() > 0.0);
  CHECK(row.at("frames_per_s").get<double>() > 0.0);
  CHECK(j.at("envs") == 1);
}

TEST_CASE("exit codes") {
  CHECK(run("").code == 2);
  CHECK(run("rollout --task walk").code == 2);
  CHECK(run("rollout --task nav --episodes 0").code == 2);
  const fs::path dir = testsupport::scratch_dir("codes");
  {
    std::ofstream f(dir / "bad.json");
    f << R"({"task": "nav", "unknown_key": 1})";
  }
  CHECK(run("rollout --config " + (dir / "bad.json").string()).code == 2);
  CHECK(run("rollout --config " + (dir / "missing.json").string()).code == 2);
  CHECK(run("replay " + (dir / "nothing").string()).code == 3);
  CHECK(run("render --ct " + (dir / "nope.svol").string() + " --labels " + (dir / "nope.svol").string() + " --out " +
            (dir / "o").string())
            .code == 3);
}
