#include "echosim/datasets.hpp"
#include "echosim/errors.hpp"
#include "echosim/experts.hpp"

#include "frozen.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace echosim;

TEST_CASE("nav expert formula") {
  const ExpertParams p;
  const auto zero = nav_expert_action(Pose::identity(), p, 2.0, 0.05);
  CHECK(zero == std::array<double, 3>{0, 0, 0});
  const auto a = nav_expert_action(Pose::translation(Vec3(10, 0, 4)), p, 100.0, 0.05);
  CHECK(a[0] == doctest::Approx(2.0));
  CHECK(a[1] == 0.0);
  CHECK(a[2] == 0.0);
  // Uniform scaling keeps the direction when the box clamp bites.
  const auto c = nav_expert_action(Pose::translation(Vec3(30, -15, 0)), p, 2.0, 0.05);
  CHECK(c[0] == doctest::Approx(2.0));
  CHECK(c[1] == doctest::Approx(-1.0));
  const auto r = nav_expert_action(Pose(Vec3::Zero(), rot_z(0.1)), p, 2.0, 0.05);
  CHECK(r[2] == doctest::Approx(0.02));
  const auto rc = nav_expert_action(Pose(Vec3::Zero(), rot_z(-1.0)), p, 2.0, 0.05);
  CHECK(rc[2] == doctest::Approx(-0.05));
}

TEST_CASE("nav expert depends only on the relative pose") {
  CounterRng rng(2, 2);
  const ExpertParams p;
  for (int i = 0; i < 100; ++i) {
    const Pose probe = testsupport::random_pose(rng);
    const Pose goal = testsupport::random_pose(rng);
    const Pose world = testsupport::random_pose(rng);
    const auto a = nav_expert_action(relative_pose(probe, goal), p, 2.0, 0.05);
    const auto b = nav_expert_action(relative_pose(world * probe, world * goal), p, 2.0, 0.05);
    for (int k = 0; k < 3; ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-9));
  }
}

TEST_CASE("nav expert contracts the distance once unclamped") {
  NavConfig cfg;
  cfg.episode_length = 150;
  NavEnv env(cfg, 100, 1);
  std::vector<std::uint64_t> seeds(100);
  for (int i = 0; i < 100; ++i) seeds[i] = episode_seed(42, i);
  env.reset(seeds);
  const auto policy = make_policy("expert", Task::nav);
  std::vector<double> a(300);
  int checked = 0;
  for (int t = 0; t < cfg.episode_length; ++t) {
    policy->act(env, a);
    std::vector<double> before(100);
    std::vector<bool> free(100);
    for (int i = 0; i < 100; ++i) {
      before[i] = env.goal_in_probe(i).position().head<2>().norm();
      free[i] = std::abs(a[3 * i]) < cfg.max_translation && std::abs(a[3 * i + 1]) < cfg.max_translation &&
                std::abs(a[3 * i + 2]) < cfg.max_rotation && before[i] > 1e-6;
    }
    env.step(a);
    for (int i = 0; i < 100; ++i) {
      if (!free[i]) continue;
      CHECK(env.goal_in_probe(i).position().head<2>().norm() < before[i]);
      ++checked;
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("surgery expert") {
  SurgeryConfig cfg;
  const ExpertParams p;
  const auto z = surgery_expert_action(Pose::identity(), cfg, p);
  for (double v : z) CHECK(v == 0.0);
  CHECK(surgery_expert_drilling(Pose::translation(Vec3(0, 0, -20)), cfg, p));
  CHECK_FALSE(surgery_expert_drilling(Pose::translation(Vec3(0, 0, -80)), cfg, p));
  CHECK(surgery_expert_drilling(Pose::translation(Vec3(0.5, 0, -51)), cfg, p));
  CHECK_FALSE(surgery_expert_drilling(Pose(Vec3(0.5, 0, -51), rot_x(0.2)), cfg, p));
  const auto a = surgery_expert_action(Pose::translation(Vec3(0, 0, -80)), cfg, p);
  CHECK(a[2] == doctest::Approx(1.0));
  CHECK(a[0] == 0.0);
}

TEST_CASE("surgery expert with a fixed probe reaches the goal safely") {
  SurgeryConfig cfg;
  cfg.probe_lambda = 0.0;
  SurgeryEnv env(cfg, 10, 1);
  std::vector<std::uint64_t> seeds(10);
  for (int i = 0; i < 10; ++i) seeds[i] = episode_seed(5, i);
  env.reset(seeds);
  const auto policy = make_policy("expert", Task::surgery);
  const ExpertParams p;
  std::vector<double> a(60);
  for (int t = 0; t < cfg.episode_length; ++t) {
    policy->act(env, a);
    env.step(a);
    for (int i = 0; i < 10; ++i) {
      const Pose rel = env.drill_in_goal(i);
      if (surgery_expert_drilling(rel, cfg, p)) {
        CHECK(classify_region(rel.position(), cfg.skin_distance, cfg.drill_diameter) != Region::unsafe);
      }
    }
  }
  for (int i = 0; i < 10; ++i) {
    const Metrics m = env.metrics(i);
    CHECK(m.at("safe_ratio") == 1.0);
    CHECK(m.at("insertion_error_mm") < 1.0);
    CHECK(m.at("side_error_mm") < 0.5);
  }
}

TEST_CASE("lawnmower plan") {
  LawnmowerParams none;
  none.length = 0.0;
  CHECK(lawnmower_plan(none, 2.0, 0.05).empty());
  CHECK(lawnmower_path_length(none) == 0.0);
  none = LawnmowerParams{};
  none.passes = 0;
  CHECK(lawnmower_plan(none, 2.0, 0.05).empty());

  for (const LawnmowerParams& lp : {LawnmowerParams{}, LawnmowerParams{45.0, 4, 7.5, 0.2}, LawnmowerParams{10, 1, 0, 0}}) {
    const auto plan = lawnmower_plan(lp, 2.0, 0.05);
    double length = 0.0, pitch = 0.0, max_pitch = 0.0, x = 0.0, y = 0.0;
    for (const auto& a : plan) {
      CHECK(std::abs(a[0]) <= 2.0);
      CHECK(std::abs(a[1]) <= 2.0);
      CHECK(std::abs(a[3]) <= 0.05 + 1e-12);
      CHECK(a[2] == 0.0);
      length += std::abs(a[0]) + std::abs(a[1]);
      x += a[0];
      y += a[1];
      pitch += a[3];
      max_pitch = std::max(max_pitch, std::abs(pitch));
    }
    CHECK(length == doctest::Approx(lawnmower_path_length(lp)).epsilon(1e-9));
    CHECK(max_pitch == doctest::Approx(lp.pitch));
    // Ends on the far corner of the pattern.
    CHECK(x == doctest::Approx(0.5 * (lp.passes - 1) * lp.spacing));
    CHECK(std::abs(y) == doctest::Approx(0.5 * lp.length));
  }
  CHECK(lawnmower_plan(LawnmowerParams{}, 2.0, 0.05).size() <= 300);
  CHECK_THROWS_AS(lawnmower_plan(LawnmowerParams{-1.0, 3, 20, 0.3}, 2.0, 0.05), ConfigError);
}

TEST_CASE("policy factory") {
  CHECK(make_policy("expert", Task::nav)->name() == "expert");
  CHECK(make_policy("heuristic", Task::recon)->name() == "heuristic");
  CHECK(make_policy("expert", Task::recon)->name() == "heuristic");
  CHECK(make_policy("zero", Task::surgery)->name() == "zero");
  CHECK_THROWS_AS(make_policy("heuristic", Task::nav), ConfigError);
  CHECK_THROWS_AS(make_policy("random", Task::nav), ConfigError);
  ExpertParams bad;
  bad.gain = 1.5;
  CHECK_THROWS_AS(make_policy("expert", Task::nav, bad), ConfigError);
}

TEST_CASE("heuristic coverage with no misses is at least the frozen stochastic value") {
  ReconConfig cfg;
  cfg.miss_prob = 0.0;
  RecordOptions opt;
  opt.policy = "heuristic";
  opt.num_envs = 10;
  const auto eps = run_rollouts(cfg, 10, 0, opt);
  double mean = 0.0;
  for (const auto& e : eps) mean += e.final_metrics.at("coverage_ratio") / eps.size();
  MESSAGE("heuristic coverage without misses: " << mean);
  CHECK(mean >= frozen::kHeuristicCoverage);
}
