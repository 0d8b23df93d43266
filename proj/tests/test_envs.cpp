#include "echosim/envs.hpp"
#include "echosim/errors.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cstring>
#include <set>

using namespace echosim;

namespace {

std::vector<std::uint64_t> seeds_for(int n, std::uint64_t base) {
  std::vector<std::uint64_t> s(n);
  for (int i = 0; i < n; ++i) s[i] = base + 1000 * i;
  return s;
}

void random_actions(CounterRng& rng, const SpaceInfo& sp, int n, std::vector<double>& a) {
  a.resize(static_cast<std::size_t>(n) * sp.action_dim);
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < sp.action_dim; ++d) a[i * sp.action_dim + d] = rng.uniform(sp.action_low[d], sp.action_high[d]);
}

void check_on_skin(const SkinSurface& skin, const Pose& p) {
  CHECK(std::abs(p.position().z() - skin.height(p.position().x(), p.position().y())) < 1e-6);
  CHECK(angle_between(p.axis_z(), -skin.normal(p.position().x(), p.position().y())) < 1e-6);
}

}  // namespace

TEST_CASE("space shapes match the task layouts") {
  const auto nav = make_env(default_config(Task::nav), 2);
  CHECK(nav->spaces().obs_shape == std::vector<int>{200, 150});
  CHECK(nav->spaces().action_dim == 3);
  CHECK(nav->spaces().pose_dim == 0);
  CHECK(nav->observations().size() == 2u * 200 * 150);
  const auto recon = make_env(default_config(Task::recon), 1);
  CHECK(recon->spaces().obs_shape == std::vector<int>{40, 40, 40});
  CHECK(recon->spaces().action_dim == 4);
  const auto surgery = make_env(default_config(Task::surgery), 3);
  CHECK(surgery->spaces().obs_shape == std::vector<int>{5, 50, 37});
  CHECK(surgery->spaces().pose_dim == 7);
  CHECK(surgery->spaces().action_dim == 6);
  CHECK(surgery->poses().size() == 3u * 7);
  CHECK(nav->episode_length() == 300);
  CHECK(recon->episode_length() == 300);
  CHECK(surgery->episode_length() == 600);
}

TEST_CASE("task names and config JSON") {
  CHECK(parse_task("nav") == Task::nav);
  CHECK_THROWS_AS(parse_task("navigate"), ConfigError);
  for (Task t : {Task::nav, Task::recon, Task::surgery}) {
    const TaskConfig c = default_config(t);
    const nlohmann::json j = config_to_json(c);
    CHECK(j.at("task") == to_string(t));
    const TaskConfig back = config_from_json(j);
    CHECK(config_hash(back) == config_hash(c));
    CHECK(config_to_json(back).dump() == j.dump());
  }
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"task", "nav"}, {"bogus", 1}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"task", "nav"}, {"w1", -1}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"task", "recon"}, {"miss_prob", 1.0}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"w1", 0.1}}), ConfigError);
  const TaskConfig partial = config_from_json(nlohmann::json{{"w1", 0.1}}, Task::nav);
  CHECK(std::get<NavConfig>(partial).w1 == 0.1);
  CHECK(std::get<NavConfig>(partial).episode_length == 300);
  CHECK(config_hash(partial) != config_hash(default_config(Task::nav)));
}

TEST_CASE("shipped configs are the defaults") {
  const std::filesystem::path dir = std::filesystem::path(ECHOSIM_SOURCE_DIR) / "configs";
  for (Task t : {Task::nav, Task::recon, Task::surgery}) {
    const TaskConfig c = load_config(dir / (std::string(to_string(t)) + ".json"));
    CHECK(config_hash(c) == config_hash(default_config(t)));
  }
  const AcousticTable table = AcousticTable::load(dir / "acoustic_table.json");
  CHECK(table.to_json() == AcousticTable::defaults().to_json());
}

TEST_CASE("nav reset stays in the init rectangle on the skin") {
  NavConfig cfg;
  NavEnv env(cfg, 50, 1);
  const Vec3 g = env.goal().position();
  std::set<double> xs;
  for (int round = 0; round < 20; ++round) {
    env.reset(seeds_for(50, 7 + round));
    for (int i = 0; i < 50; ++i) {
      const auto s = env.state(i);
      CHECK(std::abs(s[0] - g.x()) <= cfg.init_half_extent);
      CHECK(std::abs(s[1] - g.y()) <= cfg.init_half_extent);
      CHECK(s[2] >= cfg.init_yaw[0]);
      CHECK(s[2] <= cfg.init_yaw[1]);
      check_on_skin(env.patient().skin(), env.probe(i));
      xs.insert(s[0]);
    }
  }
  CHECK(xs.size() == 1000);
}

TEST_CASE("nav reward: zero action, direct approach and retreat") {
  NavConfig cfg;
  cfg.patient.phantom = PhantomKind::slab;
  cfg.max_translation = 20.0;
  NavEnv env(cfg, 1, 1);
  env.reset(std::vector<std::uint64_t>{3});
  std::vector<double> a{0, 0, 0};
  env.step(a);
  CHECK(env.rewards()[0] == 0.0);

  // Flat skin: moving 10 mm straight at the goal shortens |p| by exactly 10.
  const Vec3 p = env.goal_in_probe(0).position();
  const double d = std::hypot(p.x(), p.y());
  REQUIRE(d > 10.0);
  a = {10.0 * p.x() / d, 10.0 * p.y() / d, 0.0};
  env.step(a);
  CHECK(env.rewards()[0] == doctest::Approx(0.045 * 10.0).epsilon(1e-9));
  a = {-a[0], -a[1], 0.0};
  env.step(a);
  CHECK(env.rewards()[0] < 0.0);
}

TEST_CASE("nav metrics") {
  const Metrics m = NavEnv::nav_metrics(Pose::translation(Vec3(3, 4, 17)));
  CHECK(m.at("position_error_mm") == doctest::Approx(5.0));
  CHECK(m.at("rotation_error_deg") == 0.0);
  const Metrics r = NavEnv::nav_metrics(Pose(Vec3::Zero(), rot_z(-0.1)));
  CHECK(r.at("rotation_error_deg") == doctest::Approx(0.1 * 180 / M_PI));
  CHECK(r.at("position_error_mm") == 0.0);
}

TEST_CASE("nav reward telescopes under random actions") {
  NavEnv env(NavConfig{}, 4, 1);
  env.reset(seeds_for(4, 99));
  std::vector<Pose> start;
  for (int i = 0; i < 4; ++i) start.push_back(env.goal_in_probe(i));
  std::vector<double> sum(4, 0.0), a;
  CounterRng rng(1, 9);
  for (int t = 0; t < 100; ++t) {
    random_actions(rng, env.spaces(), 4, a);
    env.step(a);
    for (int i = 0; i < 4; ++i) sum[i] += env.rewards()[i];
  }
  for (int i = 0; i < 4; ++i) {
    const Pose end = env.goal_in_probe(i);
    const double expect = 0.045 * (start[i].position().norm() - end.position().norm()) +
                          (start[i].angle_axis().norm() - end.angle_axis().norm());
    CHECK(std::abs(sum[i] - expect) < 1e-6);
  }
}

TEST_CASE("probe stays on the skin through random nav and recon steps") {
  NavConfig nc;
  nc.episode_length = 2000;
  NavEnv nav(nc, 1, 1);
  nav.reset(std::vector<std::uint64_t>{5});
  ReconConfig rc;
  rc.episode_length = 2000;
  ReconEnv recon(rc, 1, 1);
  recon.reset(std::vector<std::uint64_t>{5});
  CounterRng rng(2, 2);
  std::vector<double> a;
  int clamped = 0;
  for (int t = 0; t < 2000; ++t) {
    random_actions(rng, nav.spaces(), 1, a);
    // Bias toward one corner so that the domain clamp is exercised too.
    a[0] = std::abs(a[0]);
    nav.step(a);
    check_on_skin(nav.patient().skin(), nav.probe(0));
    clamped += nav.was_clamped(0);
    random_actions(rng, recon.spaces(), 1, a);
    recon.step(a);
    check_on_skin(recon.patient().skin(), recon.contact(0));
    CHECK(std::abs(recon.state(0)[3]) <= rc.max_pitch);
  }
  MESSAGE("steps clamped to the skin domain: " << clamped);
}

TEST_CASE("episodes terminate at their length") {
  NavConfig cfg;
  cfg.episode_length = 3;
  NavEnv env(cfg, 2, 1);
  std::vector<double> a(6, 0.0);
  CHECK_THROWS_AS(env.step(a), InvariantError);
  env.reset(seeds_for(2, 1));
  env.step(a);
  env.step(a);
  CHECK(env.terminated()[0] == 0);
  env.step(a);
  CHECK(env.terminated()[0] == 1);
  CHECK(env.terminated()[1] == 1);
  CHECK(env.truncated()[0] == 0);
  CHECK(env.step_count(0) == 3);
  CHECK_THROWS_AS(env.step(a), InvariantError);
  env.reset_slot(0, 5);
  CHECK(env.terminated()[0] == 0);
  CHECK_THROWS_AS(env.step(std::vector<double>(5, 0.0)), ConfigError);
  CHECK_THROWS_AS(env.reset(seeds_for(3, 1)), ConfigError);
}

TEST_CASE("slots are deterministic and independent of batch size and threads") {
  for (Task task : {Task::nav, Task::recon, Task::surgery}) {
    const TaskConfig cfg = default_config(task);
    auto a = make_env(cfg, 3, 1);
    auto b = make_env(cfg, 1, 1);
    auto c = make_env(cfg, 3, 2);
    const auto seeds = seeds_for(3, 77);
    a->reset(seeds);
    c->reset(seeds);
    b->reset(std::vector<std::uint64_t>{seeds[2]});
    CounterRng rng(3, 3);
    std::vector<double> act;
    for (int t = 0; t < 15; ++t) {
      random_actions(rng, a->spaces(), 3, act);
      a->step(act);
      c->step(act);
      const int dim = a->spaces().action_dim;
      b->step(std::span<const double>(act).subspan(2 * dim, dim));
      CHECK(std::memcmp(a->observations().data(), c->observations().data(), a->observations().size_bytes()) == 0);
      CHECK(std::memcmp(a->rewards().data(), c->rewards().data(), a->rewards().size_bytes()) == 0);
      const auto oa = a->observation(2), ob = b->observation(0);
      CHECK(std::memcmp(oa.data(), ob.data(), oa.size_bytes()) == 0);
      CHECK(a->rewards()[2] == b->rewards()[0]);
      CHECK(a->costs()[2] == b->costs()[0]);
      CHECK(a->state(2) == b->state(0));
    }
  }
}

TEST_CASE("recon reward example and objective") {
  CHECK(ReconEnv::objective_value(9.0, 10, 0.01, 2.0) == doctest::Approx(89.98).epsilon(1e-12));
  CHECK(ReconEnv::objective_value(1.0, 0, 0.01, 0.0) == 0.0);
}

TEST_CASE("recon occupancy grid") {
  std::vector<float> grid(40 * 40 * 40);
  const Pose imaging(Vec3(10, -5, 70), rot_x(M_PI) * rot_z(0.4));
  ReconEnv::occupancy_grid({}, imaging, 40, 3.0, grid);
  for (float v : grid) CHECK(v == 0.0f);
  const std::vector<Vec3> one{imaging.position()};
  ReconEnv::occupancy_grid(one, imaging, 40, 3.0, grid);
  int occupied = 0;
  for (float v : grid) occupied += v != 0.0f;
  CHECK(occupied == 1);
  CHECK(grid[(20 * 40 + 20) * 40 + 20] == 1.0f);

  CounterRng rng(4, 4);
  std::vector<Vec3> pts;
  for (int i = 0; i < 300; ++i) pts.push_back(imaging.apply(Vec3(rng.uniform(-70, 70), rng.uniform(-70, 70), rng.uniform(-70, 70))));
  std::vector<float> g1(grid.size()), g2(grid.size());
  ReconEnv::occupancy_grid(pts, imaging, 40, 3.0, g1);
  const Pose motion = testsupport::random_pose(rng);
  std::vector<Vec3> moved;
  for (const Vec3& p : pts) moved.push_back(motion.apply(p));
  ReconEnv::occupancy_grid(moved, compose(motion, imaging), 40, 3.0, g2);
  int diff = 0, filled = 0;
  for (std::size_t i = 0; i < g1.size(); ++i) {
    diff += g1[i] != g2[i];
    filled += g1[i] != 0.0f;
  }
  // Points exactly on a cell face could bin differently after rounding.
  CHECK(diff <= 2);
  CHECK(filled > 50);
}

TEST_CASE("recon metrics, coverage idempotence and telescoping") {
  ReconConfig cfg;
  cfg.miss_prob = 0.0;
  ReconEnv env(cfg, 1, 1);
  env.reset(std::vector<std::uint64_t>{12});
  const Metrics m0 = env.metrics(0);
  CHECK(m0.at("coverage_ratio") == 0.0);
  CHECK(m0.at("total_rotation_rad") == 0.0);
  CHECK(m0.at("path_length_mm") == 0.0);
  for (float v : env.observation(0)) CHECK(v == 0.0f);

  std::vector<double> zero(4, 0.0);
  double sum = 0.0;
  env.step(zero);
  sum += env.rewards()[0];
  env.step(zero);
  CHECK(env.rewards()[0] == 0.0);
  std::vector<double> fwd{2, 0, 0, 0}, back{-2, 0, 0, 0};
  env.step(fwd);
  sum += env.rewards()[0];
  const auto covered = env.covered_count(0);
  env.step(back);
  sum += env.rewards()[0];
  env.step(fwd);
  CHECK(env.covered_count(0) == covered);
  CHECK(env.rewards()[0] == doctest::Approx(-cfg.w2 * 2.0).epsilon(1e-12));
  sum += env.rewards()[0];

  CounterRng rng(5, 5);
  std::vector<double> a;
  for (int t = 0; t < 120; ++t) {
    random_actions(rng, env.spaces(), 1, a);
    env.step(a);
    sum += env.rewards()[0];
  }
  CHECK(std::abs(sum - env.objective(0)) < 1e-9);
  const Metrics m = env.metrics(0);
  const double area = env.patient().surface_point_area();
  const double penalty = m.at("path_length_mm") + cfg.w3 * m.at("total_rotation_rad");
  CHECK(env.objective(0) == doctest::Approx(area * env.covered_count(0) - cfg.w2 * penalty).epsilon(1e-12));
  int occupied = 0;
  for (float v : env.observation(0)) occupied += v != 0.0f;
  CHECK(occupied > 0);
}

TEST_CASE("exhaustive sweep covers the whole upper surface") {
  ReconConfig cfg;
  cfg.miss_prob = 0.0;
  ReconEnv env(cfg, 1, 1);
  const auto& pts = env.patient().surface_points();
  REQUIRE(!pts.empty());
  const Vec3 v = env.patient().landmark("vertebra").position();
  std::vector<std::uint8_t> seen(pts.size(), 0);
  for (double x = v.x() - 60; x <= v.x() + 60; x += 20) {
    for (double y = v.y() - 40; y <= v.y() + 40; y += 1.0) {
      for (std::size_t i : env.visible_points(env.imaging_pose(x, y, 0.0, 0.0))) seen[i] = 1;
    }
  }
  std::size_t n = 0;
  for (auto s : seen) n += s;
  CHECK(n == pts.size());
}

TEST_CASE("coverage is monotone and submodular") {
  ReconConfig cfg;
  cfg.miss_prob = 0.0;
  ReconEnv env(cfg, 1, 1);
  const Vec3 v = env.patient().landmark("vertebra").position();
  CounterRng rng(6, 6);
  auto random_view = [&] {
    return env.visible_points(env.imaging_pose(v.x() + rng.uniform(-25, 25), v.y() + rng.uniform(-25, 25),
                                               rng.uniform(-M_PI, M_PI), rng.uniform(-0.6, 0.6)));
  };
  auto coverage = [](const std::vector<std::vector<std::size_t>>& views) {
    std::set<std::size_t> u;
    for (const auto& w : views) u.insert(w.begin(), w.end());
    return u.size();
  };
  int triples = 0, strict = 0;
  for (int trial = 0; trial < 250; ++trial) {
    std::vector<std::vector<std::size_t>> B, A;
    const int nb = 1 + static_cast<int>(rng.next_u64() % 6);
    for (int k = 0; k < nb; ++k) {
      B.push_back(random_view());
      if (rng.uniform() < 0.5) A.push_back(B.back());
    }
    const auto x = random_view();
    auto Ax = A, Bx = B;
    Ax.push_back(x);
    Bx.push_back(x);
    const long gain_a = static_cast<long>(coverage(Ax)) - static_cast<long>(coverage(A));
    const long gain_b = static_cast<long>(coverage(Bx)) - static_cast<long>(coverage(B));
    CHECK(gain_b >= 0);
    CHECK(coverage(B) >= coverage(A));
    CHECK(gain_a >= gain_b);
    strict += gain_a > gain_b;
    ++triples;
  }
  CHECK(triples >= 200);
  MESSAGE("strictly diminishing triples: " << strict);
  CHECK(strict > 0);
}

TEST_CASE("surgery regions") {
  CHECK(classify_region(Vec3(0, 0, -60), 50, 6) == Region::free);
  CHECK(classify_region(Vec3(1, 1, -10), 50, 10) == Region::drill);
  CHECK(classify_region(Vec3(20, 0, -10), 50, 6) == Region::unsafe);
  CHECK(classify_region(Vec3(20, 0, -50), 50, 6) == Region::free);
  CHECK(classify_region(Vec3(0, 0, 0.1), 50, 6) == Region::unsafe);

  SurgeryConfig cfg;
  SurgeryEnv env(cfg, 1, 1);
  const Pose unsafe_a = Pose::translation(Vec3(20, 0, -10)), unsafe_b = Pose::translation(Vec3(19, 0, -9));
  CHECK(env.reward_for(unsafe_a, unsafe_b) == 0.0);
  const Metrics m = SurgeryEnv::surgery_metrics(Pose::translation(Vec3(3, 4, 12)), 1.0);
  CHECK(m.at("side_error_mm") == doctest::Approx(5.0));
  CHECK(m.at("insertion_error_mm") == doctest::Approx(12.0));
  CHECK(m.at("rotation_error_deg") == 0.0);
  const Metrics z = SurgeryEnv::surgery_metrics(Pose::identity(), 1.0);
  CHECK(z.at("side_error_mm") == 0.0);
  CHECK(z.at("insertion_error_mm") == 0.0);
}

TEST_CASE("region classifier partitions space") {
  CounterRng rng(8, 8);
  const double l = 50.0, d = 6.0;
  for (int i = 0; i < 100000; ++i) {
    Vec3 p(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-80, 20));
    // Put some points exactly on the region boundaries.
    if (i % 10 == 0) p.z() = -l;
    if (i % 10 == 1) p.z() = 0.0;
    if (i % 10 == 2) p = Vec3(d / 2, 0, p.z());
    const bool in_free = p.z() <= -l;
    const bool in_drill = p.z() > -l && p.z() <= 0.0 && std::hypot(p.x(), p.y()) <= d / 2;
    const bool in_unsafe = !in_free && !in_drill;
    REQUIRE(int(in_free) + int(in_drill) + int(in_unsafe) == 1);
    const Region r = classify_region(p, l, d);
    CHECK((r == Region::free) == in_free);
    CHECK((r == Region::drill) == in_drill);
    CHECK((r == Region::unsafe) == in_unsafe);
  }
}

TEST_CASE("surgery step: cost marks unsafe states and reward is zero there") {
  SurgeryConfig cfg;
  SurgeryEnv env(cfg, 4, 1);
  env.reset(seeds_for(4, 31));
  for (int i = 0; i < 4; ++i) {
    const Pose rel = env.drill_in_goal(i);
    CHECK(rel.position().z() >= cfg.init_depth[0]);
    CHECK(rel.position().z() <= cfg.init_depth[1]);
    CHECK(std::abs(rel.position().x()) <= cfg.init_lateral);
    // Observed pose is the drill in the probe frame.
    const Pose seen = relative_pose(env.probe(i), env.drill(i));
    const auto pose = env.poses().subspan(7 * i, 7);
    CHECK(std::abs(pose[0] - seen.position().x()) < 1e-12);
    CHECK(std::abs(pose[3] - seen.quaternion().w) < 1e-12);
  }
  std::vector<double> zero(24, 0.0);
  env.step(zero);
  for (int i = 0; i < 4; ++i) CHECK(env.rewards()[i] == 0.0);

  // Push every drill straight along the goal axis until it crosses z = -l
  // away from the corridor.
  int unsafe_steps = 0;
  for (int t = 0; t < 120; ++t) {
    std::vector<double> a(24, 0.0);
    for (int i = 0; i < 4; ++i) {
      const Vec3 dir = env.drill_in_goal(i).rotation().transpose() * Vec3::UnitZ();
      for (int k = 0; k < 3; ++k) a[6 * i + k] = dir[k];
    }
    std::vector<Region> before(4);
    for (int i = 0; i < 4; ++i) before[i] = classify_region(env.drill_in_goal(i).position(), cfg.skin_distance, cfg.drill_diameter);
    env.step(a);
    for (int i = 0; i < 4; ++i) {
      CHECK(env.costs()[i] == (before[i] == Region::unsafe ? 1.0 : 0.0));
      if (before[i] == Region::unsafe) {
        CHECK(env.rewards()[i] == 0.0);
        ++unsafe_steps;
      } else {
        CHECK(env.rewards()[i] != 0.0);
      }
    }
  }
  CHECK(unsafe_steps > 0);
  for (int i = 0; i < 4; ++i) CHECK(env.metrics(i).at("safe_ratio") < 1.0);
}

TEST_CASE("info JSON carries state and metrics") {
  for (Task task : {Task::nav, Task::recon, Task::surgery}) {
    auto env = make_env(default_config(task), 1);
    env->reset(std::vector<std::uint64_t>{4});
    const nlohmann::json j = env->info(0);
    CHECK(j.at("step") == 0);
    CHECK(j.at("state").size() == env->state(0).size());
    CHECK(j.at("metrics").is_object());
    CHECK_THROWS_AS(env->info(1), ConfigError);
  }
}
