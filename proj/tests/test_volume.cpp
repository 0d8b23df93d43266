#include "echosim/errors.hpp"
#include "echosim/phantom.hpp"
#include "echosim/volume.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cstring>
#include <fstream>
#include <set>

using namespace echosim;

namespace {

// Frozen at build time; a change means the phantom generator or the
// encoder changed and every recorded dataset is invalidated.
constexpr std::uint64_t kTorsoSeed0CtHash = 0x71eb2a2553e77b68ULL;
constexpr std::uint64_t kTorsoSeed0LabelHash = 0xebec518e8d8909dfULL;

std::vector<std::uint8_t> with_header(const std::string& header, std::size_t payload_bytes) {
  std::vector<std::uint8_t> b(header.begin(), header.end());
  b.push_back(0);
  b.resize(b.size() + payload_bytes, 0);
  return b;
}

// Independent trilinear reference: explicit weights per corner.
double reference_trilinear(const Volume& v, const Vec3& world, double background) {
  const GridGeometry& g = v.geometry;
  const Vec3 u = g.to_voxel(world);
  for (int a = 0; a < 3; ++a) {
    if (u[a] < -0.5 || u[a] > g.dims[a] - 0.5) return background;
  }
  double acc = 0.0;
  const int i0 = static_cast<int>(std::floor(u.x())), j0 = static_cast<int>(std::floor(u.y())),
            k0 = static_cast<int>(std::floor(u.z()));
  for (int dk = 0; dk < 2; ++dk) {
    for (int dj = 0; dj < 2; ++dj) {
      for (int di = 0; di < 2; ++di) {
        const double wx = di ? u.x() - i0 : 1.0 - (u.x() - i0);
        const double wy = dj ? u.y() - j0 : 1.0 - (u.y() - j0);
        const double wz = dk ? u.z() - k0 : 1.0 - (u.z() - k0);
        const int i = std::clamp(i0 + di, 0, g.dims[0] - 1);
        const int j = std::clamp(j0 + dj, 0, g.dims[1] - 1);
        const int k = std::clamp(k0 + dk, 0, g.dims[2] - 1);
        acc += wx * wy * wz * v.scalar_at(i, j, k);
      }
    }
  }
  return acc;
}

}  // namespace

TEST_CASE("svol round trip is byte exact") {
  GridGeometry g;
  g.dims = {2, 2, 2};
  g.spacing = Vec3(0.5, 1.0, 2.0);
  g.origin = Vec3(-1.0, 3.0, 7.25);
  Volume ct = Volume::make_ct(g);
  for (std::size_t i = 0; i < ct.scalars.size(); ++i) ct.scalars[i] = static_cast<float>(i) * 1.5f - 3.0f;
  const auto dir = testsupport::scratch_dir("svol");
  save_volume(ct, dir / "ct.svol");
  const Volume back = load_volume(dir / "ct.svol");
  CHECK(back.kind == VolumeKind::ct);
  CHECK(back.geometry.dims == g.dims);
  CHECK(back.geometry.spacing == g.spacing);
  CHECK(back.geometry.origin == g.origin);
  CHECK(back.scalars == ct.scalars);
  CHECK(encode_svol(back) == encode_svol(ct));

  for (ElemType e : {ElemType::u8, ElemType::u16}) {
    Volume lab = Volume::make_labels(g, 0, e);
    for (std::size_t i = 0; i < lab.labels.size(); ++i) lab.labels[i] = static_cast<Label>(i * (e == ElemType::u8 ? 7 : 999));
    const Volume lb = decode_svol(encode_svol(lab));
    CHECK(lb.is_label());
    CHECK(lb.elem == e);
    CHECK(lb.labels == lab.labels);
    CHECK(encode_svol(lb) == encode_svol(lab));
  }
}

TEST_CASE("svol decoding failures are distinct") {
  const std::string good = R"({"dims":[4,4,4],"elem":"f32","kind":"ct","origin_mm":[0,0,0],"spacing_mm":[1,1,1]})";
  CHECK_NOTHROW(decode_svol(with_header(good, 64 * 4)));
  // 63 elements for a 4^3 grid.
  CHECK_THROWS_AS(decode_svol(with_header(good, 63 * 4)), PayloadMismatchError);
  CHECK_THROWS_AS(decode_svol(with_header(good, 65 * 4)), PayloadMismatchError);
  CHECK_THROWS_AS(decode_svol(with_header("{not json", 4)), MalformedHeaderError);
  CHECK_THROWS_AS(decode_svol(with_header(R"({"dims":[4,4],"elem":"f32","kind":"ct","origin_mm":[0,0,0],"spacing_mm":[1,1,1]})", 64 * 4)),
                  MalformedHeaderError);
  CHECK_THROWS_AS(decode_svol(with_header(R"({"dims":[4,4,4],"elem":"f32","kind":"ct","origin_mm":[0,0,0],"spacing_mm":[1,0,1]})", 64 * 4)),
                  MalformedHeaderError);
  CHECK_THROWS_AS(decode_svol(with_header(R"({"dims":[4,4,4],"elem":"f64","kind":"ct","origin_mm":[0,0,0],"spacing_mm":[1,1,1]})", 64 * 8)),
                  UnsupportedElementError);
  CHECK_THROWS_AS(decode_svol(with_header(R"({"dims":[4,4,4],"elem":"f32","kind":"label","origin_mm":[0,0,0],"spacing_mm":[1,1,1]})", 64 * 4)),
                  UnsupportedElementError);
  const std::vector<std::uint8_t> no_nul(good.begin(), good.end());
  CHECK_THROWS_AS(decode_svol(no_nul), MalformedHeaderError);
  CHECK_THROWS_AS(load_volume(testsupport::scratch_dir("missing") / "nope.svol"), DataError);
}

TEST_CASE("trilinear sampling") {
  GridGeometry g;
  g.dims = {2, 1, 1};
  Volume v = Volume::make_ct(g);
  v.scalars = {0.0f, 10.0f};
  CHECK(sample_trilinear(v, Vec3(0.5, 0, 0)) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(sample_trilinear(v, Vec3(-0.4, 0, 0)) == doctest::Approx(0.0));
  CHECK(sample_trilinear(v, Vec3(1.4, 0, 0)) == doctest::Approx(10.0));
  CHECK(sample_trilinear(v, Vec3(1.6, 0, 0), -7.0) == -7.0);
  CHECK(sample_trilinear(v, Vec3(0.5, 0.6, 0), -7.0) == -7.0);

  GridGeometry g2;
  g2.dims = {7, 5, 6};
  g2.spacing = Vec3(0.7, 1.3, 0.9);
  g2.origin = Vec3(-2, 1, 4);
  Volume w = Volume::make_ct(g2);
  CounterRng rng(42, 0);
  for (float& s : w.scalars) s = static_cast<float>(rng.uniform(-500, 500));
  const Vec3 lo = g2.extent_min(), hi = g2.extent_max();
  for (int i = 0; i < 100; ++i) {
    const Vec3 p(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()), rng.uniform(lo.z(), hi.z()));
    CHECK(std::abs(sample_trilinear(w, p) - reference_trilinear(w, p, kDefaultBackgroundCt)) < 1e-5);
  }
}

TEST_CASE("label sampling breaks ties to the lower index") {
  GridGeometry g;
  g.dims = {2, 2, 1};
  Volume v = Volume::make_labels(g);
  v.labels = {1, 2, 3, 4};
  CHECK(sample_label(v, Vec3(0.5, 0, 0)) == 1);
  CHECK(sample_label(v, Vec3(0.51, 0, 0)) == 2);
  CHECK(sample_label(v, Vec3(0.5, 0.5, 0)) == 1);
  CHECK(sample_label(v, Vec3(1, 0.5, 0)) == 2);
  CHECK(sample_label(v, Vec3(1, 1, 0)) == 4);
  CHECK(sample_label(v, Vec3(5, 0, 0)) == kBackgroundLabel);
  CHECK(sample_label(v, Vec3(0, 0, -0.6)) == kBackgroundLabel);
  CHECK(nearest_index(0.5) == 0);
  CHECK(nearest_index(-0.5) == -1);
  CHECK(nearest_index(1.5) == 1);
}

TEST_CASE("landmarks round trip") {
  LandmarkSet lm;
  lm["a"] = Pose(Vec3(1, 2, 3), rot_z(0.3) * rot_x(-0.2));
  lm["b"] = Pose::translation(Vec3(-4, 0, 9.5));
  const auto dir = testsupport::scratch_dir("landmarks");
  save_landmarks(lm, dir / "lm.json");
  const LandmarkSet back = load_landmarks(dir / "lm.json");
  REQUIRE(back.size() == 2);
  CHECK(pose_distance_linf(back.at("a"), lm.at("a")) < 1e-12);
  CHECK(pose_distance_linf(back.at("b"), lm.at("b")) < 1e-12);
}

TEST_CASE("phantoms are deterministic in their seed") {
  const Phantom a = generate_phantom(PhantomKind::torso, 3);
  const Phantom b = generate_phantom(PhantomKind::torso, 3);
  CHECK(encode_svol(a.ct) == encode_svol(b.ct));
  CHECK(encode_svol(a.labels) == encode_svol(b.labels));
  const Phantom c = generate_phantom(PhantomKind::torso, 4);
  CHECK(payload_hash(c.ct) != payload_hash(a.ct));
}

TEST_CASE("torso payload hash is frozen") {
  const Phantom p = generate_phantom(PhantomKind::torso, 0);
  CHECK(payload_hash(p.ct) == kTorsoSeed0CtHash);
  CHECK(payload_hash(p.labels) == kTorsoSeed0LabelHash);
}

TEST_CASE("slab phantom holds two tissues over background") {
  const Phantom p = generate_phantom(PhantomKind::slab, 1);
  std::set<Label> seen(p.labels.labels.begin(), p.labels.labels.end());
  CHECK(seen == std::set<Label>{tissue::background, tissue::skin, tissue::muscle});
  CHECK(p.landmarks.count("surface_center") == 1);
}

TEST_CASE("torso vertebra voxel count matches the analytic volume") {
  const TorsoSpec spec;
  for (std::uint64_t seed : {0ULL, 1ULL, 2ULL}) {
    const Phantom p = generate_torso(spec, seed);
    const auto bone = std::count(p.labels.labels.begin(), p.labels.labels.end(), tissue::bone);
    const double expected = spec.vertebra_volume() / std::pow(spec.spacing, 3);
    CHECK(std::abs(bone - expected) <= 0.1 * expected);
    for (const char* name : {"vertebra", "goal", "skin_entry"}) CHECK(p.landmarks.count(name) == 1);
  }
}

TEST_CASE("phantom kind parsing") {
  CHECK(parse_phantom_kind("slab") == PhantomKind::slab);
  CHECK(parse_phantom_kind("torso") == PhantomKind::torso);
  CHECK_THROWS_AS(parse_phantom_kind("cube"), ConfigError);
}
