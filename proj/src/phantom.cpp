#include "echosim/phantom.hpp"

#include "echosim/errors.hpp"
#include "echosim/rng.hpp"

#include <cmath>
#include <limits>

namespace echosim {

namespace {

enum Stream : std::uint64_t { kTissueDraw = 1, kTexture = 2, kVertebraDraw = 3 };

struct TissueValues {
  double skin, fat, muscle, bone;
};

TissueValues draw_tissues(std::uint64_t seed, const TissueIntensityRanges& r) {
  CounterRng rng(seed, kTissueDraw);
  TissueValues v{};
  v.skin = rng.uniform(r.skin[0], r.skin[1]);
  v.fat = rng.uniform(r.fat[0], r.fat[1]);
  v.muscle = rng.uniform(r.muscle[0], r.muscle[1]);
  v.bone = rng.uniform(r.bone[0], r.bone[1]);
  return v;
}

float tissue_ct(Label l, const TissueValues& v, const TissueIntensityRanges& r, std::uint64_t seed,
                std::size_t voxel) {
  double base = r.air;
  switch (l) {
    case tissue::skin: base = v.skin; break;
    case tissue::fat: base = v.fat; break;
    case tissue::muscle: base = v.muscle; break;
    case tissue::bone: base = v.bone; break;
    default: return static_cast<float>(r.air);
  }
  return static_cast<float>(base + r.texture_sigma * normal_at(seed, kTexture, voxel));
}

GridGeometry grid_for(const Vec3& lo, const Vec3& hi, double spacing) {
  GridGeometry g;
  for (int a = 0; a < 3; ++a) g.dims[a] = static_cast<int>(std::floor((hi[a] - lo[a]) / spacing + 1e-9)) + 1;
  g.spacing = Vec3::Constant(spacing);
  g.origin = lo;
  return g;
}

}  // namespace

PhantomKind parse_phantom_kind(const std::string& name) {
  if (name == "slab") return PhantomKind::slab;
  if (name == "torso") return PhantomKind::torso;
  throw ConfigError("unknown phantom kind '" + name + "' (expected slab or torso)");
}

const char* to_string(PhantomKind kind) { return kind == PhantomKind::slab ? "slab" : "torso"; }

double TorsoSpec::vertebra_volume() const {
  const double body = M_PI * body_radius * body_radius * body_length;
  const double lamina = (2 * lamina_half_width) * (2 * lamina_half_length) * lamina_thickness;
  const double process = (2 * process_half_width) * (2 * process_half_length) * process_height;
  return body + lamina + process;
}

bool TorsoSpec::inside_vertebra(const Vec3& q) const {
  if (std::abs(q.y()) <= 0.5 * body_length && q.x() * q.x() + q.z() * q.z() <= body_radius * body_radius) {
    return true;
  }
  const double lamina_top = body_radius + lamina_thickness;
  if (std::abs(q.x()) <= lamina_half_width && std::abs(q.y()) <= lamina_half_length && q.z() >= body_radius &&
      q.z() <= lamina_top) {
    return true;
  }
  return std::abs(q.x()) <= process_half_width && std::abs(q.y()) <= process_half_length && q.z() >= lamina_top &&
         q.z() <= lamina_top + process_height;
}

double TorsoSpec::surface_z(double x, double y) const {
  const Vec3& s = body_semi_axes;
  const double t = 1.0 - (x * x) / (s.x() * s.x()) - (y * y) / (s.y() * s.y());
  if (t < 0.0) return std::numeric_limits<double>::quiet_NaN();
  return s.z() * std::sqrt(t);
}

Phantom generate_slab(const SlabSpec& spec, std::uint64_t seed) {
  const TissueIntensityRanges ranges;
  const TissueValues tv = draw_tissues(seed, ranges);
  const Vec3 lo(-spec.half_extent + 0.5 * spec.spacing, -spec.half_extent + 0.5 * spec.spacing, 0.0);
  const Vec3 hi(spec.half_extent - 0.5 * spec.spacing, spec.half_extent - 0.5 * spec.spacing, spec.top_z + 20.0);
  const GridGeometry g = grid_for(lo, hi, spec.spacing);

  Phantom p;
  p.ct = Volume::make_ct(g, static_cast<float>(ranges.air));
  p.labels = Volume::make_labels(g);
  for (int k = 0; k < g.dims[2]; ++k) {
    const double z = g.origin.z() + k * g.spacing.z();
    Label l = tissue::background;
    if (z <= spec.top_z + 1e-9) l = z > spec.top_z - spec.skin_thickness + 1e-9 ? tissue::skin : tissue::muscle;
    for (int j = 0; j < g.dims[1]; ++j) {
      for (int i = 0; i < g.dims[0]; ++i) {
        const std::size_t idx = g.index(i, j, k);
        p.labels.labels[idx] = l;
        p.ct.scalars[idx] = tissue_ct(l, tv, ranges, seed, idx);
      }
    }
  }
  p.landmarks["surface_center"] = Pose::translation(Vec3(0.0, 0.0, spec.top_z));
  p.id = "slab:" + std::to_string(seed);
  return p;
}

Phantom generate_torso(const TorsoSpec& spec, std::uint64_t seed) {
  const TissueIntensityRanges ranges;
  const TissueValues tv = draw_tissues(seed, ranges);
  const GridGeometry g = grid_for(spec.extent_min, spec.extent_max, spec.spacing);

  CounterRng vr(seed, kVertebraDraw);
  const double vx = vr.uniform(-spec.vertebra_offset_range, spec.vertebra_offset_range);
  const double vy = vr.uniform(-spec.vertebra_offset_range, spec.vertebra_offset_range);
  const double yaw = vr.uniform(-spec.vertebra_yaw_range, spec.vertebra_yaw_range);
  const Pose vertebra(Vec3(vx, vy, spec.vertebra_depth_z), rot_z(yaw));
  const Pose to_local = vertebra.inverse();

  const Vec3 outer = spec.body_semi_axes;
  const Vec3 inner_skin = outer - Vec3::Constant(spec.skin_thickness);
  const Vec3 inner_fat = inner_skin - Vec3::Constant(spec.fat_thickness);
  auto level = [](const Vec3& p, const Vec3& axes) { return p.cwiseQuotient(axes).squaredNorm(); };

  Phantom p;
  p.ct = Volume::make_ct(g, static_cast<float>(ranges.air));
  p.labels = Volume::make_labels(g);
  for (int k = 0; k < g.dims[2]; ++k) {
    for (int j = 0; j < g.dims[1]; ++j) {
      for (int i = 0; i < g.dims[0]; ++i) {
        const Vec3 w = g.voxel_center(i, j, k);
        Label l = tissue::background;
        if (level(w, outer) <= 1.0) {
          if (level(w, inner_skin) > 1.0) {
            l = tissue::skin;
          } else if (level(w, inner_fat) > 1.0) {
            l = tissue::fat;
          } else {
            l = spec.inside_vertebra(to_local.apply(w)) ? tissue::bone : tissue::muscle;
          }
        }
        const std::size_t idx = g.index(i, j, k);
        p.labels.labels[idx] = l;
        p.ct.scalars[idx] = tissue_ct(l, tv, ranges, seed, idx);
      }
    }
  }

  // Drill plan: entry on the analytic skin, tilted medially within the
  // vertebra's x-z plane.
  const Mat3& Rv = vertebra.rotation();
  const Vec3 entry_xy = vertebra.apply(Vec3(spec.entry_offset_x, 0.0, 0.0));
  const Vec3 entry(entry_xy.x(), entry_xy.y(), spec.surface_z(entry_xy.x(), entry_xy.y()));
  const Vec3 dir = Rv * Vec3(-std::sin(spec.entry_tilt), 0.0, -std::cos(spec.entry_tilt));
  const Vec3 gy = Rv * Vec3::UnitY();
  Mat3 Rg;
  Rg.col(2) = dir;
  Rg.col(1) = gy;
  Rg.col(0) = gy.cross(dir);
  const Pose goal(entry + spec.trajectory_length * dir, Rg);

  p.landmarks["vertebra"] = vertebra;
  p.landmarks["goal"] = goal;
  p.landmarks["skin_entry"] = compose(goal, Pose::translation(Vec3(0.0, 0.0, -spec.trajectory_length)));
  p.id = "torso:" + std::to_string(seed);
  return p;
}

Phantom generate_phantom(PhantomKind kind, std::uint64_t seed) {
  switch (kind) {
    case PhantomKind::slab: return generate_slab(SlabSpec{}, seed);
    case PhantomKind::torso: return generate_torso(TorsoSpec{}, seed);
  }
  throw ConfigError("unknown phantom kind");
}

}  // namespace echosim
