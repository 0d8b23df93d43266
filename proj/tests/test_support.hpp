#pragma once

#include "echosim/geometry.hpp"
#include "echosim/rng.hpp"

#include <cmath>
#include <filesystem>
#include <string>

namespace testsupport {

using echosim::Mat3;
using echosim::Pose;
using echosim::Vec3;

/// Uniform random rotation (Shoemake).
inline Mat3 random_rotation(echosim::CounterRng& rng) {
  const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  echosim::Quaternion q;
  q.w = a * std::sin(2 * M_PI * u2);
  q.x = a * std::cos(2 * M_PI * u2);
  q.y = b * std::sin(2 * M_PI * u3);
  q.z = b * std::cos(2 * M_PI * u3);
  return q.to_rotation();
}

inline Pose random_pose(echosim::CounterRng& rng, double extent = 100.0) {
  return {Vec3(rng.uniform(-extent, extent), rng.uniform(-extent, extent), rng.uniform(-extent, extent)),
          random_rotation(rng)};
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const std::filesystem::path p = std::filesystem::path(ECHOSIM_TEST_TMP) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testsupport
