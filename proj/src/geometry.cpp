#include "echosim/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace echosim {

namespace {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

int largest_abs_index(const Vec3& v) {
  int idx = 0;
  for (int i = 1; i < 3; ++i) {
    if (std::abs(v[i]) > std::abs(v[idx])) idx = i;
  }
  return idx;
}

}  // namespace

Quaternion Quaternion::from_rotation(const Mat3& R) {
  // Shepperd's method: branch on the largest of (trace, diagonal entries).
  Quaternion q;
  const double tr = R.trace();
  if (tr > R(0, 0) && tr > R(1, 1) && tr > R(2, 2)) {
    const double s = std::sqrt(1.0 + tr) * 2.0;
    q.w = 0.25 * s;
    q.x = (R(2, 1) - R(1, 2)) / s;
    q.y = (R(0, 2) - R(2, 0)) / s;
    q.z = (R(1, 0) - R(0, 1)) / s;
  } else if (R(0, 0) > R(1, 1) && R(0, 0) > R(2, 2)) {
    const double s = std::sqrt(1.0 + R(0, 0) - R(1, 1) - R(2, 2)) * 2.0;
    q.w = (R(2, 1) - R(1, 2)) / s;
    q.x = 0.25 * s;
    q.y = (R(0, 1) + R(1, 0)) / s;
    q.z = (R(0, 2) + R(2, 0)) / s;
  } else if (R(1, 1) > R(2, 2)) {
    const double s = std::sqrt(1.0 + R(1, 1) - R(0, 0) - R(2, 2)) * 2.0;
    q.w = (R(0, 2) - R(2, 0)) / s;
    q.x = (R(0, 1) + R(1, 0)) / s;
    q.y = 0.25 * s;
    q.z = (R(1, 2) + R(2, 1)) / s;
  } else {
    const double s = std::sqrt(1.0 + R(2, 2) - R(0, 0) - R(1, 1)) * 2.0;
    q.w = (R(1, 0) - R(0, 1)) / s;
    q.x = (R(0, 2) + R(2, 0)) / s;
    q.y = (R(1, 2) + R(2, 1)) / s;
    q.z = 0.25 * s;
  }
  const double n = q.norm();
  q.w /= n;
  q.x /= n;
  q.y /= n;
  q.z /= n;
  bool flip = q.w < 0.0;
  if (q.w == 0.0) {
    const Vec3 v(q.x, q.y, q.z);
    flip = v[largest_abs_index(v)] < 0.0;
  }
  if (flip) {
    q.w = -q.w;
    q.x = -q.x;
    q.y = -q.y;
    q.z = -q.z;
  }
  return q;
}

Mat3 Quaternion::to_rotation() const {
  const double n = norm();
  const double qw = w / n, qx = x / n, qy = y / n, qz = z / n;
  Mat3 R;
  R << 1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - qz * qw), 2 * (qx * qz + qy * qw),
       2 * (qx * qy + qz * qw), 1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - qx * qw),
       2 * (qx * qz - qy * qw), 2 * (qy * qz + qx * qw), 1 - 2 * (qx * qx + qy * qy);
  return R;
}

double Quaternion::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Vec3 angle_axis_of(const Mat3& R) {
  const Vec3 w(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  const double sin_theta = 0.5 * w.norm();
  const double cos_theta = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  const double theta = std::atan2(sin_theta, cos_theta);

  if (theta < 1e-6) {
    return 0.5 * w * (1.0 + theta * theta / 6.0);
  }
  if (theta < M_PI - 1e-3) {
    return (theta / (2.0 * sin_theta)) * w;
  }

  // Near pi: recover the axis from the symmetric part, a*a^T = (S - c I) / (1 - c).
  const Mat3 S = 0.5 * (R + R.transpose());
  const Mat3 aat = (S - cos_theta * Mat3::Identity()) / (1.0 - cos_theta);
  int i = 0;
  for (int k = 1; k < 3; ++k) {
    if (aat(k, k) > aat(i, i)) i = k;
  }
  Vec3 axis = aat.col(i) / std::sqrt(std::max(aat(i, i), 1e-300));
  axis.normalize();
  if (sin_theta > 1e-9) {
    if (axis.dot(w) < 0.0) axis = -axis;
  } else if (axis[largest_abs_index(axis)] < 0.0) {
    axis = -axis;
  }
  return theta * axis;
}

Mat3 rotation_of(const Vec3& v) {
  const double theta = v.norm();
  const Mat3 K = skew(v);
  if (theta < 1e-8) {
    return Mat3::Identity() + K + 0.5 * K * K;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * K + b * K * K;
}

Mat3 rot_x(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 R;
  R << 1, 0, 0, 0, c, -s, 0, s, c;
  return R;
}

Mat3 rot_y(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 R;
  R << c, 0, s, 0, 1, 0, -s, 0, c;
  return R;
}

Mat3 rot_z(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 R;
  R << c, -s, 0, s, c, 0, 0, 0, 1;
  return R;
}

Mat3 rotation_between(const Vec3& from, const Vec3& to) {
  const Vec3 a = from.normalized();
  const Vec3 b = to.normalized();
  const Vec3 v = a.cross(b);
  const double c = a.dot(b);
  if (c > -1.0 + 1e-12) {
    const Mat3 K = skew(v);
    return Mat3::Identity() + K + K * K / (1.0 + c);
  }
  // Antiparallel: half turn about any axis perpendicular to `a`.
  Vec3 perp = a.cross(Vec3::UnitX());
  if (perp.norm() < 1e-6) perp = a.cross(Vec3::UnitY());
  return rotation_of(M_PI * perp.normalized());
}

double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

Pose Pose::inverse() const {
  const Mat3 Rt = rotation_.transpose();
  return {-(Rt * position_), Rt};
}

double Pose::orthonormality_error() const {
  const double ortho = (rotation_ * rotation_.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
  return std::max(ortho, std::abs(rotation_.determinant() - 1.0));
}

Pose compose(const Pose& a, const Pose& b) {
  return {a.rotation() * b.position() + a.position(), a.rotation() * b.rotation()};
}

Pose invert(const Pose& p) { return p.inverse(); }

Pose relative_pose(const Pose& a, const Pose& b) {
  const Mat3 Rt = a.rotation().transpose();
  return {Rt * (b.position() - a.position()), Rt * b.rotation()};
}

double pose_distance_linf(const Pose& a, const Pose& b) {
  const double dp = (a.position() - b.position()).cwiseAbs().maxCoeff();
  const double dr = (a.rotation() - b.rotation()).cwiseAbs().maxCoeff();
  return std::max(dp, dr);
}

}  // namespace echosim
