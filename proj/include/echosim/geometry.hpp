#pragma once

// Rigid-body pose algebra and rotation representations.
//
// Frame conventions used throughout the library:
//   world  right-handed, patient prone, dorsal surface facing +z,
//          +x patient left -> right, +y head -> feet (frontal plane = x-y).
//   probe  origin at the skin contact point, +z into the body (imaging
//          direction), +x along the image width, +y along the elevation.
//          Image rows grow along +z.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>

namespace echosim {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Unit quaternion, stored (w, x, y, z) and canonicalized to w >= 0.
struct Quaternion {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  static Quaternion from_rotation(const Mat3& R);
  Mat3 to_rotation() const;
  double norm() const;
  std::array<double, 4> wxyz() const { return {w, x, y, z}; }
};

/// Rotation vector: direction is the axis, magnitude the angle in [0, pi].
///
/// At exactly pi the axis sign is ambiguous; angle_axis_of picks the axis
/// from the largest diagonal entry of (R + I) / 2 and orients it so that its
/// largest-magnitude component is positive.
Vec3 angle_axis_of(const Mat3& R);
Mat3 rotation_of(const Vec3& angle_axis);

Mat3 rot_x(double angle);
Mat3 rot_y(double angle);
Mat3 rot_z(double angle);

/// Minimal rotation taking unit vector `from` onto unit vector `to`.
Mat3 rotation_between(const Vec3& from, const Vec3& to);

/// Angle between two directions in radians, robust near 0 and pi.
double angle_between(const Vec3& a, const Vec3& b);

class Pose {
 public:
  Pose() : position_(Vec3::Zero()), rotation_(Mat3::Identity()) {}
  Pose(const Vec3& position, const Mat3& rotation) : position_(position), rotation_(rotation) {}

  static Pose identity() { return {}; }
  static Pose translation(const Vec3& t) { return {t, Mat3::Identity()}; }
  static Pose from_quaternion(const Vec3& position, const Quaternion& q) {
    return {position, q.to_rotation()};
  }

  const Vec3& position() const { return position_; }
  const Mat3& rotation() const { return rotation_; }
  Vec3 axis_x() const { return rotation_.col(0); }
  Vec3 axis_y() const { return rotation_.col(1); }
  Vec3 axis_z() const { return rotation_.col(2); }

  Pose inverse() const;
  Vec3 apply(const Vec3& p) const { return rotation_ * p + position_; }
  Vec3 apply_inverse(const Vec3& p) const { return rotation_.transpose() * (p - position_); }

  Quaternion quaternion() const { return Quaternion::from_rotation(rotation_); }
  Vec3 angle_axis() const { return angle_axis_of(rotation_); }

  /// Max deviation of R*R^T from I and of det(R) from 1.
  double orthonormality_error() const;

 private:
  Vec3 position_;
  Mat3 rotation_;
};

/// a o b: apply b first, then a.
Pose compose(const Pose& a, const Pose& b);
Pose invert(const Pose& p);

/// b expressed in the frame of a, i.e. invert(a) o b.
Pose relative_pose(const Pose& a, const Pose& b);

inline Pose operator*(const Pose& a, const Pose& b) { return compose(a, b); }

/// Max absolute difference over position and rotation entries.
double pose_distance_linf(const Pose& a, const Pose& b);

}  // namespace echosim
