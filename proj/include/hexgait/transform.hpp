#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace hexgait {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// 4x4 homogeneous rigid transform. Eigen stores the full matrix (bottom row included).
using Transform = Eigen::Isometry3d;

constexpr double kPi = std::numbers::pi;

inline Transform make_transform(const Vec3& translation, const Mat3& rotation = Mat3::Identity())
{
  Transform t = Transform::Identity();
  t.linear() = rotation;
  t.translation() = translation;
  return t;
}

inline Transform translation(double x, double y, double z)
{
  return make_transform(Vec3(x, y, z));
}

// Fixed-axis roll, pitch, yaw (R = Rz(yaw) * Ry(pitch) * Rx(roll)).
inline Mat3 rotation_rpy(double roll, double pitch, double yaw)
{
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

inline Transform pose_rpy(double x, double y, double z, double roll, double pitch, double yaw)
{
  return make_transform(Vec3(x, y, z), rotation_rpy(roll, pitch, yaw));
}

// Inverse of rotation_rpy; pitch in [-pi/2, pi/2].
inline Vec3 to_rpy(const Mat3& r)
{
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  return {roll, pitch, yaw};
}

// Orthonormal rotation block, det +1, bottom row (0,0,0,1).
inline bool is_rigid(const Transform& t, double tol = 1e-9)
{
  const Mat3 r = t.linear();
  if (!((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol)) return false;
  if (!(std::abs(r.determinant() - 1.0) <= tol)) return false;
  const Eigen::RowVector4d bottom = t.matrix().row(3);
  return bottom == Eigen::RowVector4d(0, 0, 0, 1) && t.matrix().allFinite();
}

// Smallest rotation taking `from` onto `to` (both non-zero).
inline Mat3 rotation_between(const Vec3& from, const Vec3& to)
{
  return Eigen::Quaterniond::FromTwoVectors(from, to).toRotationMatrix();
}

inline double wrap_angle(double a)
{
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0) a += 2.0 * kPi;
  return a - kPi;
}

}  // namespace hexgait
