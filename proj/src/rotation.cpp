#include "crossgrasp/rotation.hpp"

#include <cmath>

#include "crossgrasp/errors.hpp"

namespace crossgrasp {

Eigen::Matrix3d matrix_from_r6(const Vector6d& r6) {
  const Eigen::Vector3d a1 = r6.head<3>();
  const Eigen::Vector3d a2 = r6.tail<3>();
  const double n1 = a1.norm();
  if (!(n1 > 1e-8)) fail(ErrorKind::DegenerateInput, "first 6D column has near-zero norm");
  const Eigen::Vector3d b1 = a1 / n1;
  Eigen::Vector3d u2 = a2 - b1.dot(a2) * b1;
  const double n2 = u2.norm();
  if (!(n2 > 1e-8 * std::max(1.0, a2.norm()))) fail(ErrorKind::DegenerateInput, "6D columns are parallel");
  const Eigen::Vector3d b2 = u2 / n2;
  Eigen::Matrix3d out;
  out.col(0) = b1;
  out.col(1) = b2;
  out.col(2) = b1.cross(b2);
  return out;
}

Vector6d r6_from_matrix(const Eigen::Matrix3d& rotation) {
  Vector6d out;
  out.head<3>() = rotation.col(0);
  out.tail<3>() = rotation.col(1);
  return out;
}

Eigen::Matrix3d rpy_to_matrix(const Eigen::Vector3d& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(rpy.y(), Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

Eigen::Vector3d matrix_to_rpy(const Eigen::Matrix3d& r) {
  const double pitch = std::atan2(-r(2, 0), std::hypot(r(0, 0), r(1, 0)));
  if (std::abs(std::cos(pitch)) < 1e-12) {
    // Gimbal lock: fold yaw into roll.
    return {std::atan2(-r(1, 2), r(1, 1)), pitch, 0.0};
  }
  return {std::atan2(r(2, 1), r(2, 2)), pitch, std::atan2(r(1, 0), r(0, 0))};
}

Eigen::Matrix3d euler_xyz_intrinsic(const Eigen::Vector3d& angles) {
  return (Eigen::AngleAxisd(angles.x(), Eigen::Vector3d::UnitX()) *
          Eigen::AngleAxisd(angles.y(), Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(angles.z(), Eigen::Vector3d::UnitZ()))
      .toRotationMatrix();
}

Eigen::Isometry3d WristPose::transform() const {
  Eigen::Isometry3d out = Eigen::Isometry3d::Identity();
  out.linear() = rotation();
  out.translation() = t;
  return out;
}

WristPose WristPose::from_transform(const Eigen::Isometry3d& transform) {
  WristPose out;
  out.t = transform.translation();
  out.r6 = r6_from_matrix(transform.linear());
  return out;
}

}  // namespace crossgrasp
