#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace crossgrasp {

using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Continuous 6D rotation representation: the first two columns of a
/// rotation matrix, stacked column-major as (c0, c1).
/// Gram-Schmidt on (c0, c1), third column from the cross product.
/// Throws DegenerateInput when c0 is near zero or c1 is parallel to c0.
Eigen::Matrix3d matrix_from_r6(const Vector6d& r6);
Vector6d r6_from_matrix(const Eigen::Matrix3d& rotation);

// URDF convention: fixed-axis roll about x, then pitch about y, then yaw
// about z, i.e. R = Rz(yaw) * Ry(pitch) * Rx(roll).
Eigen::Matrix3d rpy_to_matrix(const Eigen::Vector3d& rpy);
Eigen::Vector3d matrix_to_rpy(const Eigen::Matrix3d& rotation);

// Intrinsic XYZ Euler angles: R = Rx(a) * Ry(b) * Rz(c).
Eigen::Matrix3d euler_xyz_intrinsic(const Eigen::Vector3d& angles);

struct WristPose {
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  Vector6d r6 = (Vector6d() << 1, 0, 0, 0, 1, 0).finished();

  Eigen::Matrix3d rotation() const { return matrix_from_r6(r6); }
  Eigen::Isometry3d transform() const;

  static WristPose from_transform(const Eigen::Isometry3d& transform);
  static WristPose identity() { return {}; }
};

}  // namespace crossgrasp
