#pragma once

#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "crossgrasp/rotation.hpp"
#include "crossgrasp/urdf.hpp"

namespace crossgrasp {

using Jacobian = Eigen::Matrix<double, 6, Eigen::Dynamic>;

/// World pose of every link, indexed by link id. The root link sits at the
/// wrist pose; Other joints (prismatic, continuous) are held at zero.
std::vector<Eigen::Isometry3d> forward_kinematics(const HandModel& hand, const Eigen::VectorXd& q,
                                                  const WristPose& wrist = WristPose::identity());

/// Leaf links whose root path contains at least one revolute joint, ascending id.
std::vector<int> fingertip_links(const HandModel& hand);

/// Revolute joints on the path root -> tip, as articulation slots.
std::vector<int> finger_chain(const HandModel& hand, int tip);

/// Geometric Jacobian of the tip link origin in the wrist (root) frame.
/// Rows 0-2 translational, rows 3-5 rotational; one column per revolute
/// joint of the chain, ordered root to tip.
Jacobian fingertip_jacobian(const HandModel& hand, const Eigen::VectorXd& q, int tip);

struct KalWeights {
  Eigen::VectorXd w;  // one entry per revolute joint, mean 1
};

inline Vector6d default_kal_lambda() { return (Vector6d() << 1.0, 1.0, 1.0, 0.05, 0.05, 0.05).finished(); }

/// Kinematic-aware per-joint weights at the reference articulation q_star:
/// w_j = sum over fingertips whose chain holds j of sum_r lambda_r J[r, j]^2.
/// Joints on no fingertip chain take the mean of the computed weights.
/// Normalized to mean one.
KalWeights kal_weights(const HandModel& hand, const Eigen::VectorXd& q_star,
                       const Vector6d& lambda = default_kal_lambda());

/// Same rule, without the final normalization.
Eigen::VectorXd kal_weights_unnormalized(const HandModel& hand, const Eigen::VectorXd& q_star,
                                         const Vector6d& lambda = default_kal_lambda());

/// Clamps q to the revolute limits; `clamp_amount` receives |q - clamped| per joint.
Eigen::VectorXd clamp_to_limits(const HandModel& hand, const Eigen::VectorXd& q, Eigen::VectorXd* clamp_amount = nullptr);

}  // namespace crossgrasp
