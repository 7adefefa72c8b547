#include "crossgrasp/kinematics.hpp"

#include <algorithm>

#include "crossgrasp/errors.hpp"

namespace crossgrasp {

namespace {

void check_dof(const HandModel& hand, const Eigen::VectorXd& q) {
  if (q.size() != hand.dof()) {
    fail(ErrorKind::DimensionMismatch,
         "articulation has " + std::to_string(q.size()) + " entries, hand has " + std::to_string(hand.dof()));
  }
}

Eigen::Isometry3d joint_transform(const HandModel& hand, int j, const Eigen::VectorXd& q) {
  const JointSpec& joint = hand.joints()[j];
  Eigen::Isometry3d out = joint.origin.transform();
  const int slot = hand.revolute_slot(j);
  if (slot >= 0) out.rotate(Eigen::AngleAxisd(q[slot], joint.axis));
  return out;
}

}  // namespace

std::vector<Eigen::Isometry3d> forward_kinematics(const HandModel& hand, const Eigen::VectorXd& q,
                                                  const WristPose& wrist) {
  check_dof(hand, q);
  std::vector<Eigen::Isometry3d> poses(hand.links().size(), Eigen::Isometry3d::Identity());
  poses[hand.root_link()] = wrist.transform();
  // Joints may appear before their parent's own parent joint in document
  // order, so walk the tree from the root.
  std::vector<int> stack{hand.root_link()};
  while (!stack.empty()) {
    const int link = stack.back();
    stack.pop_back();
    for (int j : hand.child_joints(link)) {
      const int child = hand.joints()[j].child_link;
      poses[child] = poses[link] * joint_transform(hand, j, q);
      stack.push_back(child);
    }
  }
  return poses;
}

std::vector<int> fingertip_links(const HandModel& hand) {
  std::vector<int> tips;
  for (const Link& link : hand.links()) {
    if (!hand.child_joints(link.id).empty()) continue;
    if (!finger_chain(hand, link.id).empty()) tips.push_back(link.id);
  }
  return tips;
}

std::vector<int> finger_chain(const HandModel& hand, int tip) {
  std::vector<int> slots;
  for (int j : hand.path_to(tip)) {
    if (hand.revolute_slot(j) >= 0) slots.push_back(hand.revolute_slot(j));
  }
  return slots;
}

Jacobian fingertip_jacobian(const HandModel& hand, const Eigen::VectorXd& q, int tip) {
  const auto tips = fingertip_links(hand);
  if (tip < 0 || tip >= static_cast<int>(hand.links().size()) || std::find(tips.begin(), tips.end(), tip) == tips.end()) {
    fail(ErrorKind::NotAFingertip, "link " + std::to_string(tip) + " is not a fingertip");
  }
  const auto poses = forward_kinematics(hand, q);
  const Eigen::Vector3d p_tip = poses[tip].translation();

  std::vector<int> chain_joints;
  for (int j : hand.path_to(tip)) {
    if (hand.revolute_slot(j) >= 0) chain_joints.push_back(j);
  }
  Jacobian jac(6, static_cast<int>(chain_joints.size()));
  for (int c = 0; c < static_cast<int>(chain_joints.size()); ++c) {
    const JointSpec& joint = hand.joints()[chain_joints[c]];
    // The joint frame coincides with the child link frame; the axis is
    // expressed there.
    const Eigen::Isometry3d& frame = poses[joint.child_link];
    const Eigen::Vector3d z = frame.linear() * joint.axis;
    jac.block<3, 1>(0, c) = z.cross(p_tip - frame.translation());
    jac.block<3, 1>(3, c) = z;
  }
  return jac;
}

Eigen::VectorXd kal_weights_unnormalized(const HandModel& hand, const Eigen::VectorXd& q_star, const Vector6d& lambda) {
  check_dof(hand, q_star);
  const auto tips = fingertip_links(hand);
  if (tips.empty()) fail(ErrorKind::NoFingertips, "hand '" + hand.name() + "' has no fingertip links");

  const int d = hand.dof();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  std::vector<bool> covered(d, false);
  for (int tip : tips) {
    const Jacobian jac = fingertip_jacobian(hand, q_star, tip);
    const auto chain = finger_chain(hand, tip);
    for (int c = 0; c < static_cast<int>(chain.size()); ++c) {
      double sum = 0.0;
      for (int r = 0; r < 6; ++r) sum += lambda[r] * jac(r, c) * jac(r, c);
      w[chain[c]] += sum;
      covered[chain[c]] = true;
    }
  }

  double total = 0.0;
  int n_covered = 0;
  for (int j = 0; j < d; ++j) {
    if (covered[j]) {
      total += w[j];
      ++n_covered;
    }
  }
  const double fill = total / n_covered;
  for (int j = 0; j < d; ++j) {
    if (!covered[j]) w[j] = fill;
  }
  return w;
}

KalWeights kal_weights(const HandModel& hand, const Eigen::VectorXd& q_star, const Vector6d& lambda) {
  Eigen::VectorXd w = kal_weights_unnormalized(hand, q_star, lambda);
  const double mean = w.mean();
  if (!(mean > 0.0)) fail(ErrorKind::DegenerateInput, "all kinematic weights are zero");
  return {w / mean};
}

Eigen::VectorXd clamp_to_limits(const HandModel& hand, const Eigen::VectorXd& q, Eigen::VectorXd* clamp_amount) {
  check_dof(hand, q);
  Eigen::VectorXd out = q;
  for (int s = 0; s < hand.dof(); ++s) {
    const JointSpec& joint = hand.joints()[hand.revolute_joints()[s]];
    out[s] = std::clamp(q[s], joint.lower, joint.upper);
  }
  if (clamp_amount) *clamp_amount = (q - out).cwiseAbs();
  return out;
}

}  // namespace crossgrasp
