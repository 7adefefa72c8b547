#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "crossgrasp/errors.hpp"
#include "crossgrasp/kinematics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace crossgrasp;
using testing_support::load_fixture;

namespace {

Eigen::VectorXd random_q(const HandModel& hand, std::mt19937_64& rng) {
  Eigen::VectorXd q(hand.dof());
  for (int s = 0; s < hand.dof(); ++s) {
    const auto& j = hand.joints()[static_cast<std::size_t>(hand.revolute_joints()[static_cast<std::size_t>(s)])];
    q[s] = std::uniform_real_distribution<double>(j.lower, j.upper)(rng);
  }
  return q;
}

WristPose random_wrist(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  const Eigen::Quaterniond rot(n(rng), n(rng), n(rng), n(rng));
  Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
  T.linear() = rot.normalized().toRotationMatrix();
  T.translation() = Eigen::Vector3d(n(rng), n(rng), n(rng)) * 0.1;
  return WristPose::from_transform(T);
}

int link_id(const HandModel& hand, const char* name) { return *hand.find_link(name); }

}  // namespace

TEST(Rotation6D, CanonicalIsIdentity) {
  Vector6d r6;
  r6 << 1, 0, 0, 0, 1, 0;
  EXPECT_TRUE(matrix_from_r6(r6).isApprox(Eigen::Matrix3d::Identity(), 0.0));
}

TEST(Rotation6D, OrthonormalInputIsFixedPoint) {
  const Eigen::Matrix3d rz = oracle::rot_z(std::numbers::pi / 2);
  EXPECT_LT((matrix_from_r6(r6_from_matrix(rz)) - rz).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Rotation6D, GramSchmidtByHand) {
  Vector6d r6;
  r6 << 2, 0, 0, 0.1, 1, 0;
  const Eigen::Matrix3d m = matrix_from_r6(r6);
  EXPECT_NEAR((m.col(0) - Eigen::Vector3d(1, 0, 0)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((m.col(1) - Eigen::Vector3d(0, 1, 0)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((m.col(2) - Eigen::Vector3d(0, 0, 1)).norm(), 0.0, 1e-15);
}

TEST(Rotation6D, DegenerateInputs) {
  Vector6d zero_first;
  zero_first << 0, 0, 0, 0, 1, 0;
  EXPECT_ERROR_KIND(matrix_from_r6(zero_first), DegenerateInput);
  Vector6d parallel;
  parallel << 1, 2, 3, 2, 4, 6;
  EXPECT_ERROR_KIND(matrix_from_r6(parallel), DegenerateInput);
}

TEST(Rotation6D, RoundTripAndValidity) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  for (int i = 0; i < 200; ++i) {
    Vector6d r6;
    for (int k = 0; k < 6; ++k) r6[k] = n(rng);
    const Eigen::Matrix3d m = matrix_from_r6(r6);
    EXPECT_LT((m.transpose() * m - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(m.determinant(), 1.0, 1e-9);
    const Vector6d back = r6_from_matrix(m);
    EXPECT_EQ(back.head<3>(), m.col(0));
    EXPECT_EQ(back.tail<3>(), m.col(1));
    EXPECT_LT((matrix_from_r6(back) - m).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Rotation, RpyMatchesExplicitProduct) {
  const Eigen::Vector3d rpy(0.3, -0.7, 1.9);
  const Eigen::Matrix3d ref = oracle::rot_z(rpy.z()) * oracle::rot_y(rpy.y()) * oracle::rot_x(rpy.x());
  EXPECT_LT((rpy_to_matrix(rpy) - ref).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((rpy_to_matrix(matrix_to_rpy(ref)) - ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ForwardKinematics, ZeroArticulationComposesStaticOrigins) {
  const HandModel hand = load_fixture("planar_finger.urdf");
  const auto poses = forward_kinematics(hand, Eigen::VectorXd::Zero(2));
  EXPECT_LT((poses[static_cast<std::size_t>(link_id(hand, "tip"))].translation() - Eigen::Vector3d(0.2, 0, 0)).norm(), 1e-15);
  EXPECT_LT((poses[static_cast<std::size_t>(link_id(hand, "distal"))].translation() - Eigen::Vector3d(0.1, 0, 0)).norm(), 1e-15);
  EXPECT_TRUE(poses[static_cast<std::size_t>(link_id(hand, "base"))].isApprox(Eigen::Isometry3d::Identity()));
}

TEST(ForwardKinematics, QuarterTurnAboutZ) {
  const HandModel hand = load_fixture("single_joint.urdf");
  Eigen::VectorXd q(1);
  q << std::numbers::pi / 2;
  const auto poses = forward_kinematics(hand, q);
  EXPECT_LT((poses[static_cast<std::size_t>(link_id(hand, "tip"))].translation() - Eigen::Vector3d(0, 0.1, 0)).norm(), 1e-15);
}

TEST(ForwardKinematics, MatchesExplicitChainProduct) {
  std::mt19937_64 rng(11);
  for (const char* name : {"three_finger.urdf", "shadow_like.urdf", "camera_mount.urdf", "mixed_joints.urdf"}) {
    const HandModel hand = load_fixture(name);
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::VectorXd q = random_q(hand, rng);
      const WristPose wrist = random_wrist(rng);
      const auto poses = forward_kinematics(hand, q, wrist);
      for (const auto& link : hand.links()) {
        const Eigen::Matrix4d ref = oracle::chain_pose(hand, q, link.id, wrist.transform().matrix());
        EXPECT_LT((poses[static_cast<std::size_t>(link.id)].matrix() - ref).cwiseAbs().maxCoeff(), 1e-12)
            << name << " link " << link.name;
      }
    }
  }
}

TEST(ForwardKinematics, WristComposition) {
  const HandModel hand = load_fixture("three_finger.urdf");
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd q = random_q(hand, rng);
    const WristPose wrist = random_wrist(rng);
    const auto local = forward_kinematics(hand, q);
    const auto world = forward_kinematics(hand, q, wrist);
    for (std::size_t l = 0; l < local.size(); ++l)
      EXPECT_LT(((wrist.transform() * local[l]).matrix() - world[l].matrix()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ForwardKinematics, DimensionMismatch) {
  const HandModel hand = load_fixture("three_finger.urdf");
  EXPECT_ERROR_KIND(forward_kinematics(hand, Eigen::VectorXd::Zero(8)), DimensionMismatch);
}

TEST(Fingertips, ThreeFingerDistalLinks) {
  const HandModel hand = load_fixture("three_finger.urdf");
  const auto tips = fingertip_links(hand);
  ASSERT_EQ(tips.size(), 3u);
  for (int f = 0; f < 3; ++f)
    EXPECT_EQ(hand.links()[static_cast<std::size_t>(tips[static_cast<std::size_t>(f)])].name, "f" + std::to_string(f) + "_tip");
}

TEST(Fingertips, SingleChain) {
  const HandModel hand = load_fixture("planar_finger.urdf");
  EXPECT_EQ(fingertip_links(hand), std::vector<int>{link_id(hand, "tip")});
}

TEST(Fingertips, FixedOnlyBranchExcluded) {
  const HandModel hand = load_fixture("camera_mount.urdf");
  const auto tips = fingertip_links(hand);
  ASSERT_EQ(tips.size(), 2u);
  for (int t : tips) EXPECT_NE(hand.links()[static_cast<std::size_t>(t)].name, "camera");
}

TEST(Jacobian, PlanarAnalytic) {
  const HandModel hand = load_fixture("planar_finger.urdf");
  const Jacobian J = fingertip_jacobian(hand, Eigen::VectorXd::Zero(2), link_id(hand, "tip"));
  ASSERT_EQ(J.cols(), 2);
  EXPECT_LT((J.col(0).head<3>() - Eigen::Vector3d(0, 0.2, 0)).norm(), 1e-15);
  EXPECT_LT((J.col(1).head<3>() - Eigen::Vector3d(0, 0.1, 0)).norm(), 1e-15);
}

TEST(Jacobian, RotationalBlockIsWorldAxis) {
  const HandModel hand = load_fixture("shadow_like.urdf");
  std::mt19937_64 rng(8);
  const Eigen::VectorXd q = random_q(hand, rng);
  const auto poses = forward_kinematics(hand, q);
  for (int tip : fingertip_links(hand)) {
    const Jacobian J = fingertip_jacobian(hand, q, tip);
    const auto chain = finger_chain(hand, tip);
    for (std::size_t c = 0; c < chain.size(); ++c) {
      const int joint = hand.revolute_joints()[static_cast<std::size_t>(chain[c])];
      const auto& spec = hand.joints()[static_cast<std::size_t>(joint)];
      const Eigen::Vector3d axis = poses[static_cast<std::size_t>(spec.child_link)].linear() * spec.axis;
      EXPECT_LT((J.col(static_cast<Eigen::Index>(c)).tail<3>() - axis).norm(), 1e-12);
    }
  }
}

TEST(Jacobian, MatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  for (const char* name : {"three_finger.urdf", "shadow_like.urdf", "mixed_joints.urdf"}) {
    const HandModel hand = load_fixture(name);
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::VectorXd q = random_q(hand, rng);
      for (int tip : fingertip_links(hand)) {
        const Jacobian J = fingertip_jacobian(hand, q, tip);
        const Eigen::MatrixXd fd = oracle::fd_jacobian(hand, q, tip, finger_chain(hand, tip));
        EXPECT_LT(oracle::jacobian_rel_error(J, fd), 1e-5) << name;
      }
    }
  }
}

TEST(Jacobian, RejectsNonFingertip) {
  const HandModel hand = load_fixture("planar_finger.urdf");
  EXPECT_ERROR_KIND(fingertip_jacobian(hand, Eigen::VectorXd::Zero(2), link_id(hand, "proximal")), NotAFingertip);
}

TEST(KalWeights, SingleJoint) {
  const HandModel hand = load_fixture("single_joint.urdf");
  const Eigen::VectorXd raw = kal_weights_unnormalized(hand, Eigen::VectorXd::Zero(1));
  EXPECT_NEAR(raw[0], 1.0 * 0.1 * 0.1 + 0.05 * 1.0, 1e-15);
  EXPECT_NEAR(kal_weights(hand, Eigen::VectorXd::Zero(1)).w[0], 1.0, 1e-15);
}

TEST(KalWeights, PlanarTwoLink) {
  const HandModel hand = load_fixture("planar_finger.urdf");
  const Eigen::VectorXd raw = kal_weights_unnormalized(hand, Eigen::VectorXd::Zero(2));
  EXPECT_NEAR(raw[0], 0.09, 1e-15);
  EXPECT_NEAR(raw[1], 0.06, 1e-15);
  const Eigen::VectorXd w = kal_weights(hand, Eigen::VectorXd::Zero(2)).w;
  EXPECT_NEAR(w[0], 1.2, 1e-12);
  EXPECT_NEAR(w[1], 0.8, 1e-12);
}

TEST(KalWeights, MeanOneAndPositive) {
  std::mt19937_64 rng(4);
  for (const char* name : {"three_finger.urdf", "shadow_like.urdf", "two_finger.urdf", "camera_mount.urdf",
                           "mixed_joints.urdf", "planar_finger.urdf", "single_joint.urdf"}) {
    const HandModel hand = load_fixture(name);
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::VectorXd w = kal_weights(hand, random_q(hand, rng)).w;
      EXPECT_NEAR(w.mean(), 1.0, 1e-9) << name;
      EXPECT_GT(w.minCoeff(), 0.0) << name;
    }
  }
}

TEST(KalWeights, LambdaScaleInvariance) {
  const HandModel hand = load_fixture("three_finger.urdf");
  std::mt19937_64 rng(9);
  const Eigen::VectorXd q = random_q(hand, rng);
  const Eigen::VectorXd a = kal_weights(hand, q).w;
  const Eigen::VectorXd b = kal_weights(hand, q, 7.5 * default_kal_lambda()).w;
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(KalWeights, ProximalDominanceWhenStretched) {
  const HandModel hand = load_fixture("planar_finger.urdf");
  const Eigen::VectorXd w = kal_weights(hand, Eigen::VectorXd::Zero(2)).w;
  EXPECT_GE(w[0], w[1]);
  const HandModel synth = load_fixture("three_finger.urdf");
  const Eigen::VectorXd ws = kal_weights(synth, Eigen::VectorXd::Zero(synth.dof())).w;
  for (int f = 0; f < 3; ++f)
    for (int j = 0; j + 1 < 3; ++j) EXPECT_GE(ws[3 * f + j], ws[3 * f + j + 1]);
}

TEST(KalWeights, TwinFingersSymmetric) {
  const HandModel hand = load_fixture("two_finger.urdf");
  ASSERT_EQ(hand.dof(), 4);
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd q(4);
    const Eigen::VectorXd half = random_q(hand, rng).head(2);
    q << half, half;
    const Eigen::VectorXd w = kal_weights(hand, q, Vector6d::Ones()).w;
    EXPECT_NEAR(w[0], w[2], 1e-12);
    EXPECT_NEAR(w[1], w[3], 1e-12);
  }
}

TEST(KalWeights, NoFingertips) {
  const HandModel empty = parse_urdf(R"(<robot name="r"><link name="base"/></robot>)");
  EXPECT_ERROR_KIND(kal_weights(empty, Eigen::VectorXd::Zero(0)), NoFingertips);
}

TEST(Clamp, ReportsPerJointAmount) {
  const HandModel hand = load_fixture("planar_finger.urdf");
  Eigen::VectorXd q(2), amount;
  q << 2.0, -0.5;
  const Eigen::VectorXd c = clamp_to_limits(hand, q, &amount);
  EXPECT_DOUBLE_EQ(c[0], 1.57);
  EXPECT_DOUBLE_EQ(c[1], -0.5);
  EXPECT_NEAR(amount[0], 0.43, 1e-15);
  EXPECT_EQ(amount[1], 0.0);
}
