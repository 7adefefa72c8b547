#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Geometry>

#include "crossgrasp/data.hpp"
#include "crossgrasp/urdf.hpp"

namespace crossgrasp {

struct EvalConfig {
  double contact_eps = 0.005;      // m
  double penetration_tol = 0.003;  // m
  double mu = 0.5;
  int friction_edges = 8;
  int directions = 256;
  int normal_neighbors = 12;
  std::uint64_t seed = 0;
};

/// A link primitive placed in the world by forward kinematics.
struct PosedPrimitive {
  int link = -1;
  LinkPrimitive primitive;
  Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();  // primitive frame in world
};

std::vector<PosedPrimitive> posed_primitives(const HandModel& hand, const Eigen::VectorXd& q, const WristPose& wrist);

/// Signed distance from p to the primitive surface (negative inside).
/// Cylinders run along their local z axis. Dummy primitives are infinitely far.
double signed_distance(const PosedPrimitive& prim, const Eigen::Vector3d& p);

/// Per-point normals from k-nearest-neighbour plane fits, flipped to point
/// away from the cloud centroid.
Cloud estimate_normals(const Cloud& cloud, int k = 12);

struct Contact {
  Eigen::Vector3d point;
  Eigen::Vector3d normal;  // object outward
  int link = -1;
  double distance = 0.0;   // signed distance to the link surface
};

/// Every cloud point within eps of a hand primitive, attributed to the closest one.
std::vector<Contact> contact_points(const std::vector<PosedPrimitive>& prims, const Cloud& cloud, const Cloud& normals,
                                    double eps);
std::vector<Contact> contact_points(const HandModel& hand, const Eigen::VectorXd& q, const WristPose& wrist,
                                    const Cloud& cloud, double eps = 0.005, int normal_neighbors = 12);

/// One contact per link: the point of that link's cluster nearest to its surface.
std::vector<Contact> cluster_contacts(const std::vector<Contact>& contacts);

/// min over sampled unit wrench directions u of max over friction-cone
/// wrenches w of <w, u>. Directions and tangent bases are expressed in
/// `frame`, so the margin is invariant when the scene and frame rotate
/// together. Torques are about `center`, scaled by the mean contact radius.
double force_closure_margin(const std::vector<Contact>& contacts, double mu, int edges, int directions,
                            std::uint64_t seed, const Eigen::Vector3d& center,
                            const Eigen::Matrix3d& frame = Eigen::Matrix3d::Identity());

struct GraspVerdict {
  bool stable = false;
  double fc_margin = 0.0;
  double penetration = 0.0;  // deepest cloud point inside the hand, m (0 when none)
  int contact_count = 0;     // links in contact
};

/// Deepest penetration of cloud points into hand primitives (>= 0).
double max_penetration(const std::vector<PosedPrimitive>& prims, const Cloud& cloud);

GraspVerdict evaluate_grasp(const HandModel& hand, const Eigen::VectorXd& q, const WristPose& wrist, const Cloud& cloud,
                            const EvalConfig& cfg = {});

}  // namespace crossgrasp
