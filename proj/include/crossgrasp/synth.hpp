#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crossgrasp/data.hpp"
#include "crossgrasp/gevaluate.hpp"

namespace crossgrasp {

/// Palm box with serial fingers spaced evenly on a circle around the wrist z
/// axis. Each finger is a chain of revolute joints (positive angles curl
/// towards the palm axis) ending in a fixed spherical tip.
struct HandSpec {
  std::string name = "synth_hand";
  int fingers = 3;
  int joints_per_finger = 3;
  std::vector<int> finger_joints;         // per-finger override of joints_per_finger
  std::vector<double> segment_lengths;    // per joint index along a finger; default 0.03 each
  double base_radius = 0.04;
  double segment_radius = 0.008;
  double tip_radius = 0.009;
  double lower = -0.2;
  double upper = 1.6;

  int joints_on_finger(int finger) const;
  double segment_length(int joint) const;
};

/// URDF text for the spec. Throws InvalidSpec.
std::string synth_hand_urdf(const HandSpec& spec);

enum class ShapeKind { Sphere, Box, Cylinder };

struct ObjectSpec {
  ShapeKind kind = ShapeKind::Sphere;
  Eigen::Vector3d size{0.03, 0.0, 0.0};  // sphere: radius; box: full extents; cylinder: (radius, length, 0)
  std::string id = "sphere";
};

/// `count` points sampled uniformly on the surface, centered at the origin.
Cloud sample_surface(const ObjectSpec& object, int count, DataRng& rng);

/// Random mix of spheres, boxes and cylinders at desk scale.
std::vector<ObjectSpec> random_objects(int count, DataRng& rng, const std::string& prefix = "obj");

struct SynthConfig {
  int points = 384;
  double palm_gap = 0.002;     // wrist placed this far from the object along the approach
  double contact_gap = 0.001;  // closing stops once a moving link is this close
  double scan_step = 0.02;     // rad
  int bisect_steps = 30;
  EvalConfig eval;
  std::uint64_t seed = 0;
};

/// Wrist whose palm faces `approach` (unit, world) with roll about it,
/// backed off so the closest point sits `gap` in front of the palm plane.
WristPose approach_wrist(const Cloud& cloud, const Eigen::Vector3d& approach, double roll, double gap);

/// Closes every finger root to tip: each joint sweeps from its lower limit
/// until one of the links it moves comes within `contact_gap` of the cloud
/// (bisection refines the stop), or reaches its upper limit.
Eigen::VectorXd close_hand(const HandModel& hand, const Cloud& cloud, const WristPose& wrist, const SynthConfig& cfg);

/// Samples objects round-robin from `objects`, random approach directions
/// and rolls, closes the hand and labels each grasp with the evaluator.
/// Throws NoFingertips.
std::vector<GraspSample> synth_grasps(const HandModel& hand, const std::string& hand_id,
                                      const std::vector<ObjectSpec>& objects, int count, const SynthConfig& cfg);

}  // namespace crossgrasp
