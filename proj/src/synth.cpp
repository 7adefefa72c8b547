#include "crossgrasp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include "crossgrasp/errors.hpp"
#include "crossgrasp/kinematics.hpp"

namespace crossgrasp {

int HandSpec::joints_on_finger(int finger) const {
  if (!finger_joints.empty()) return finger_joints.at(static_cast<std::size_t>(finger));
  return joints_per_finger;
}

double HandSpec::segment_length(int joint) const {
  if (joint < static_cast<int>(segment_lengths.size())) return segment_lengths[static_cast<std::size_t>(joint)];
  return 0.03;
}

std::string synth_hand_urdf(const HandSpec& spec) {
  if (spec.fingers < 1) fail(ErrorKind::InvalidSpec, "a synthetic hand needs at least one finger");
  if (!spec.finger_joints.empty() && static_cast<int>(spec.finger_joints.size()) != spec.fingers) {
    fail(ErrorKind::InvalidSpec, "finger_joints must list one count per finger");
  }
  for (int f = 0; f < spec.fingers; ++f) {
    if (spec.joints_on_finger(f) < 1) fail(ErrorKind::InvalidSpec, "every finger needs at least one joint");
    for (int j = 0; j < spec.joints_on_finger(f); ++j) {
      if (!(spec.segment_length(j) > 0)) fail(ErrorKind::InvalidSpec, "segment lengths must be positive");
    }
  }
  if (!(spec.base_radius > 0 && spec.segment_radius > 0 && spec.tip_radius > 0 && spec.lower <= spec.upper)) {
    fail(ErrorKind::InvalidSpec, "radii must be positive and lower <= upper");
  }

  std::ostringstream out;
  out << std::setprecision(12);
  const double palm = 2.0 * (spec.base_radius + 0.01);
  out << "<?xml version=\"1.0\"?>\n<robot name=\"" << spec.name << "\">\n";
  out << "  <link name=\"palm\">\n    <collision>\n      <origin xyz=\"0 0 -0.01\" rpy=\"0 0 0\"/>\n"
      << "      <geometry><box size=\"" << palm << ' ' << palm << " 0.02\"/></geometry>\n    </collision>\n  </link>\n";
  for (int f = 0; f < spec.fingers; ++f) {
    const double phi = 2.0 * std::numbers::pi * f / spec.fingers;
    const int joints = spec.joints_on_finger(f);
    std::string parent = "palm";
    for (int j = 0; j < joints; ++j) {
      const double len = spec.segment_length(j);
      const std::string link = "f" + std::to_string(f) + "_l" + std::to_string(j);
      out << "  <link name=\"" << link << "\">\n    <collision>\n      <origin xyz=\"0 0 " << len / 2
          << "\" rpy=\"0 0 0\"/>\n      <geometry><cylinder length=\"" << len << "\" radius=\"" << spec.segment_radius
          << "\"/></geometry>\n    </collision>\n  </link>\n";
      out << "  <joint name=\"f" << f << "_j" << j << "\" type=\"revolute\">\n    <parent link=\"" << parent
          << "\"/>\n    <child link=\"" << link << "\"/>\n";
      if (j == 0) {
        out << "    <origin xyz=\"" << spec.base_radius * std::cos(phi) << ' ' << spec.base_radius * std::sin(phi)
            << " 0\" rpy=\"0 0 " << phi << "\"/>\n";
      } else {
        out << "    <origin xyz=\"0 0 " << spec.segment_length(j - 1) << "\" rpy=\"0 0 0\"/>\n";
      }
      out << "    <axis xyz=\"0 -1 0\"/>\n    <limit lower=\"" << spec.lower << "\" upper=\"" << spec.upper
          << "\" effort=\"1\" velocity=\"1\"/>\n  </joint>\n";
      parent = link;
    }
    const std::string tip = "f" + std::to_string(f) + "_tip";
    out << "  <link name=\"" << tip << "\">\n    <collision>\n      <geometry><sphere radius=\"" << spec.tip_radius
        << "\"/></geometry>\n    </collision>\n  </link>\n";
    out << "  <joint name=\"f" << f << "_tip_joint\" type=\"fixed\">\n    <parent link=\"" << parent
        << "\"/>\n    <child link=\"" << tip << "\"/>\n    <origin xyz=\"0 0 " << spec.segment_length(joints - 1)
        << "\" rpy=\"0 0 0\"/>\n  </joint>\n";
  }
  out << "</robot>\n";
  return out.str();
}

Cloud sample_surface(const ObjectSpec& object, int count, DataRng& rng) {
  if (count < 1) fail(ErrorKind::InvalidSpec, "need at least one surface sample");
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Cloud out(count, 3);
  const Eigen::Vector3d s = object.size;
  for (int i = 0; i < count; ++i) {
    Eigen::Vector3d p;
    switch (object.kind) {
      case ShapeKind::Sphere: {
        Eigen::Vector3d g(gauss(rng), gauss(rng), gauss(rng));
        while (g.norm() < 1e-12) g = {gauss(rng), gauss(rng), gauss(rng)};
        p = s[0] * g.normalized();
        break;
      }
      case ShapeKind::Box: {
        const double areas[3] = {s[1] * s[2], s[0] * s[2], s[0] * s[1]};
        double pick = uni(rng) * (areas[0] + areas[1] + areas[2]);
        int axis = 0;
        while (axis < 2 && pick >= areas[axis]) pick -= areas[axis++];
        for (int c = 0; c < 3; ++c) p[c] = (uni(rng) - 0.5) * s[c];
        p[axis] = (uni(rng) < 0.5 ? -0.5 : 0.5) * s[axis];
        break;
      }
      case ShapeKind::Cylinder: {
        const double r = s[0], len = s[1];
        const double side = 2.0 * std::numbers::pi * r * len, cap = std::numbers::pi * r * r;
        const double theta = 2.0 * std::numbers::pi * uni(rng);
        if (uni(rng) * (side + 2.0 * cap) < side) {
          p = {r * std::cos(theta), r * std::sin(theta), (uni(rng) - 0.5) * len};
        } else {
          const double rr = r * std::sqrt(uni(rng));
          p = {rr * std::cos(theta), rr * std::sin(theta), (uni(rng) < 0.5 ? -0.5 : 0.5) * len};
        }
        break;
      }
    }
    out.row(i) = p.transpose();
  }
  return out;
}

std::vector<ObjectSpec> random_objects(int count, DataRng& rng, const std::string& prefix) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * uni(rng); };
  std::vector<ObjectSpec> out;
  for (int i = 0; i < count; ++i) {
    ObjectSpec o;
    const std::string id = prefix + std::to_string(i);
    switch (i % 3) {
      case 0: o = {ShapeKind::Sphere, {between(0.025, 0.04), 0, 0}, id + "_sphere"}; break;
      case 1: o = {ShapeKind::Box, {between(0.04, 0.065), between(0.04, 0.065), between(0.04, 0.065)}, id + "_box"}; break;
      default: o = {ShapeKind::Cylinder, {between(0.02, 0.032), between(0.05, 0.08), 0}, id + "_cylinder"}; break;
    }
    out.push_back(o);
  }
  return out;
}

WristPose approach_wrist(const Cloud& cloud, const Eigen::Vector3d& approach, double roll, double gap) {
  const Eigen::Vector3d z = approach.normalized();
  int axis = 0;
  for (int i = 1; i < 3; ++i) {
    if (std::abs(z[i]) < std::abs(z[axis])) axis = i;
  }
  const Eigen::Vector3d x0 = Eigen::Vector3d::Unit(axis).cross(z).normalized();
  const Eigen::Vector3d y0 = z.cross(x0);
  const Eigen::Vector3d x = std::cos(roll) * x0 + std::sin(roll) * y0;
  Eigen::Matrix3d rot;
  rot << x, z.cross(x), z;
  const double nearest = (cloud * z).minCoeff();
  WristPose wrist;
  wrist.t = (nearest - gap) * z;
  wrist.r6 = r6_from_matrix(rot);
  return wrist;
}

namespace {

// Links in the subtree below joint j (its child and every descendant).
std::vector<int> moving_links(const HandModel& hand, int joint) {
  std::vector<int> out, stack{hand.joints()[static_cast<std::size_t>(joint)].child_link};
  while (!stack.empty()) {
    const int link = stack.back();
    stack.pop_back();
    out.push_back(link);
    for (int c : hand.child_joints(link)) stack.push_back(hand.joints()[static_cast<std::size_t>(c)].child_link);
  }
  return out;
}

double clearance(const HandModel& hand, const Eigen::VectorXd& q, const WristPose& wrist, const Cloud& cloud,
                 const std::vector<int>& links) {
  double best = std::numeric_limits<double>::infinity();
  for (const PosedPrimitive& prim : posed_primitives(hand, q, wrist)) {
    if (std::find(links.begin(), links.end(), prim.link) == links.end()) continue;
    for (Eigen::Index i = 0; i < cloud.rows(); ++i) best = std::min(best, signed_distance(prim, cloud.row(i).transpose()));
  }
  return best;
}

}  // namespace

Eigen::VectorXd close_hand(const HandModel& hand, const Cloud& cloud, const WristPose& wrist, const SynthConfig& cfg) {
  // start fully open
  Eigen::VectorXd q(hand.dof());
  for (int k = 0; k < hand.dof(); ++k) q[k] = hand.joints()[static_cast<std::size_t>(hand.revolute_joints()[static_cast<std::size_t>(k)])].lower;
  std::vector<bool> done(static_cast<std::size_t>(hand.dof()), false);
  for (int tip : fingertip_links(hand)) {
    for (int slot : finger_chain(hand, tip)) {
      if (done[static_cast<std::size_t>(slot)]) continue;
      done[static_cast<std::size_t>(slot)] = true;
      const int joint = hand.revolute_joints()[static_cast<std::size_t>(slot)];
      const double upper = hand.joints()[static_cast<std::size_t>(joint)].upper;
      const auto links = moving_links(hand, joint);
      auto gap_at = [&](double angle) {
        Eigen::VectorXd trial = q;
        trial[slot] = angle;
        return clearance(hand, trial, wrist, cloud, links);
      };
      double lo = q[slot];
      if (gap_at(lo) <= cfg.contact_gap) continue;
      bool touched = false;
      while (lo < upper) {
        const double hi = std::min(lo + cfg.scan_step, upper);
        if (gap_at(hi) <= cfg.contact_gap) {
          double a = lo, b = hi;
          for (int it = 0; it < cfg.bisect_steps; ++it) {
            const double mid = 0.5 * (a + b);
            (gap_at(mid) <= cfg.contact_gap ? b : a) = mid;
          }
          q[slot] = a;
          touched = true;
          break;
        }
        lo = hi;
      }
      if (!touched) q[slot] = upper;
    }
  }
  return q;
}

std::vector<GraspSample> synth_grasps(const HandModel& hand, const std::string& hand_id,
                                      const std::vector<ObjectSpec>& objects, int count, const SynthConfig& cfg) {
  if (fingertip_links(hand).empty()) fail(ErrorKind::NoFingertips, "hand '" + hand.name() + "' has no fingertips to close");
  std::vector<GraspSample> out;
  if (count <= 0) return out;
  if (objects.empty()) fail(ErrorKind::InvalidSpec, "no objects to grasp");
  DataRng rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> roll(-std::numbers::pi, std::numbers::pi);
  for (int i = 0; i < count; ++i) {
    const ObjectSpec& object = objects[static_cast<std::size_t>(i) % objects.size()];
    GraspSample s;
    s.hand_id = hand_id;
    s.object_id = object.id;
    s.cloud = normalize_cloud(sample_surface(object, cfg.points, rng));
    Eigen::Vector3d approach(gauss(rng), gauss(rng), gauss(rng));
    while (approach.norm() < 1e-9) approach = {gauss(rng), gauss(rng), gauss(rng)};
    s.wrist = approach_wrist(s.cloud, approach, roll(rng), cfg.palm_gap);
    s.q = close_hand(hand, s.cloud, s.wrist, cfg);
    s.stable = evaluate_grasp(hand, s.q, s.wrist, s.cloud, cfg.eval).stable;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace crossgrasp
