#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace crossgrasp {

/// Roll/pitch/yaw (radians) plus translation (meters), URDF <origin> style.
struct Pose {
  Eigen::Vector3d rpy = Eigen::Vector3d::Zero();
  Eigen::Vector3d xyz = Eigen::Vector3d::Zero();

  Eigen::Isometry3d transform() const;
  bool operator==(const Pose&) const = default;
};

enum class PrimitiveKind : int { Box = 0, Cylinder = 1, Sphere = 2, Dummy = 3 };

/// Collision primitive attached to a link.
///   box:      dims = (length, width, height) along local x, y, z
///   cylinder: dims = (length, radius, 0), axis along local z
///   sphere:   dims = (radius, 0, 0)
///   dummy:    pose and dims all zero
struct LinkPrimitive {
  PrimitiveKind kind = PrimitiveKind::Dummy;
  Pose pose;
  std::array<double, 3> dims{0.0, 0.0, 0.0};

  static LinkPrimitive dummy() { return {}; }
  static LinkPrimitive box(double length, double width, double height, Pose pose = {});
  static LinkPrimitive cylinder(double length, double radius, Pose pose = {});
  static LinkPrimitive sphere(double radius, Pose pose = {});

  bool operator==(const LinkPrimitive&) const = default;
};

enum class JointKind { Revolute, Fixed, Other };

struct JointSpec {
  std::string name;
  JointKind kind = JointKind::Fixed;
  std::string urdf_type;  // as declared, e.g. "continuous" for an Other joint
  double lower = 0.0;
  double upper = 0.0;
  Pose origin;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitX();
  int parent_link = -1;
  int child_link = -1;

  bool operator==(const JointSpec&) const = default;
};

struct Link {
  int id = -1;
  std::string name;
  LinkPrimitive primitive;

  bool operator==(const Link&) const = default;
};

/// Kinematic tree parsed from a URDF. Links and joints keep document order;
/// the articulation vector q follows the document order of revolute joints.
class HandModel {
 public:
  HandModel() = default;
  HandModel(std::string name, std::vector<Link> links, std::vector<JointSpec> joints);

  const std::string& name() const { return name_; }
  const std::vector<Link>& links() const { return links_; }
  const std::vector<JointSpec>& joints() const { return joints_; }
  int root_link() const { return root_; }

  /// Number of revolute joints (the articulation dimension d).
  int dof() const { return static_cast<int>(revolute_joints_.size()); }
  int joint_count() const { return static_cast<int>(joints_.size()); }

  /// Joint indices of the revolute joints, in articulation order.
  const std::vector<int>& revolute_joints() const { return revolute_joints_; }
  /// Articulation slot of joint j, or -1 when j is not revolute.
  int revolute_slot(int joint) const { return revolute_slot_[joint]; }

  /// Joint whose child is `link`, or -1 for the root.
  int parent_joint(int link) const { return parent_joint_[link]; }
  const std::vector<int>& child_joints(int link) const { return child_joints_[link]; }

  /// Joint indices from the root down to `link`.
  std::vector<int> path_to(int link) const;
  std::optional<int> find_link(std::string_view name) const;

  bool operator==(const HandModel&) const = default;

 private:
  std::string name_;
  std::vector<Link> links_;
  std::vector<JointSpec> joints_;
  int root_ = -1;
  std::vector<int> revolute_joints_;
  std::vector<int> revolute_slot_;
  std::vector<int> parent_joint_;
  std::vector<std::vector<int>> child_joints_;
};

/// Parses the supported URDF subset (robot, link, joint, origin, axis, limit,
/// collision, geometry/box|cylinder|sphere|mesh). Mesh paths are resolved
/// against `mesh_root`; a readable OBJ/STL mesh contributes its bounding box.
HandModel parse_urdf(std::string_view text, const std::filesystem::path& mesh_root = {});
HandModel load_urdf(const std::filesystem::path& path);

}  // namespace crossgrasp
