#include "crossgrasp/urdf.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "crossgrasp/errors.hpp"
#include "crossgrasp/rotation.hpp"

namespace crossgrasp {

namespace pt = boost::property_tree;

Eigen::Isometry3d Pose::transform() const {
  Eigen::Isometry3d out = Eigen::Isometry3d::Identity();
  out.linear() = rpy_to_matrix(rpy);
  out.translation() = xyz;
  return out;
}

LinkPrimitive LinkPrimitive::box(double length, double width, double height, Pose pose) {
  return {PrimitiveKind::Box, pose, {length, width, height}};
}

LinkPrimitive LinkPrimitive::cylinder(double length, double radius, Pose pose) {
  return {PrimitiveKind::Cylinder, pose, {length, radius, 0.0}};
}

LinkPrimitive LinkPrimitive::sphere(double radius, Pose pose) {
  return {PrimitiveKind::Sphere, pose, {radius, 0.0, 0.0}};
}

HandModel::HandModel(std::string name, std::vector<Link> links, std::vector<JointSpec> joints)
    : name_(std::move(name)), links_(std::move(links)), joints_(std::move(joints)) {
  const int n_links = static_cast<int>(links_.size());
  if (n_links == 0) fail(ErrorKind::MalformedDocument, "model has no links");
  for (int i = 0; i < n_links; ++i) links_[i].id = i;

  parent_joint_.assign(n_links, -1);
  child_joints_.assign(n_links, {});
  revolute_slot_.assign(joints_.size(), -1);
  for (int j = 0; j < static_cast<int>(joints_.size()); ++j) {
    const JointSpec& joint = joints_[j];
    if (joint.parent_link < 0 || joint.parent_link >= n_links || joint.child_link < 0 ||
        joint.child_link >= n_links) {
      fail(ErrorKind::UnknownLinkRef, "joint '" + joint.name + "' references a missing link");
    }
    if (joint.parent_link == joint.child_link) {
      fail(ErrorKind::CyclicKinematics, "joint '" + joint.name + "' connects a link to itself");
    }
    if (parent_joint_[joint.child_link] != -1) {
      fail(ErrorKind::CyclicKinematics,
           "link '" + links_[joint.child_link].name + "' has more than one parent joint");
    }
    parent_joint_[joint.child_link] = j;
    child_joints_[joint.parent_link].push_back(j);
    if (joint.kind == JointKind::Revolute) {
      if (joint.lower > joint.upper) {
        fail(ErrorKind::MalformedDocument, "joint '" + joint.name + "' has lower > upper");
      }
      if (std::abs(joint.axis.norm() - 1.0) > 1e-9) {
        fail(ErrorKind::MalformedDocument, "joint '" + joint.name + "' axis is not unit length");
      }
      revolute_slot_[j] = static_cast<int>(revolute_joints_.size());
      revolute_joints_.push_back(j);
    }
  }

  std::vector<int> roots;
  for (int i = 0; i < n_links; ++i) {
    if (parent_joint_[i] == -1) roots.push_back(i);
  }
  if (roots.empty()) fail(ErrorKind::CyclicKinematics, "every link has a parent joint");
  if (roots.size() > 1) {
    fail(ErrorKind::MalformedDocument,
         "expected one root link, found " + std::to_string(roots.size()) + " ('" + links_[roots[0]].name +
             "', '" + links_[roots[1]].name + "', ...)");
  }
  root_ = roots.front();

  std::vector<int> stack{root_};
  std::vector<bool> seen(n_links, false);
  int reached = 0;
  while (!stack.empty()) {
    const int link = stack.back();
    stack.pop_back();
    if (seen[link]) continue;
    seen[link] = true;
    ++reached;
    for (int j : child_joints_[link]) stack.push_back(joints_[j].child_link);
  }
  if (reached != n_links) fail(ErrorKind::CyclicKinematics, "joint graph contains a cycle");
}

std::vector<int> HandModel::path_to(int link) const {
  std::vector<int> path;
  for (int j = parent_joint_.at(link); j != -1; j = parent_joint_[joints_[j].parent_link]) path.push_back(j);
  std::reverse(path.begin(), path.end());
  return path;
}

std::optional<int> HandModel::find_link(std::string_view name) const {
  for (const Link& link : links_) {
    if (link.name == name) return link.id;
  }
  return std::nullopt;
}

namespace {

std::vector<double> parse_numbers(const std::string& text, std::size_t expected, const std::string& where) {
  std::vector<double> out;
  const char* p = text.data();
  const char* end = p + text.size();
  while (p < end) {
    while (p < end && std::isspace(static_cast<unsigned char>(*p))) ++p;
    if (p == end) break;
    double value = 0.0;
    if (*p == '+') ++p;
    auto [next, ec] = std::from_chars(p, end, value);
    if (ec != std::errc()) fail(ErrorKind::MalformedDocument, "bad number in " + where + ": '" + text + "'");
    out.push_back(value);
    p = next;
  }
  if (expected != 0 && out.size() != expected) {
    fail(ErrorKind::MalformedDocument,
         where + " expects " + std::to_string(expected) + " numbers, got '" + text + "'");
  }
  return out;
}

double parse_number(const std::string& text, const std::string& where) {
  return parse_numbers(text, 1, where).front();
}

std::optional<std::string> attr(const pt::ptree& node, const char* name) {
  if (auto attrs = node.get_child_optional("<xmlattr>")) {
    if (auto value = attrs->get_optional<std::string>(name)) return *value;
  }
  return std::nullopt;
}

std::string required_attr(const pt::ptree& node, const char* name, const std::string& where) {
  auto value = attr(node, name);
  if (!value) fail(ErrorKind::MalformedDocument, where + " is missing attribute '" + name + "'");
  return *value;
}

Eigen::Vector3d vec3(const std::vector<double>& v) { return {v[0], v[1], v[2]}; }

Pose parse_origin(const pt::ptree& parent, const std::string& where) {
  Pose pose;
  if (auto origin = parent.get_child_optional("origin")) {
    if (auto xyz = attr(*origin, "xyz")) pose.xyz = vec3(parse_numbers(*xyz, 3, where + " origin xyz"));
    if (auto rpy = attr(*origin, "rpy")) pose.rpy = vec3(parse_numbers(*rpy, 3, where + " origin rpy"));
  }
  return pose;
}

std::string resolve_mesh_uri(std::string uri) {
  for (const char* prefix : {"package://", "file://"}) {
    if (uri.rfind(prefix, 0) == 0) uri = uri.substr(std::strlen(prefix));
  }
  return uri;
}

// Vertices of an OBJ or STL (ascii or binary) mesh; empty when unreadable.
std::vector<Eigen::Vector3d> read_mesh_vertices(const std::filesystem::path& path) {
  std::vector<Eigen::Vector3d> vertices;
  std::ifstream in(path, std::ios::binary);
  if (!in) return vertices;
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });

  if (ext == ".obj") {
    std::istringstream lines(data);
    std::string line;
    while (std::getline(lines, line)) {
      if (line.size() > 2 && line[0] == 'v' && line[1] == ' ') {
        std::istringstream ls(line.substr(2));
        double x, y, z;
        if (ls >> x >> y >> z) vertices.emplace_back(x, y, z);
      }
    }
    return vertices;
  }
  if (ext == ".stl") {
    if (data.size() >= 84) {
      std::uint32_t n_tri = 0;
      std::memcpy(&n_tri, data.data() + 80, 4);
      if (data.size() == 84 + 50ull * n_tri) {
        for (std::uint32_t t = 0; t < n_tri; ++t) {
          const char* tri = data.data() + 84 + 50ull * t + 12;
          for (int v = 0; v < 3; ++v) {
            float xyz[3];
            std::memcpy(xyz, tri + 12 * v, 12);
            vertices.emplace_back(xyz[0], xyz[1], xyz[2]);
          }
        }
        return vertices;
      }
    }
    std::istringstream words(data);
    std::string word;
    while (words >> word) {
      if (word == "vertex") {
        double x, y, z;
        if (words >> x >> y >> z) vertices.emplace_back(x, y, z);
      }
    }
  }
  return vertices;
}

LinkPrimitive parse_primitive(const pt::ptree& link, const std::string& link_name,
                              const std::filesystem::path& mesh_root) {
  auto collision = link.get_child_optional("collision");
  if (!collision) return LinkPrimitive::dummy();
  auto geometry = collision->get_child_optional("geometry");
  if (!geometry) return LinkPrimitive::dummy();
  const std::string where = "link '" + link_name + "' collision";
  const Pose pose = parse_origin(*collision, where);

  for (const auto& [tag, node] : *geometry) {
    if (tag == "box") {
      auto size = parse_numbers(required_attr(node, "size", where + " box"), 3, where + " box size");
      if (size[0] < 0 || size[1] < 0 || size[2] < 0) fail(ErrorKind::MalformedDocument, where + " negative box size");
      return LinkPrimitive::box(size[0], size[1], size[2], pose);
    }
    if (tag == "cylinder") {
      const double radius = parse_number(required_attr(node, "radius", where + " cylinder"), where);
      const double length = parse_number(required_attr(node, "length", where + " cylinder"), where);
      if (radius < 0 || length < 0) fail(ErrorKind::MalformedDocument, where + " negative cylinder size");
      return LinkPrimitive::cylinder(length, radius, pose);
    }
    if (tag == "sphere") {
      const double radius = parse_number(required_attr(node, "radius", where + " sphere"), where);
      if (radius < 0) fail(ErrorKind::MalformedDocument, where + " negative sphere radius");
      return LinkPrimitive::sphere(radius, pose);
    }
    if (tag == "mesh") {
      const std::string uri = resolve_mesh_uri(required_attr(node, "filename", where + " mesh"));
      Eigen::Vector3d scale = Eigen::Vector3d::Ones();
      if (auto s = attr(node, "scale")) scale = vec3(parse_numbers(*s, 3, where + " mesh scale"));
      std::filesystem::path mesh_path(uri);
      if (mesh_path.is_relative()) mesh_path = mesh_root / mesh_path;
      const auto vertices = read_mesh_vertices(mesh_path);
      if (vertices.empty()) return LinkPrimitive::dummy();
      Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
      Eigen::Vector3d hi = -lo;
      for (const auto& v : vertices) {
        const Eigen::Vector3d s = v.cwiseProduct(scale);
        lo = lo.cwiseMin(s);
        hi = hi.cwiseMax(s);
      }
      const Eigen::Vector3d extent = (hi - lo).cwiseAbs();
      Pose box_pose = pose;
      box_pose.xyz = pose.xyz + rpy_to_matrix(pose.rpy) * (0.5 * (lo + hi));
      return LinkPrimitive::box(extent.x(), extent.y(), extent.z(), box_pose);
    }
  }
  return LinkPrimitive::dummy();
}

JointKind map_joint_type(const std::string& type, const std::string& joint_name) {
  if (type == "revolute") return JointKind::Revolute;
  if (type == "fixed") return JointKind::Fixed;
  if (type == "continuous" || type == "prismatic" || type == "floating" || type == "planar") return JointKind::Other;
  fail(ErrorKind::UnsupportedJoint, "joint '" + joint_name + "' has type '" + type + "'");
}

}  // namespace

HandModel parse_urdf(std::string_view text, const std::filesystem::path& mesh_root) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    fail(ErrorKind::MalformedDocument, e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  auto robot = tree.get_child_optional("robot");
  if (!robot) fail(ErrorKind::MalformedDocument, "missing <robot> root element");
  const std::string robot_name = attr(*robot, "name").value_or("");

  std::vector<Link> links;
  std::vector<JointSpec> joints;
  for (const auto& [tag, node] : *robot) {
    if (tag != "link") continue;
    Link link;
    link.name = required_attr(node, "name", "<link>");
    for (const Link& other : links) {
      if (other.name == link.name) fail(ErrorKind::MalformedDocument, "duplicate link '" + link.name + "'");
    }
    link.id = static_cast<int>(links.size());
    link.primitive = parse_primitive(node, link.name, mesh_root);
    links.push_back(std::move(link));
  }

  auto link_id = [&](const pt::ptree& joint_node, const char* role, const std::string& joint_name) {
    auto element = joint_node.get_child_optional(role);
    if (!element) fail(ErrorKind::MalformedDocument, "joint '" + joint_name + "' has no <" + role + ">");
    const std::string name = required_attr(*element, "link", "joint '" + joint_name + "' <" + role + ">");
    for (const Link& link : links) {
      if (link.name == name) return link.id;
    }
    fail(ErrorKind::UnknownLinkRef, "joint '" + joint_name + "' names missing link '" + name + "'");
  };

  for (const auto& [tag, node] : *robot) {
    if (tag != "joint") continue;
    JointSpec joint;
    joint.name = required_attr(node, "name", "<joint>");
    joint.urdf_type = required_attr(node, "type", "joint '" + joint.name + "'");
    joint.kind = map_joint_type(joint.urdf_type, joint.name);
    joint.parent_link = link_id(node, "parent", joint.name);
    joint.child_link = link_id(node, "child", joint.name);
    joint.origin = parse_origin(node, "joint '" + joint.name + "'");

    if (joint.kind == JointKind::Fixed) {
      joint.axis = Eigen::Vector3d::Zero();
    } else {
      joint.axis = Eigen::Vector3d::UnitX();
      if (auto axis = node.get_child_optional("axis")) {
        if (auto xyz = attr(*axis, "xyz")) joint.axis = vec3(parse_numbers(*xyz, 3, "joint '" + joint.name + "' axis"));
      }
      const double norm = joint.axis.norm();
      if (!(norm > 1e-12)) fail(ErrorKind::MalformedDocument, "joint '" + joint.name + "' has a zero axis");
      if (std::abs(norm - 1.0) > 1e-12) joint.axis /= norm;
    }

    if (joint.kind == JointKind::Revolute) {
      auto limit = node.get_child_optional("limit");
      if (!limit) fail(ErrorKind::MalformedDocument, "revolute joint '" + joint.name + "' has no <limit>");
      joint.lower = parse_number(attr(*limit, "lower").value_or("0"), "joint '" + joint.name + "' limit");
      joint.upper = parse_number(attr(*limit, "upper").value_or("0"), "joint '" + joint.name + "' limit");
    }
    joints.push_back(std::move(joint));
  }

  return HandModel(robot_name, std::move(links), std::move(joints));
}

HandModel load_urdf(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot read '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_urdf(buffer.str(), path.parent_path());
}

}  // namespace crossgrasp
