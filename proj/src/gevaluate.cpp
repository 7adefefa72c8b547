#include "crossgrasp/gevaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>

#include "crossgrasp/errors.hpp"
#include "crossgrasp/kinematics.hpp"

namespace crossgrasp {

std::vector<PosedPrimitive> posed_primitives(const HandModel& hand, const Eigen::VectorXd& q, const WristPose& wrist) {
  const auto frames = forward_kinematics(hand, q, wrist);
  std::vector<PosedPrimitive> out;
  for (const Link& link : hand.links()) {
    if (link.primitive.kind == PrimitiveKind::Dummy) continue;
    out.push_back({link.id, link.primitive, frames[static_cast<std::size_t>(link.id)] * link.primitive.pose.transform()});
  }
  return out;
}

double signed_distance(const PosedPrimitive& prim, const Eigen::Vector3d& p) {
  const Eigen::Vector3d local = prim.pose.inverse() * p;
  const auto& dims = prim.primitive.dims;
  switch (prim.primitive.kind) {
    case PrimitiveKind::Sphere: return local.norm() - dims[0];
    case PrimitiveKind::Box: {
      const Eigen::Vector3d d = local.cwiseAbs() - 0.5 * Eigen::Vector3d(dims[0], dims[1], dims[2]);
      return d.cwiseMax(0.0).norm() + std::min(d.maxCoeff(), 0.0);
    }
    case PrimitiveKind::Cylinder: {
      const Eigen::Vector2d d(local.head<2>().norm() - dims[1], std::abs(local.z()) - 0.5 * dims[0]);
      return d.cwiseMax(0.0).norm() + std::min(d.maxCoeff(), 0.0);
    }
    case PrimitiveKind::Dummy: break;
  }
  return std::numeric_limits<double>::infinity();
}

Cloud estimate_normals(const Cloud& cloud, int k) {
  const Eigen::Index n = cloud.rows();
  if (n == 0) fail(ErrorKind::EmptyCloud, "cannot estimate normals of an empty cloud");
  const Eigen::RowVector3d centroid = cloud.colwise().mean();
  const Eigen::Index neighbors = std::min<Eigen::Index>(std::max(k, 1) + 1, n);
  Cloud normals(n, 3);
  std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Vector3d normal = (cloud.row(i) - centroid).transpose();
    if (neighbors >= 3) {
      for (Eigen::Index j = 0; j < n; ++j) dist[static_cast<std::size_t>(j)] = {(cloud.row(j) - cloud.row(i)).squaredNorm(), j};
      std::partial_sort(dist.begin(), dist.begin() + neighbors, dist.end());
      Eigen::Vector3d mean = Eigen::Vector3d::Zero();
      for (Eigen::Index m = 0; m < neighbors; ++m) mean += cloud.row(dist[static_cast<std::size_t>(m)].second).transpose();
      mean /= static_cast<double>(neighbors);
      Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
      for (Eigen::Index m = 0; m < neighbors; ++m) {
        const Eigen::Vector3d d = cloud.row(dist[static_cast<std::size_t>(m)].second).transpose() - mean;
        cov += d * d.transpose();
      }
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
      normal = eig.eigenvectors().col(0);
    }
    if (normal.norm() < 1e-15) normal = Eigen::Vector3d::UnitZ();
    normal.normalize();
    if (normal.dot((cloud.row(i) - centroid).transpose()) < 0) normal = -normal;
    normals.row(i) = normal.transpose();
  }
  return normals;
}

std::vector<Contact> contact_points(const std::vector<PosedPrimitive>& prims, const Cloud& cloud, const Cloud& normals,
                                    double eps) {
  std::vector<Contact> out;
  for (Eigen::Index i = 0; i < cloud.rows(); ++i) {
    const Eigen::Vector3d p = cloud.row(i).transpose();
    double best = std::numeric_limits<double>::infinity();
    int link = -1;
    for (const PosedPrimitive& prim : prims) {
      const double sd = signed_distance(prim, p);
      if (sd < best) {
        best = sd;
        link = prim.link;
      }
    }
    if (best < eps) out.push_back({p, normals.row(i).transpose(), link, best});
  }
  return out;
}

std::vector<Contact> contact_points(const HandModel& hand, const Eigen::VectorXd& q, const WristPose& wrist,
                                    const Cloud& cloud, double eps, int normal_neighbors) {
  return contact_points(posed_primitives(hand, q, wrist), cloud, estimate_normals(cloud, normal_neighbors), eps);
}

std::vector<Contact> cluster_contacts(const std::vector<Contact>& contacts) {
  std::map<int, Contact> best;
  for (const Contact& c : contacts) {
    auto it = best.find(c.link);
    if (it == best.end() || c.distance < it->second.distance) best[c.link] = c;
  }
  std::vector<Contact> out;
  for (const auto& [link, c] : best) out.push_back(c);
  return out;
}

namespace {

using Vector6d = Eigen::Matrix<double, 6, 1>;

void tangent_basis(const Eigen::Vector3d& n, Eigen::Vector3d& t1, Eigen::Vector3d& t2) {
  int axis = 0;
  for (int i = 1; i < 3; ++i) {
    if (std::abs(n[i]) < std::abs(n[axis])) axis = i;
  }
  t1 = Eigen::Vector3d::Unit(axis).cross(n).normalized();
  t2 = n.cross(t1);
}

}  // namespace

double force_closure_margin(const std::vector<Contact>& contacts, double mu, int edges, int directions,
                            std::uint64_t seed, const Eigen::Vector3d& center, const Eigen::Matrix3d& frame) {
  if (contacts.empty()) fail(ErrorKind::NoContacts, "force-closure margin needs at least one contact");
  if (edges < 1 || directions < 1 || mu < 0) fail(ErrorKind::InvalidSpec, "friction edges and directions must be positive, mu >= 0");
  double radius = 0.0;
  for (const Contact& c : contacts) radius += (c.point - center).norm();
  radius /= static_cast<double>(contacts.size());
  if (radius < 1e-12) radius = 1.0;

  const Eigen::Matrix3d to_frame = frame.transpose();
  std::vector<Vector6d> wrenches;
  for (const Contact& c : contacts) {
    const Eigen::Vector3d n = to_frame * c.normal.normalized();
    const Eigen::Vector3d r = to_frame * (c.point - center);
    Eigen::Vector3d t1, t2;
    tangent_basis(n, t1, t2);
    for (int e = 0; e < edges; ++e) {
      const double theta = 2.0 * std::numbers::pi * e / edges;
      const Eigen::Vector3d f = -n + mu * (std::cos(theta) * t1 + std::sin(theta) * t2);
      Vector6d w;
      w << f, r.cross(f) / radius;
      wrenches.push_back(w);
    }
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<Vector6d> dirs;
  while (static_cast<int>(dirs.size()) < directions) {
    Vector6d u;
    for (int i = 0; i < 6; ++i) u[i] = unit(rng);
    u.normalize();
    dirs.push_back(u);
    if (static_cast<int>(dirs.size()) < directions) dirs.push_back(-u);
  }

  double margin = std::numeric_limits<double>::infinity();
  for (const Vector6d& u : dirs) {
    double support = -std::numeric_limits<double>::infinity();
    for (const Vector6d& w : wrenches) support = std::max(support, w.dot(u));
    margin = std::min(margin, support);
  }
  return margin;
}

double max_penetration(const std::vector<PosedPrimitive>& prims, const Cloud& cloud) {
  double depth = 0.0;
  for (Eigen::Index i = 0; i < cloud.rows(); ++i) {
    const Eigen::Vector3d p = cloud.row(i).transpose();
    for (const PosedPrimitive& prim : prims) depth = std::max(depth, -signed_distance(prim, p));
  }
  return depth;
}

GraspVerdict evaluate_grasp(const HandModel& hand, const Eigen::VectorXd& q, const WristPose& wrist, const Cloud& cloud,
                            const EvalConfig& cfg) {
  if (cloud.rows() == 0) fail(ErrorKind::EmptyCloud, "cannot evaluate a grasp on an empty cloud");
  const auto prims = posed_primitives(hand, q, wrist);
  const auto contacts = cluster_contacts(contact_points(prims, cloud, estimate_normals(cloud, cfg.normal_neighbors), cfg.contact_eps));
  GraspVerdict verdict;
  verdict.contact_count = static_cast<int>(contacts.size());
  verdict.penetration = max_penetration(prims, cloud);
  if (!contacts.empty()) {
    const Eigen::Vector3d center = cloud.colwise().mean().transpose();
    verdict.fc_margin = force_closure_margin(contacts, cfg.mu, cfg.friction_edges, cfg.directions, cfg.seed, center,
                                             wrist.rotation());
  }
  verdict.stable = verdict.contact_count >= 2 && verdict.fc_margin > 0.0 && verdict.penetration <= cfg.penetration_tol;
  return verdict;
}

}  // namespace crossgrasp
