#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "crossgrasp/urdf.hpp"

namespace crossgrasp {

inline constexpr int kPrimitiveWidth = 10;
// limits(2) + origin(6) + axis(3) + parent primitive(10) + child primitive(10)
inline constexpr int kJointEncodingWidth = 31;
inline constexpr int kDefaultMaxJoints = 32;
inline constexpr int kDefaultMaxDof = 24;

using PrimitiveEncoding = std::array<double, kPrimitiveWidth>;
using JointEncoding = std::array<double, kJointEncodingWidth>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// (kind, r, p, y, x, y, z, s1, s2, s3); a dummy link encodes as (3, 0, ..., 0).
PrimitiveEncoding encode_link_primitive(const LinkPrimitive& primitive);

/// One 31-wide encoding per joint, in model order. Non-revolute joints carry
/// limits (0, 0).
std::vector<JointEncoding> build_joint_encodings(const HandModel& hand);

struct MorphologyTokens {
  RowMatrix raw;                       // max_joints x 31, zero beyond `joint_count`
  std::vector<bool> key_padding_mask;  // true = padded row
  std::vector<bool> revolute_mask;     // rho: true at revolute rows
  int joint_count = 0;                 // M
  int max_dof = kDefaultMaxDof;        // D_max

  int max_joints() const { return static_cast<int>(raw.rows()); }
  int dof() const;
  /// Row indices of revolute joints in articulation order.
  std::vector<int> revolute_rows() const;
};

MorphologyTokens pad_and_mask(std::span<const JointEncoding> encodings, const std::vector<bool>& is_revolute,
                              int max_joints = kDefaultMaxJoints, int max_dof = kDefaultMaxDof);

MorphologyTokens tokenize(const HandModel& hand, int max_joints = kDefaultMaxJoints, int max_dof = kDefaultMaxDof);

/// {"M", "D_max", "raw", "pad_mask", "rho"}, row-major.
nlohmann::json tokens_to_json(const MorphologyTokens& tokens);
MorphologyTokens tokens_from_json(const nlohmann::json& doc);

}  // namespace crossgrasp
