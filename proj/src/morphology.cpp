#include "crossgrasp/morphology.hpp"

#include <algorithm>

#include "crossgrasp/errors.hpp"

namespace crossgrasp {

PrimitiveEncoding encode_link_primitive(const LinkPrimitive& p) {
  PrimitiveEncoding out{};
  out[0] = static_cast<double>(static_cast<int>(p.kind));
  if (p.kind == PrimitiveKind::Dummy) return out;
  for (int i = 0; i < 3; ++i) {
    out[1 + i] = p.pose.rpy[i];
    out[4 + i] = p.pose.xyz[i];
  }
  switch (p.kind) {
    case PrimitiveKind::Box:
      out[7] = p.dims[0];
      out[8] = p.dims[1];
      out[9] = p.dims[2];
      break;
    case PrimitiveKind::Cylinder:
      out[7] = p.dims[0];
      out[8] = p.dims[1];
      break;
    case PrimitiveKind::Sphere:
      out[7] = p.dims[0];
      break;
    case PrimitiveKind::Dummy:
      break;
  }
  return out;
}

std::vector<JointEncoding> build_joint_encodings(const HandModel& hand) {
  std::vector<JointEncoding> out;
  out.reserve(hand.joints().size());
  for (const JointSpec& joint : hand.joints()) {
    JointEncoding enc{};
    if (joint.kind == JointKind::Revolute) {
      enc[0] = joint.lower;
      enc[1] = joint.upper;
    }
    for (int i = 0; i < 3; ++i) {
      enc[2 + i] = joint.origin.rpy[i];
      enc[5 + i] = joint.origin.xyz[i];
      enc[8 + i] = joint.axis[i];
    }
    const auto parent = encode_link_primitive(hand.links()[joint.parent_link].primitive);
    const auto child = encode_link_primitive(hand.links()[joint.child_link].primitive);
    std::copy(parent.begin(), parent.end(), enc.begin() + 11);
    std::copy(child.begin(), child.end(), enc.begin() + 21);
    out.push_back(enc);
  }
  return out;
}

int MorphologyTokens::dof() const {
  return static_cast<int>(std::count(revolute_mask.begin(), revolute_mask.end(), true));
}

std::vector<int> MorphologyTokens::revolute_rows() const {
  std::vector<int> rows;
  for (int i = 0; i < static_cast<int>(revolute_mask.size()); ++i) {
    if (revolute_mask[i]) rows.push_back(i);
  }
  return rows;
}

MorphologyTokens pad_and_mask(std::span<const JointEncoding> encodings, const std::vector<bool>& is_revolute,
                              int max_joints, int max_dof) {
  const int m = static_cast<int>(encodings.size());
  if (static_cast<int>(is_revolute.size()) != m) {
    fail(ErrorKind::DimensionMismatch, "revolute flags do not match the number of encodings");
  }
  if (m > max_joints) {
    fail(ErrorKind::CapacityExceeded, std::to_string(m) + " joints exceed M_max = " + std::to_string(max_joints));
  }
  const int d = static_cast<int>(std::count(is_revolute.begin(), is_revolute.end(), true));
  if (d > max_dof) {
    fail(ErrorKind::CapacityExceeded,
         std::to_string(d) + " revolute joints exceed D_max = " + std::to_string(max_dof));
  }

  MorphologyTokens tokens;
  tokens.raw = RowMatrix::Zero(max_joints, kJointEncodingWidth);
  tokens.key_padding_mask.assign(max_joints, true);
  tokens.revolute_mask.assign(max_joints, false);
  tokens.joint_count = m;
  tokens.max_dof = max_dof;
  for (int i = 0; i < m; ++i) {
    for (int c = 0; c < kJointEncodingWidth; ++c) tokens.raw(i, c) = encodings[i][c];
    tokens.key_padding_mask[i] = false;
    tokens.revolute_mask[i] = is_revolute[i];
  }
  return tokens;
}

MorphologyTokens tokenize(const HandModel& hand, int max_joints, int max_dof) {
  std::vector<bool> is_revolute;
  for (const JointSpec& joint : hand.joints()) is_revolute.push_back(joint.kind == JointKind::Revolute);
  const auto encodings = build_joint_encodings(hand);
  return pad_and_mask(encodings, is_revolute, max_joints, max_dof);
}

nlohmann::json tokens_to_json(const MorphologyTokens& tokens) {
  nlohmann::json raw = nlohmann::json::array();
  for (int r = 0; r < tokens.raw.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < tokens.raw.cols(); ++c) row.push_back(tokens.raw(r, c));
    raw.push_back(std::move(row));
  }
  return {{"M", tokens.joint_count},
          {"D_max", tokens.max_dof},
          {"raw", std::move(raw)},
          {"pad_mask", tokens.key_padding_mask},
          {"rho", tokens.revolute_mask}};
}

MorphologyTokens tokens_from_json(const nlohmann::json& doc) {
  try {
    MorphologyTokens tokens;
    tokens.joint_count = doc.at("M").get<int>();
    tokens.max_dof = doc.at("D_max").get<int>();
    const auto& raw = doc.at("raw");
    tokens.raw = RowMatrix::Zero(static_cast<int>(raw.size()), kJointEncodingWidth);
    for (std::size_t r = 0; r < raw.size(); ++r) {
      if (raw[r].size() != static_cast<std::size_t>(kJointEncodingWidth)) {
        fail(ErrorKind::SchemaError, "token row " + std::to_string(r) + " is not 31 wide");
      }
      for (int c = 0; c < kJointEncodingWidth; ++c) tokens.raw(static_cast<int>(r), c) = raw[r][c].get<double>();
    }
    tokens.key_padding_mask = doc.at("pad_mask").get<std::vector<bool>>();
    tokens.revolute_mask = doc.at("rho").get<std::vector<bool>>();
    if (tokens.key_padding_mask.size() != raw.size() || tokens.revolute_mask.size() != raw.size()) {
      fail(ErrorKind::SchemaError, "mask lengths do not match token rows");
    }
    return tokens;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::SchemaError, e.what());
  }
}

}  // namespace crossgrasp
