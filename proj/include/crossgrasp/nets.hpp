#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crossgrasp/eigengrasp.hpp"
#include "crossgrasp/layers.hpp"
#include "crossgrasp/morphology.hpp"
#include "crossgrasp/pointnet.hpp"
#include "crossgrasp/rotation.hpp"

namespace crossgrasp {

using ad::Matrix;
using ad::Tape;
using ad::Var;

struct ModelConfig {
  int token_width = 128;       // d_h
  int morphology_dim = 64;     // d_m
  int eigengrasps = kDefaultEigengraspCount;  // K
  int max_joints = kDefaultMaxJoints;         // M_max
  int max_dof = kDefaultMaxDof;               // D_max
  int morph_depth = 2;
  int morph_heads = 4;
  int amp_depth = 2;
  int amp_heads = 4;
  int ffn_multiplier = 2;
  int joint_embed = 64;
  int link_embed = 32;
  int head_hidden = 64;
  double geometric_scale = 1.0;  // meters, token normalization
  double pose_scale = 0.1;       // meters, wrist translation normalization
  nn::ObjectEncoderConfig object = nn::ObjectEncoderConfig::preset_named("desk");
  std::uint64_t seed = 7;

  /// Conditioned-token width D_max + d_m + |f_obj| + 3 + 6.
  int conditioned_width() const { return max_dof + morphology_dim + object.output_dim() + 9; }

  /// A reduced configuration for gradient checks and fast unit tests.
  static ModelConfig small();

  bool operator==(const ModelConfig& other) const;
};

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& doc);

/// Revolute rows gathered out of the morphology features, padded to D_max.
struct RevoluteSelection {
  Var rows;                // D_max x d_h
  std::vector<bool> valid; // first d entries true
};

struct MorphologyOutput {
  Var embedding;    // 1 x d_m
  Var eigengrasps;  // K x D_max, zero at invalid columns
  std::vector<bool> valid;
};

/// Morphology encoder, object encoder and amplitude predictor sharing one
/// parameter store ("morph.*", "object.*", "amp.*").
class GraspModel {
 public:
  explicit GraspModel(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  ad::ParameterStore& parameters() { return params_; }
  const ad::ParameterStore& parameters() const { return params_; }

  /// Fixed per-feature scaling of the 31-wide joint encodings.
  Matrix normalize_tokens(const MorphologyTokens& tokens) const;

  /// Per-row embedding: separate MLPs for the joint block and each link
  /// primitive block, concatenated, projected to d_h, offset by a learned
  /// per-row position embedding and layer-normalized. Padded rows are zero.
  Var embed_tokens(Tape& tape, const MorphologyTokens& tokens);
  Var embodiment_transformer(Tape& tape, Var x, const std::vector<bool>& row_valid);
  RevoluteSelection select_revolute(Tape& tape, Var h, const MorphologyTokens& tokens) const;
  /// Per-row MLP, learned-query attention pooling over valid rows, projection to d_m.
  Var morphology_head(Tape& tape, const RevoluteSelection& sel);
  /// K heads; head i pools H' with its own query, then scores every row from
  /// [H'_j, pooled_i] to fill e_i[j]. Invalid columns are zero.
  Var eigengrasp_heads(Tape& tape, const RevoluteSelection& sel);
  MorphologyOutput encode_morphology(Tape& tape, const MorphologyTokens& tokens);

  Var encode_object(Tape& tape, const nn::SetAbstractionPlan& plan);

  /// K conditioned tokens [e_i, m, f_obj, t, r6] -> layer norm -> d_h ->
  /// transformer -> per-index amplitude head. Returns 1 x K.
  Var predict_amplitudes(Tape& tape, Var eigengrasps, Var morphology, Var object_feature, const WristPose& wrist);

  /// q (1 x d) = a E restricted to the first d columns.
  static Var decode(Var amplitudes, Var eigengrasps, int dof);

 private:
  ModelConfig cfg_;
  ad::ParameterStore params_;
};

/// (1/K) sum_i |e_i - e*_i|^2.
Var loss_eig(Var predicted, const Matrix& target);
/// (1/d) sum_j w_j (q_j - q*_j)^2.
Var loss_kal(Var q_pred, const Eigen::VectorXd& q_star, const Eigen::VectorXd& weights);
Var total_loss(Var l_eig, Var l_kal);

/// Object autoencoder used to pretrain the object encoder ("object.*", "decoder.*").
class ObjectAutoencoder {
 public:
  ObjectAutoencoder(nn::ObjectEncoderConfig encoder, nn::DecoderConfig decoder, std::uint64_t seed);

  const nn::ObjectEncoderConfig& encoder_config() const { return encoder_; }
  const nn::DecoderConfig& decoder_config() const { return decoder_; }
  ad::ParameterStore& parameters() { return params_; }
  std::uint64_t seed() const { return seed_; }

  Var encode(Tape& tape, const nn::SetAbstractionPlan& plan);
  Var reconstruct(Tape& tape, const nn::SetAbstractionPlan& plan);

 private:
  nn::ObjectEncoderConfig encoder_;
  nn::DecoderConfig decoder_;
  std::uint64_t seed_;
  ad::ParameterStore params_;
};

/// Plain Chamfer distance between two clouds (no tape).
double chamfer_distance(const Matrix& a, const Matrix& b);

}  // namespace crossgrasp
