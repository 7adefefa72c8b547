#include "crossgrasp/nets.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "crossgrasp/errors.hpp"

namespace crossgrasp {

namespace {

// Output layers of the eigengrasp and amplitude heads start small so the
// initial articulation is close to zero.
constexpr double kHeadInitScale = 0.1;

}  // namespace

ModelConfig ModelConfig::small() {
  ModelConfig cfg;
  cfg.token_width = 8;
  cfg.morphology_dim = 4;
  cfg.eigengrasps = 3;
  cfg.max_joints = 8;
  cfg.max_dof = 6;
  cfg.morph_depth = 1;
  cfg.morph_heads = 2;
  cfg.amp_depth = 1;
  cfg.amp_heads = 2;
  cfg.ffn_multiplier = 2;
  cfg.joint_embed = 6;
  cfg.link_embed = 4;
  cfg.head_hidden = 6;
  cfg.object = nn::ObjectEncoderConfig::preset_named("tiny");
  return cfg;
}

bool ModelConfig::operator==(const ModelConfig& other) const { return to_json(*this) == to_json(other); }

nlohmann::json to_json(const ModelConfig& cfg) {
  return {{"token_width", cfg.token_width},
          {"morphology_dim", cfg.morphology_dim},
          {"eigengrasps", cfg.eigengrasps},
          {"max_joints", cfg.max_joints},
          {"max_dof", cfg.max_dof},
          {"morph_depth", cfg.morph_depth},
          {"morph_heads", cfg.morph_heads},
          {"amp_depth", cfg.amp_depth},
          {"amp_heads", cfg.amp_heads},
          {"ffn_multiplier", cfg.ffn_multiplier},
          {"joint_embed", cfg.joint_embed},
          {"link_embed", cfg.link_embed},
          {"head_hidden", cfg.head_hidden},
          {"geometric_scale", cfg.geometric_scale},
          {"pose_scale", cfg.pose_scale},
          {"object", nn::to_json(cfg.object)},
          {"seed", cfg.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& doc) {
  try {
    ModelConfig cfg;
    cfg.token_width = doc.at("token_width").get<int>();
    cfg.morphology_dim = doc.at("morphology_dim").get<int>();
    cfg.eigengrasps = doc.at("eigengrasps").get<int>();
    cfg.max_joints = doc.at("max_joints").get<int>();
    cfg.max_dof = doc.at("max_dof").get<int>();
    cfg.morph_depth = doc.at("morph_depth").get<int>();
    cfg.morph_heads = doc.at("morph_heads").get<int>();
    cfg.amp_depth = doc.at("amp_depth").get<int>();
    cfg.amp_heads = doc.at("amp_heads").get<int>();
    cfg.ffn_multiplier = doc.at("ffn_multiplier").get<int>();
    cfg.joint_embed = doc.at("joint_embed").get<int>();
    cfg.link_embed = doc.at("link_embed").get<int>();
    cfg.head_hidden = doc.at("head_hidden").get<int>();
    cfg.geometric_scale = doc.at("geometric_scale").get<double>();
    cfg.pose_scale = doc.at("pose_scale").get<double>();
    cfg.object = nn::object_encoder_config_from_json(doc.at("object"));
    cfg.seed = doc.at("seed").get<std::uint64_t>();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ConfigMismatch, std::string("bad model config: ") + e.what());
  }
}

GraspModel::GraspModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.eigengrasps < 1 || cfg_.max_dof < 1 || cfg_.max_joints < 1) fail(ErrorKind::ConfigMismatch, "model sizes must be positive");
  nn::Rng rng(cfg_.seed);
  const int dh = cfg_.token_width;
  nn::init_mlp(params_, "morph.embed.joint", {11, cfg_.joint_embed, cfg_.joint_embed}, rng);
  nn::init_mlp(params_, "morph.embed.parent", {kPrimitiveWidth, cfg_.link_embed, cfg_.link_embed}, rng);
  nn::init_mlp(params_, "morph.embed.child", {kPrimitiveWidth, cfg_.link_embed, cfg_.link_embed}, rng);
  nn::init_linear(params_, "morph.embed.proj", cfg_.joint_embed + 2 * cfg_.link_embed, dh, rng);
  {
    std::normal_distribution<double> dist(0.0, 0.02);
    Matrix position(cfg_.max_joints, dh);
    for (Eigen::Index i = 0; i < position.size(); ++i) position.data()[i] = dist(rng);
    params_.add("morph.embed.position", std::move(position));
  }
  nn::init_layer_norm(params_, "morph.embed.norm", dh);
  for (int i = 0; i < cfg_.morph_depth; ++i) {
    nn::init_encoder_layer(params_, "morph.layer" + std::to_string(i), dh, dh * cfg_.ffn_multiplier, rng);
  }
  if (cfg_.morph_depth > 0) nn::init_layer_norm(params_, "morph.final_norm", dh);

  nn::init_mlp(params_, "morph.head.mlp", {dh, dh}, rng);
  nn::init_attention_pool(params_, "morph.head.pool", dh, rng);
  nn::init_linear(params_, "morph.head.out", dh, cfg_.morphology_dim, rng);
  for (int i = 0; i < cfg_.eigengrasps; ++i) {
    const std::string name = "morph.eig" + std::to_string(i);
    nn::init_attention_pool(params_, name + ".pool", dh, rng);
    nn::init_mlp(params_, name + ".score", {2 * dh, cfg_.head_hidden, 1}, rng);
    params_.at(name + ".score.l1.weight").value *= kHeadInitScale;
  }

  nn::init_object_encoder(params_, cfg_.object, rng, "object");

  nn::init_layer_norm(params_, "amp.in_norm", cfg_.conditioned_width());
  nn::init_linear(params_, "amp.proj", cfg_.conditioned_width(), dh, rng);
  for (int i = 0; i < cfg_.amp_depth; ++i) {
    nn::init_encoder_layer(params_, "amp.layer" + std::to_string(i), dh, dh * cfg_.ffn_multiplier, rng);
  }
  nn::init_layer_norm(params_, "amp.out_norm", dh);
  for (int i = 0; i < cfg_.eigengrasps; ++i) {
    nn::init_mlp(params_, "amp.head" + std::to_string(i), {dh, cfg_.head_hidden, 1}, rng);
    params_.at("amp.head" + std::to_string(i) + ".l1.weight").value *= kHeadInitScale;
  }
}

Matrix GraspModel::normalize_tokens(const MorphologyTokens& tokens) const {
  if (tokens.raw.cols() != kJointEncodingWidth || tokens.raw.rows() != cfg_.max_joints) {
    fail(ErrorKind::ShapeMismatch, "tokens are " + std::to_string(tokens.raw.rows()) + "x" +
                                       std::to_string(tokens.raw.cols()) + ", model expects " +
                                       std::to_string(cfg_.max_joints) + "x31");
  }
  const double ang = 1.0 / std::numbers::pi;
  const double len = 1.0 / cfg_.geometric_scale;
  Eigen::RowVectorXd scale(kJointEncodingWidth);
  scale << ang, ang,                     // limits
      ang, ang, ang, len, len, len,      // origin
      1, 1, 1,                           // axis
      1.0 / 3, ang, ang, ang, len, len, len, len, len, len,   // parent primitive
      1.0 / 3, ang, ang, ang, len, len, len, len, len, len;   // child primitive
  Matrix out = Matrix::Zero(tokens.raw.rows(), kJointEncodingWidth);
  for (Eigen::Index r = 0; r < tokens.raw.rows(); ++r) {
    if (!tokens.key_padding_mask[r]) out.row(r) = tokens.raw.row(r).cwiseProduct(scale);
  }
  return out;
}

Var GraspModel::embed_tokens(Tape& tape, const MorphologyTokens& tokens) {
  const Matrix normalized = normalize_tokens(tokens);
  std::vector<bool> valid(tokens.key_padding_mask.size());
  for (std::size_t i = 0; i < valid.size(); ++i) valid[i] = !tokens.key_padding_mask[i];

  Var joint = tape.constant(normalized.leftCols(11));
  Var parent = tape.constant(normalized.middleCols(11, kPrimitiveWidth));
  Var child = tape.constant(normalized.middleCols(21, kPrimitiveWidth));
  const Var parts[] = {
      nn::mlp(tape, params_, "morph.embed.joint", joint, 2, nn::Activation::Gelu, true),
      nn::mlp(tape, params_, "morph.embed.parent", parent, 2, nn::Activation::Gelu, true),
      nn::mlp(tape, params_, "morph.embed.child", child, 2, nn::Activation::Gelu, true),
  };
  Var x = nn::linear(tape, params_, "morph.embed.proj", ad::concat_cols(parts));
  x = ad::add(x, tape.parameter(params_.at("morph.embed.position")));
  x = nn::layer_norm(tape, params_, "morph.embed.norm", x);
  return ad::mask_rows(x, valid);
}

Var GraspModel::embodiment_transformer(Tape& tape, Var x, const std::vector<bool>& row_valid) {
  if (x.cols() != cfg_.token_width) fail(ErrorKind::ShapeMismatch, "embodiment transformer input width mismatch");
  for (int i = 0; i < cfg_.morph_depth; ++i) {
    x = nn::encoder_layer(tape, params_, "morph.layer" + std::to_string(i), x, cfg_.morph_heads, row_valid);
  }
  if (cfg_.morph_depth > 0) x = ad::mask_rows(nn::layer_norm(tape, params_, "morph.final_norm", x), row_valid);
  return x;
}

RevoluteSelection GraspModel::select_revolute(Tape&, Var h, const MorphologyTokens& tokens) const {
  const auto rows = tokens.revolute_rows();
  if (static_cast<int>(rows.size()) > cfg_.max_dof) {
    fail(ErrorKind::CapacityExceeded,
         std::to_string(rows.size()) + " revolute joints exceed D_max = " + std::to_string(cfg_.max_dof));
  }
  std::vector<int> idx(static_cast<std::size_t>(cfg_.max_dof), -1);
  std::vector<bool> valid(static_cast<std::size_t>(cfg_.max_dof), false);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    idx[i] = rows[i];
    valid[i] = true;
  }
  return {ad::gather_rows(h, idx), valid};
}

namespace {

void require_valid_rows(const std::vector<bool>& valid, const char* who) {
  for (bool v : valid) {
    if (v) return;
  }
  fail(ErrorKind::AllMasked, std::string(who) + ": every row is masked");
}

}  // namespace

Var GraspModel::morphology_head(Tape& tape, const RevoluteSelection& sel) {
  require_valid_rows(sel.valid, "morphology head");
  Var rows = nn::mlp(tape, params_, "morph.head.mlp", sel.rows, 1, nn::Activation::Gelu, true);
  Var pooled = nn::attention_pool(tape, params_, "morph.head.pool", rows, sel.valid);
  return nn::linear(tape, params_, "morph.head.out", pooled);
}

Var GraspModel::eigengrasp_heads(Tape& tape, const RevoluteSelection& sel) {
  require_valid_rows(sel.valid, "eigengrasp heads");
  std::vector<Var> heads;
  heads.reserve(static_cast<std::size_t>(cfg_.eigengrasps));
  for (int i = 0; i < cfg_.eigengrasps; ++i) {
    const std::string name = "morph.eig" + std::to_string(i);
    Var pooled = nn::attention_pool(tape, params_, name + ".pool", sel.rows, sel.valid);
    const Var parts[] = {sel.rows, ad::repeat_rows(pooled, sel.rows.rows())};
    Var scores = nn::mlp(tape, params_, name + ".score", ad::concat_cols(parts), 2, nn::Activation::Gelu, false);
    heads.push_back(ad::mask_cols(ad::transpose(scores), sel.valid));
  }
  return ad::concat_rows(heads);
}

MorphologyOutput GraspModel::encode_morphology(Tape& tape, const MorphologyTokens& tokens) {
  std::vector<bool> valid(tokens.key_padding_mask.size());
  for (std::size_t i = 0; i < valid.size(); ++i) valid[i] = !tokens.key_padding_mask[i];
  Var x = embed_tokens(tape, tokens);
  Var h = embodiment_transformer(tape, x, valid);
  RevoluteSelection sel = select_revolute(tape, h, tokens);
  return {morphology_head(tape, sel), eigengrasp_heads(tape, sel), sel.valid};
}

Var GraspModel::encode_object(Tape& tape, const nn::SetAbstractionPlan& plan) {
  return nn::object_encoder(tape, params_, cfg_.object, plan, "object");
}

Var GraspModel::predict_amplitudes(Tape& tape, Var eigengrasps, Var morphology, Var object_feature,
                                   const WristPose& wrist) {
  const int k = cfg_.eigengrasps;
  if (eigengrasps.rows() != k || eigengrasps.cols() != cfg_.max_dof) fail(ErrorKind::ShapeMismatch, "eigengrasps must be K x D_max");
  if (morphology.rows() != 1 || morphology.cols() != cfg_.morphology_dim) fail(ErrorKind::ShapeMismatch, "morphology embedding width mismatch");
  if (object_feature.rows() != 1 || object_feature.cols() != cfg_.object.output_dim()) {
    fail(ErrorKind::ShapeMismatch, "object feature width mismatch");
  }
  Matrix pose(1, 9);
  pose.leftCols(3) = wrist.t.transpose() / cfg_.pose_scale;
  pose.rightCols(6) = wrist.r6.transpose();
  const Var parts[] = {eigengrasps, ad::repeat_rows(morphology, k), ad::repeat_rows(object_feature, k),
                       ad::repeat_rows(tape.constant(pose), k)};
  Var tokens = nn::layer_norm(tape, params_, "amp.in_norm", ad::concat_cols(parts));
  Var z = nn::linear(tape, params_, "amp.proj", tokens);
  for (int i = 0; i < cfg_.amp_depth; ++i) z = nn::encoder_layer(tape, params_, "amp.layer" + std::to_string(i), z, cfg_.amp_heads, {});
  z = nn::layer_norm(tape, params_, "amp.out_norm", z);
  std::vector<Var> amplitudes;
  amplitudes.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    amplitudes.push_back(nn::mlp(tape, params_, "amp.head" + std::to_string(i), ad::slice_rows(z, i, 1), 2,
                                 nn::Activation::Gelu, false));
  }
  return ad::concat_cols(amplitudes);
}

Var GraspModel::decode(Var amplitudes, Var eigengrasps, int dof) {
  if (amplitudes.rows() != 1 || amplitudes.cols() != eigengrasps.rows()) fail(ErrorKind::DimensionMismatch, "amplitudes do not match eigengrasp count");
  return ad::slice_cols(ad::matmul(amplitudes, eigengrasps), 0, dof);
}

Var loss_eig(Var predicted, const Matrix& target) {
  if (predicted.rows() != target.rows() || predicted.cols() != target.cols()) {
    fail(ErrorKind::ShapeMismatch, "eigengrasp loss operands differ in shape");
  }
  Var diff = ad::sub(predicted, predicted.tape()->constant(target));
  return ad::scale(ad::sum(ad::mul(diff, diff)), 1.0 / static_cast<double>(target.rows()));
}

Var loss_kal(Var q_pred, const Eigen::VectorXd& q_star, const Eigen::VectorXd& weights) {
  if (q_pred.rows() != 1 || q_pred.cols() != q_star.size() || weights.size() != q_star.size()) {
    fail(ErrorKind::DimensionMismatch, "articulation loss operands differ in length");
  }
  return ad::weighted_mse(q_pred, q_pred.tape()->constant(q_star.transpose()), weights.transpose());
}

Var total_loss(Var l_eig, Var l_kal) { return ad::add(l_eig, l_kal); }

ObjectAutoencoder::ObjectAutoencoder(nn::ObjectEncoderConfig encoder, nn::DecoderConfig decoder, std::uint64_t seed)
    : encoder_(std::move(encoder)), decoder_(decoder), seed_(seed) {
  nn::Rng rng(seed);
  nn::init_object_encoder(params_, encoder_, rng, "object");
  nn::init_pointcloud_decoder(params_, encoder_.output_dim(), decoder_, rng, "decoder");
}

Var ObjectAutoencoder::encode(Tape& tape, const nn::SetAbstractionPlan& plan) {
  return nn::object_encoder(tape, params_, encoder_, plan, "object");
}

Var ObjectAutoencoder::reconstruct(Tape& tape, const nn::SetAbstractionPlan& plan) {
  return nn::pointcloud_decoder(tape, params_, decoder_, encode(tape, plan), "decoder");
}

double chamfer_distance(const Matrix& a, const Matrix& b) {
  Tape tape;
  return ad::chamfer(tape.constant(a), b).scalar();
}

}  // namespace crossgrasp
