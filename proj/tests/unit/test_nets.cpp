#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "crossgrasp/errors.hpp"
#include "crossgrasp/kinematics.hpp"
#include "crossgrasp/nets.hpp"
#include "op_fuzz.hpp"
#include "support.hpp"

using namespace crossgrasp;
using testing_support::load_fixture;

namespace {

Matrix random_cloud(int n, std::uint64_t seed, double scale = 0.05) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(n, 3);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  m.rowwise() -= m.colwise().mean();
  return m;
}

WristPose some_wrist() {
  WristPose w;
  w.t = Eigen::Vector3d(0.01, -0.02, -0.08);
  w.r6 << 0.8, 0.6, 0, -0.6, 0.8, 0;
  return w;
}

struct Outputs {
  Matrix m, E, a, q;
};

Outputs run_model(GraspModel& model, const MorphologyTokens& tokens, const Matrix& cloud, const WristPose& wrist) {
  Tape tape;
  MorphologyOutput morph = model.encode_morphology(tape, tokens);
  Var f = model.encode_object(tape, nn::plan_set_abstraction(cloud, model.config().object));
  Var a = model.predict_amplitudes(tape, morph.eigengrasps, morph.embedding, f, wrist);
  Var q = GraspModel::decode(a, morph.eigengrasps, tokens.dof());
  return {morph.embedding.value(), morph.eigengrasps.value(), a.value(), q.value()};
}

Matrix object_feature(GraspModel& model, const Matrix& cloud) {
  Tape tape;
  return model.encode_object(tape, nn::plan_set_abstraction(cloud, model.config().object)).value();
}

void poison_padding(MorphologyTokens& tokens, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 50.0);
  for (int r = tokens.joint_count; r < tokens.max_joints(); ++r)
    for (int c = 0; c < kJointEncodingWidth; ++c) tokens.raw(r, c) = n(rng);
}

}  // namespace

TEST(Embedding, DefaultShapeAndZeroPadding) {
  GraspModel model(ModelConfig{});
  const MorphologyTokens tokens = tokenize(load_fixture("three_finger.urdf"));
  Tape tape;
  const Matrix x = model.embed_tokens(tape, tokens).value();
  EXPECT_EQ(x.rows(), 32);
  EXPECT_EQ(x.cols(), 128);
  EXPECT_EQ(x.bottomRows(32 - 12).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT(x.topRows(12).rowwise().norm().minCoeff(), 0.0);
}

TEST(Embedding, RowsIndependentOfPaddingAmount) {
  GraspModel model(ModelConfig::small());
  const HandModel hand = load_fixture("two_finger.urdf");
  const auto enc = build_joint_encodings(hand);
  std::vector<bool> revolute;
  for (const auto& j : hand.joints()) revolute.push_back(j.kind == JointKind::Revolute);
  const MorphologyTokens full = pad_and_mask(enc, revolute, 8, 6);
  const std::span<const JointEncoding> head(enc.data(), 4);
  const MorphologyTokens shorter = pad_and_mask(head, {revolute.begin(), revolute.begin() + 4}, 8, 6);
  Tape t1, t2;
  const Matrix a = model.embed_tokens(t1, full).value();
  const Matrix b = model.embed_tokens(t2, shorter).value();
  EXPECT_EQ(a.topRows(4), b.topRows(4));
  EXPECT_EQ(b.bottomRows(4).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Embedding, ShapeMismatch) {
  GraspModel model(ModelConfig::small());
  const MorphologyTokens tokens = tokenize(load_fixture("two_finger.urdf"), 16, 6);
  Tape tape;
  EXPECT_ERROR_KIND(model.embed_tokens(tape, tokens), ShapeMismatch);
}

TEST(Transformer, DepthZeroIsIdentity) {
  ModelConfig cfg = ModelConfig::small();
  cfg.morph_depth = 0;
  GraspModel model(cfg);
  const MorphologyTokens tokens = tokenize(load_fixture("two_finger.urdf"), 8, 6);
  Tape tape;
  const Var x = model.embed_tokens(tape, tokens);
  std::vector<bool> valid;
  for (bool pad : tokens.key_padding_mask) valid.push_back(!pad);
  EXPECT_EQ(model.embodiment_transformer(tape, x, valid).value(), x.value());
}

TEST(Transformer, PaddedRowsDoNotLeak) {
  GraspModel model(ModelConfig::small());
  MorphologyTokens tokens = tokenize(load_fixture("two_finger.urdf"), 8, 6);
  std::vector<bool> valid;
  for (bool pad : tokens.key_padding_mask) valid.push_back(!pad);
  Tape t1;
  const Matrix h1 = model.embodiment_transformer(t1, model.embed_tokens(t1, tokens), valid).value();
  // feed arbitrary values straight into the padded rows of X
  Tape t2;
  Matrix x = model.embed_tokens(t2, tokens).value();
  std::mt19937_64 rng(3);
  x.bottomRows(2) = op_fuzz::random_matrix(2, x.cols(), rng) * 10.0;
  const Matrix h2 = model.embodiment_transformer(t2, t2.constant(x), valid).value();
  EXPECT_EQ(h1, h2);
  EXPECT_EQ(h2.bottomRows(2).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Selection, GathersRevoluteRowsInOrder) {
  GraspModel model(ModelConfig{});
  const HandModel hand = load_fixture("three_finger.urdf");
  const MorphologyTokens tokens = tokenize(hand);
  Tape tape;
  const Var h = model.embed_tokens(tape, tokens);
  const RevoluteSelection sel = model.select_revolute(tape, h, tokens);
  ASSERT_EQ(sel.rows.rows(), 24);
  const auto rows = tokens.revolute_rows();
  ASSERT_EQ(rows.size(), 9u);
  for (int i = 0; i < 9; ++i) {
    EXPECT_TRUE(sel.valid[static_cast<std::size_t>(i)]);
    EXPECT_EQ(sel.rows.value().row(i), h.value().row(rows[static_cast<std::size_t>(i)]));
  }
  for (int i = 9; i < 24; ++i) {
    EXPECT_FALSE(sel.valid[static_cast<std::size_t>(i)]);
    EXPECT_EQ(sel.rows.value().row(i).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Selection, NoRevoluteRowsAndCapacity) {
  GraspModel model(ModelConfig::small());
  const HandModel fixed_only = parse_urdf(R"(<robot name="r"><link name="a"/><link name="b"/>
    <joint name="j" type="fixed"><parent link="a"/><child link="b"/></joint></robot>)");
  const MorphologyTokens tokens = tokenize(fixed_only, 8, 6);
  Tape tape;
  const RevoluteSelection sel = model.select_revolute(tape, model.embed_tokens(tape, tokens), tokens);
  EXPECT_EQ(sel.rows.value().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE(std::none_of(sel.valid.begin(), sel.valid.end(), [](bool v) { return v; }));
  EXPECT_ERROR_KIND(model.morphology_head(tape, sel), AllMasked);
  EXPECT_ERROR_KIND(model.eigengrasp_heads(tape, sel), AllMasked);

  const MorphologyTokens wide = tokenize(load_fixture("three_finger.urdf"), 12, 24);
  ModelConfig cfg = ModelConfig::small();
  cfg.max_joints = 12;
  GraspModel wider(cfg);
  Tape t2;
  EXPECT_ERROR_KIND(wider.select_revolute(t2, wider.embed_tokens(t2, wide), wide), CapacityExceeded);
}

TEST(AttentionPool, SingleValidRowGetsAllWeight) {
  nn::Rng rng(4);
  ad::ParameterStore ps;
  nn::init_attention_pool(ps, "pool", 5, rng);
  std::mt19937_64 r2(5);
  const Matrix x = op_fuzz::random_matrix(4, 5, r2);
  Tape tape;
  const Matrix pooled = nn::attention_pool(tape, ps, "pool", tape.constant(x), {false, false, true, false}).value();
  EXPECT_LT((pooled - x.row(2)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(MorphologyHead, DistinguishesHands) {
  GraspModel model(ModelConfig::small());
  Tape tape;
  const Matrix a = model.encode_morphology(tape, tokenize(load_fixture("two_finger.urdf"), 8, 6)).embedding.value();
  const Matrix b = model.encode_morphology(tape, tokenize(load_fixture("planar_finger.urdf"), 8, 6)).embedding.value();
  EXPECT_EQ(a.cols(), 4);
  EXPECT_GT((a - b).norm(), 1e-6);
}

TEST(EigengraspHeads, ShapeAndMaskedColumns) {
  GraspModel model(ModelConfig{});
  Tape tape;
  const MorphologyOutput out = model.encode_morphology(tape, tokenize(load_fixture("three_finger.urdf")));
  const Matrix E = out.eigengrasps.value();
  EXPECT_EQ(E.rows(), 9);
  EXPECT_EQ(E.cols(), 24);
  EXPECT_EQ(E.rightCols(15).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT(E.leftCols(9).cwiseAbs().minCoeff(), 0.0);
}

TEST(EndToEnd, PaddedRowMutationChangesNothing) {
  GraspModel model(ModelConfig::small());
  const MorphologyTokens clean = tokenize(load_fixture("two_finger.urdf"), 8, 6);
  const Matrix cloud = random_cloud(64, 1);
  const Outputs ref = run_model(model, clean, cloud, some_wrist());
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    MorphologyTokens poisoned = clean;
    poison_padding(poisoned, rng);
    const Outputs out = run_model(model, poisoned, cloud, some_wrist());
    EXPECT_EQ(out.m, ref.m);
    EXPECT_EQ(out.E, ref.E);
    EXPECT_EQ(out.a, ref.a);
    EXPECT_EQ(out.q, ref.q);
  }
}

TEST(EndToEnd, DecodeIsExactLinearMap) {
  GraspModel model(ModelConfig::small());
  const MorphologyTokens tokens = tokenize(load_fixture("two_finger.urdf"), 8, 6);
  const Outputs out = run_model(model, tokens, random_cloud(64, 2), some_wrist());
  const Matrix q = (out.a * out.E).leftCols(4);
  EXPECT_EQ(out.q, q);
}

TEST(ObjectEncoder, SetFunctionInvariances) {
  GraspModel model(ModelConfig{});
  const Matrix cloud = random_cloud(300, 7);
  const Matrix ref = object_feature(model, cloud);
  EXPECT_EQ(ref.cols(), 128);

  std::vector<int> perm(300);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(8));
  Matrix shuffled(300, 3);
  for (int i = 0; i < 300; ++i) shuffled.row(i) = cloud.row(perm[static_cast<std::size_t>(i)]);
  EXPECT_LT((object_feature(model, shuffled) - ref).cwiseAbs().maxCoeff(), 1e-6);

  Matrix doubled(600, 3);
  doubled << cloud, cloud;
  EXPECT_LT((object_feature(model, doubled) - ref).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(ObjectEncoder, PaperPresetWidth) {
  ModelConfig cfg;
  cfg.object = nn::ObjectEncoderConfig::preset_named("paper");
  GraspModel model(cfg);
  EXPECT_EQ(object_feature(model, random_cloud(256, 9)).cols(), 1024);
  EXPECT_EQ(cfg.conditioned_width(), 24 + 64 + 1024 + 9);
}

TEST(ObjectEncoder, EmptyCloud) {
  GraspModel model(ModelConfig::small());
  EXPECT_ERROR_KIND(object_feature(model, Matrix(0, 3)), EmptyCloud);
}

TEST(Decoder, ShapeAndZeroEmbedding) {
  nn::DecoderConfig dc;
  dc.points = 40;
  dc.hidden = 16;
  ObjectAutoencoder ae(nn::ObjectEncoderConfig::preset_named("tiny"), dc, 3);
  Tape t1, t2;
  const Var zero1 = t1.constant(Matrix::Zero(1, ae.encoder_config().output_dim()));
  const Var zero2 = t2.constant(Matrix::Zero(1, ae.encoder_config().output_dim()));
  const Matrix a = nn::pointcloud_decoder(t1, ae.parameters(), dc, zero1).value();
  const Matrix b = nn::pointcloud_decoder(t2, ae.parameters(), dc, zero2).value();
  EXPECT_EQ(a.rows(), 40);
  EXPECT_EQ(a.cols(), 3);
  EXPECT_EQ(a, b);
  Tape t3;
  EXPECT_EQ(ae.reconstruct(t3, nn::plan_set_abstraction(random_cloud(50, 1), ae.encoder_config())).rows(), 40);
}

TEST(Chamfer, Cases) {
  Matrix p(1, 3), q(1, 3);
  p << 0, 0, 0;
  q << 1, 0, 0;
  EXPECT_EQ(chamfer_distance(q, p), 2.0);
  const Matrix a = random_cloud(30, 10), b = random_cloud(17, 11);
  EXPECT_EQ(chamfer_distance(a, a), 0.0);
  EXPECT_DOUBLE_EQ(chamfer_distance(a, b), chamfer_distance(b, a));
  EXPECT_ERROR_KIND(chamfer_distance(Matrix(0, 3), a), EmptyCloud);
}

TEST(AmplitudePredictor, LengthAndDeterminism) {
  GraspModel model(ModelConfig{});
  const MorphologyTokens tokens = tokenize(load_fixture("three_finger.urdf"));
  const Matrix cloud = random_cloud(128, 12);
  const Outputs a = run_model(model, tokens, cloud, some_wrist());
  const Outputs b = run_model(model, tokens, cloud, some_wrist());
  EXPECT_EQ(a.a.cols(), 9);
  EXPECT_EQ(a.a, b.a);
  EXPECT_EQ(a.q.cols(), 9);
}

TEST(AmplitudePredictor, PerHeadIndependence) {
  GraspModel model(ModelConfig::small());
  model.parameters().at("amp.head1.l1.weight").value.setZero();
  model.parameters().at("amp.head1.l1.bias").value.setConstant(0.37);
  const MorphologyTokens tokens = tokenize(load_fixture("two_finger.urdf"), 8, 6);
  const Outputs a = run_model(model, tokens, random_cloud(64, 13), some_wrist());
  WristPose other = some_wrist();
  other.t *= -2.0;
  const Outputs b = run_model(model, tokens, random_cloud(64, 14), other);
  EXPECT_EQ(a.a(0, 1), 0.37);
  EXPECT_EQ(b.a(0, 1), 0.37);
  EXPECT_NE(a.a(0, 0), b.a(0, 0));
  EXPECT_NE(a.a(0, 2), b.a(0, 2));
}

TEST(Losses, EigMatchesDoubleLoop) {
  std::mt19937_64 rng(15);
  const Matrix p = op_fuzz::random_matrix(3, 4, rng), t = op_fuzz::random_matrix(3, 4, rng);
  double brute = 0.0;
  for (int i = 0; i < 3; ++i) {
    double row = 0.0;
    for (int j = 0; j < 4; ++j) row += (p(i, j) - t(i, j)) * (p(i, j) - t(i, j));
    brute += row;
  }
  brute /= 3.0;
  Tape tape;
  EXPECT_NEAR(loss_eig(tape.constant(p), t).scalar(), brute, 1e-14);
  EXPECT_EQ(loss_eig(tape.constant(t), t).scalar(), 0.0);
  Matrix one = t;
  one(1, 2) += 1.0;
  EXPECT_NEAR(loss_eig(tape.constant(one), t).scalar(), 1.0 / 3.0, 1e-15);
  EXPECT_ERROR_KIND(loss_eig(tape.constant(p), Matrix::Zero(2, 4)), ShapeMismatch);
}

TEST(Losses, KalByHandAndMseIdentity) {
  Tape tape;
  Matrix pred(1, 2);
  pred << 0.1, 0.2;
  EXPECT_NEAR(loss_kal(tape.constant(pred), Eigen::Vector2d::Zero(), Eigen::Vector2d(1.2, 0.8)).scalar(), 0.022, 1e-15);
  EXPECT_EQ(loss_kal(tape.constant(pred), Eigen::Vector2d(0.1, 0.2), Eigen::Vector2d(1.2, 0.8)).scalar(), 0.0);
  EXPECT_ERROR_KIND(loss_kal(tape.constant(pred), Eigen::Vector3d::Zero(), Eigen::Vector3d::Ones()), DimensionMismatch);

  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix a = op_fuzz::random_matrix(1, 9, rng), b = op_fuzz::random_matrix(1, 9, rng);
    const double kal = loss_kal(tape.constant(a), b.row(0).transpose(), Eigen::VectorXd::Ones(9)).scalar();
    EXPECT_EQ(kal, ad::mse(tape.constant(a), tape.constant(b)).scalar());
  }
}

TEST(Losses, TotalIsSum) {
  Tape tape;
  EXPECT_EQ(total_loss(tape.constant(Matrix::Constant(1, 1, 0.5)), tape.constant(Matrix::Constant(1, 1, 0.25))).scalar(), 0.75);
  EXPECT_EQ(total_loss(tape.constant(Matrix::Zero(1, 1)), tape.constant(Matrix::Zero(1, 1))).scalar(), 0.0);
}

TEST(Gradcheck, ComposedLossSmallConfig) {
  GraspModel model(ModelConfig::small());
  const HandModel hand = load_fixture("two_finger.urdf");
  const MorphologyTokens tokens = tokenize(hand, 8, 6);
  const nn::SetAbstractionPlan plan = nn::plan_set_abstraction(random_cloud(48, 17), model.config().object);
  std::mt19937_64 rng(18);
  const Matrix target = op_fuzz::random_matrix(3, 6, rng).leftCols(6);
  Matrix e_star = Matrix::Zero(3, 6);
  e_star.leftCols(4) = target.leftCols(4);
  const Eigen::VectorXd q_star = Eigen::VectorXd::LinSpaced(4, 0.1, 0.9);
  const Eigen::VectorXd w = kal_weights(hand, q_star).w;
  const auto report = ad::gradcheck(
      [&](Tape& tape) {
        MorphologyOutput morph = model.encode_morphology(tape, tokens);
        Var f = model.encode_object(tape, plan);
        Var a = model.predict_amplitudes(tape, morph.eigengrasps, morph.embedding, f, some_wrist());
        Var q = GraspModel::decode(a, morph.eigengrasps, 4);
        return total_loss(loss_eig(morph.eigengrasps, e_star), loss_kal(q, q_star, w));
      },
      model.parameters(), 1e-6, static_cast<std::size_t>(-1), 0, 1e-5);
  EXPECT_LT(report.max_rel_error, 1e-4) << report.worst_parameter;
  EXPECT_EQ(report.checked, model.parameters().scalar_count());
}

TEST(Config, JsonRoundTrip) {
  const ModelConfig cfg = ModelConfig::small();
  EXPECT_TRUE(model_config_from_json(to_json(cfg)) == cfg);
  nlohmann::json broken = to_json(cfg);
  broken.erase("token_width");
  EXPECT_ERROR_KIND(model_config_from_json(broken), ConfigMismatch);
}
