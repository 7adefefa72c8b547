#include "crossgrasp/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <sstream>

#include "crossgrasp/errors.hpp"

namespace crossgrasp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_header(const json& doc, const std::string& kind) {
  if (!doc.is_object() || doc.value("format", "") != "crossgrasp.checkpoint") {
    fail(ErrorKind::SchemaError, "not a crossgrasp checkpoint");
  }
  if (doc.value("version", -1) != kCheckpointVersion) {
    fail(ErrorKind::SchemaError, "unsupported checkpoint version " + doc.value("version", json(-1)).dump());
  }
  if (doc.value("kind", "") != kind) {
    fail(ErrorKind::ConfigMismatch, "checkpoint holds a '" + doc.value("kind", std::string("?")) + "', expected '" + kind + "'");
  }
}

json metrics_to_json(const std::vector<EpochMetrics>& metrics) {
  json rows = json::array();
  for (const auto& m : metrics) rows.push_back({m.epoch, m.l_eig, m.l_kal, m.l_total, m.wall_time_s});
  return rows;
}

std::vector<EpochMetrics> metrics_from_json(const json& rows) {
  std::vector<EpochMetrics> out;
  for (const auto& r : rows) out.push_back({r.at(0).get<int>(), r.at(1).get<double>(), r.at(2).get<double>(),
                                            r.at(3).get<double>(), r.at(4).get<double>()});
  return out;
}

}  // namespace

std::string metrics_csv(const std::vector<EpochMetrics>& metrics) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "epoch,L_eig,L_KAL,L_total,wall_time_s\n";
  for (const auto& m : metrics) out << m.epoch << ',' << m.l_eig << ',' << m.l_kal << ',' << m.l_total << ',' << m.wall_time_s << '\n';
  return out.str();
}

json to_json(const TrainConfig& cfg) {
  const auto& a = cfg.augmentation;
  return {{"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"lr", cfg.lr},
          {"cosine_decay", cfg.cosine_decay},
          {"min_lr_fraction", cfg.min_lr_fraction},
          {"loss", cfg.mse_loss ? "mse" : "kal"},
          {"teacher_forcing", cfg.teacher_forcing},
          {"freeze_object", cfg.freeze_object},
          {"augment", cfg.augment},
          {"augmentation",
           {{"rot_range_deg", a.rot_range_deg},
            {"sigma_pcl", a.sigma_pcl},
            {"sigma_trans", a.sigma_trans},
            {"sigma_rot", a.sigma_rot},
            {"sigma_art", a.sigma_art},
            {"seed", a.seed}}},
          {"lambda", std::vector<double>(cfg.lambda.data(), cfg.lambda.data() + 6)},
          {"seed", cfg.seed}};
}

TrainConfig train_config_from_json(const json& doc) {
  try {
    TrainConfig cfg;
    cfg.epochs = doc.at("epochs").get<int>();
    cfg.batch_size = doc.at("batch_size").get<int>();
    cfg.lr = doc.at("lr").get<double>();
    cfg.cosine_decay = doc.at("cosine_decay").get<bool>();
    cfg.min_lr_fraction = doc.at("min_lr_fraction").get<double>();
    cfg.mse_loss = doc.at("loss").get<std::string>() == "mse";
    cfg.teacher_forcing = doc.at("teacher_forcing").get<bool>();
    cfg.freeze_object = doc.at("freeze_object").get<bool>();
    cfg.augment = doc.at("augment").get<bool>();
    const json& a = doc.at("augmentation");
    cfg.augmentation = {a.at("rot_range_deg").get<double>(), a.at("sigma_pcl").get<double>(),
                        a.at("sigma_trans").get<double>(),   a.at("sigma_rot").get<double>(),
                        a.at("sigma_art").get<double>(),     a.at("seed").get<std::uint64_t>()};
    const auto lambda = doc.at("lambda").get<std::vector<double>>();
    if (lambda.size() != 6) fail(ErrorKind::ConfigMismatch, "lambda needs 6 entries");
    cfg.lambda = Eigen::Map<const Vector6d>(lambda.data());
    cfg.seed = doc.at("seed").get<std::uint64_t>();
    return cfg;
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigMismatch, std::string("bad training config: ") + e.what());
  }
}

json grasp_checkpoint(const GraspModel& model, const TrainState* state, const TrainConfig* train) {
  json doc = {{"format", "crossgrasp.checkpoint"},
              {"version", kCheckpointVersion},
              {"kind", "grasp_model"},
              {"config", to_json(model.config())},
              {"params", ad::parameters_to_json(model.parameters())}};
  if (state) {
    doc["train_state"] = {{"epoch", state->epoch},
                          {"adam", ad::adam_state_to_json(state->adam)},
                          {"metrics", metrics_to_json(state->metrics)}};
  }
  if (train) doc["train_config"] = to_json(*train);
  return doc;
}

GraspModel model_from_checkpoint(const json& doc, TrainState* state) {
  check_header(doc, "grasp_model");
  GraspModel model(model_config_from_json(doc.at("config")));
  ad::load_parameters(model.parameters(), doc.at("params"), true);
  if (state) {
    *state = {};
    if (doc.contains("train_state")) {
      const json& ts = doc["train_state"];
      state->epoch = ts.at("epoch").get<int>();
      state->adam = ad::adam_state_from_json(ts.at("adam"));
      state->metrics = metrics_from_json(ts.at("metrics"));
    }
  }
  return model;
}

json autoencoder_checkpoint(const ObjectAutoencoder& ae, const std::vector<double>* chamfer) {
  const auto& dec = ae.decoder_config();
  json doc = {{"format", "crossgrasp.checkpoint"},
              {"version", kCheckpointVersion},
              {"kind", "object_autoencoder"},
              {"config",
               {{"encoder", nn::to_json(ae.encoder_config())},
                {"decoder", {{"points", dec.points}, {"hidden", dec.hidden}, {"output_scale", dec.output_scale}}},
                {"seed", ae.seed()}}},
              {"params", ad::parameters_to_json(const_cast<ObjectAutoencoder&>(ae).parameters())}};
  if (chamfer) doc["chamfer"] = *chamfer;
  return doc;
}

ObjectAutoencoder autoencoder_from_checkpoint(const json& doc) {
  check_header(doc, "object_autoencoder");
  try {
    const json& cfg = doc.at("config");
    nn::DecoderConfig dec{cfg.at("decoder").at("points").get<int>(), cfg.at("decoder").at("hidden").get<int>(),
                          cfg.at("decoder").at("output_scale").get<double>()};
    ObjectAutoencoder ae(nn::object_encoder_config_from_json(cfg.at("encoder")), dec, cfg.at("seed").get<std::uint64_t>());
    ad::load_parameters(ae.parameters(), doc.at("params"), true);
    return ae;
  } catch (const json::exception& e) {
    fail(ErrorKind::SchemaError, std::string("bad autoencoder checkpoint: ") + e.what());
  }
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::SchemaError, path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& doc, int indent) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  out << doc.dump(indent) << '\n';
}

void load_pretrained_object(GraspModel& model, const json& ae_checkpoint) {
  check_header(ae_checkpoint, "object_autoencoder");
  const json encoder = ae_checkpoint.at("config").at("encoder");
  if (encoder != nn::to_json(model.config().object)) {
    fail(ErrorKind::ConfigMismatch, "pretrained object encoder config differs from the model's");
  }
  std::size_t expected = 0;
  for (const auto& [name, p] : model.parameters()) expected += name.rfind("object.", 0) == 0;
  const std::size_t loaded = ad::load_parameters(model.parameters(), ae_checkpoint.at("params"), false, "object.");
  if (loaded != expected) {
    fail(ErrorKind::ConfigMismatch, "pretrained checkpoint covers " + std::to_string(loaded) + " of " +
                                        std::to_string(expected) + " object encoder arrays");
  }
}

// ---- Trainer ----------------------------------------------------------------

Trainer::Trainer(GraspModel& model, const Dataset& data, TrainConfig cfg, TrainState state)
    : model_(model), data_(data), cfg_(std::move(cfg)), state_(std::move(state)) {
  if (data_.samples.empty()) fail(ErrorKind::EmptyDataset, "training needs at least one sample");
  if (cfg_.batch_size < 1 || cfg_.epochs < 0 || !(cfg_.lr >= 0)) fail(ErrorKind::ConfigMismatch, "invalid training schedule");
  const ModelConfig& mc = model_.config();
  for (const auto& [id, indices] : data_.by_hand()) {
    HandContext ctx;
    ctx.hand = &data_.hand(id);
    ctx.tokens = tokenize(*ctx.hand, mc.max_joints, mc.max_dof);
    Eigen::MatrixXd q(static_cast<Eigen::Index>(indices.size()), ctx.hand->dof());
    for (std::size_t r = 0; r < indices.size(); ++r) q.row(static_cast<Eigen::Index>(r)) = data_.samples[indices[r]].q.transpose();
    ctx.target = pca_eigengrasps(q, mc.eigengrasps, mc.max_dof);
    ctx.samples = indices;
    hands_.emplace(id, std::move(ctx));
  }
  weights_.resize(data_.samples.size());
  plans_.resize(data_.samples.size());
  for (std::size_t i = 0; i < data_.samples.size(); ++i) {
    const GraspSample& s = data_.samples[i];
    const HandModel& hand = data_.hand(s.hand_id);
    weights_[i] = cfg_.mse_loss ? Eigen::VectorXd::Ones(hand.dof()) : kal_weights(hand, s.q, cfg_.lambda).w;
    plans_[i] = nn::plan_set_abstraction(s.cloud, mc.object);
  }
}

double Trainer::learning_rate() const {
  if (!cfg_.cosine_decay || cfg_.epochs <= 1) return cfg_.lr;
  const double progress = std::min(1.0, static_cast<double>(state_.epoch) / (cfg_.epochs - 1));
  const double floor = cfg_.lr * cfg_.min_lr_fraction;
  return floor + 0.5 * (cfg_.lr - floor) * (1.0 + std::cos(std::numbers::pi * progress));
}

EpochMetrics Trainer::run_epoch() {
  const auto start = Clock::now();
  const int epoch = state_.epoch;
  DataRng shuffle = stream_rng(cfg_.seed, static_cast<std::uint64_t>(epoch));
  std::vector<std::pair<const HandContext*, std::vector<std::size_t>>> batches;
  for (const auto& [id, ctx] : hands_) {
    std::vector<std::size_t> order = ctx.samples;
    std::shuffle(order.begin(), order.end(), shuffle);
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg_.batch_size)) {
      const auto end = std::min(order.size(), b + static_cast<std::size_t>(cfg_.batch_size));
      batches.emplace_back(&ctx, std::vector<std::size_t>(order.begin() + static_cast<long>(b), order.begin() + static_cast<long>(end)));
    }
  }
  std::shuffle(batches.begin(), batches.end(), shuffle);

  ad::AdamConfig adam;
  adam.lr = learning_rate();
  std::function<bool(const std::string&)> trainable;
  if (cfg_.freeze_object) trainable = [](const std::string& name) { return name.rfind("object.", 0) != 0; };

  double eig_sum = 0.0, kal_sum = 0.0;
  std::size_t sample_count = 0;
  for (const auto& [ctx, indices] : batches) {
    model_.parameters().zero_grad();
    Tape tape;
    MorphologyOutput morph = model_.encode_morphology(tape, ctx->tokens);
    Var l_eig = loss_eig(morph.eigengrasps, ctx->target.basis);
    Var basis = cfg_.teacher_forcing ? tape.constant(ctx->target.basis) : morph.eigengrasps;
    Var kal;
    for (std::size_t n = 0; n < indices.size(); ++n) {
      const std::size_t idx = indices[n];
      const GraspSample* sample = &data_.samples[idx];
      GraspSample augmented;
      nn::SetAbstractionPlan plan;
      const nn::SetAbstractionPlan* use_plan = &plans_[idx];
      if (cfg_.augment) {
        DataRng rng = stream_rng(cfg_.augmentation.seed ^ 0x5eedULL, static_cast<std::uint64_t>(epoch), idx);
        augmented = augment(*sample, cfg_.augmentation, rng);
        sample = &augmented;
        plan = nn::plan_set_abstraction(augmented.cloud, model_.config().object);
        use_plan = &plan;
      }
      Var f = model_.encode_object(tape, *use_plan);
      Var a = model_.predict_amplitudes(tape, basis, morph.embedding, f, sample->wrist);
      Var q = GraspModel::decode(a, basis, ctx->hand->dof());
      Var term = loss_kal(q, sample->q, weights_[idx]);
      kal_sum += term.scalar();
      kal = n == 0 ? term : ad::add(kal, term);
    }
    kal = ad::scale(kal, 1.0 / static_cast<double>(indices.size()));
    tape.backward(total_loss(l_eig, kal));
    ad::adam_step(model_.parameters(), state_.adam, adam, trainable);
    eig_sum += l_eig.scalar();
    sample_count += indices.size();
  }

  EpochMetrics m;
  m.epoch = epoch;
  m.l_eig = eig_sum / static_cast<double>(batches.size());
  m.l_kal = kal_sum / static_cast<double>(sample_count);
  m.l_total = m.l_eig + m.l_kal;
  m.wall_time_s = seconds_since(start);
  state_.metrics.push_back(m);
  ++state_.epoch;
  return m;
}

void Trainer::run(const std::function<void(const EpochMetrics&)>& on_epoch) {
  while (state_.epoch < cfg_.epochs) {
    const EpochMetrics m = run_epoch();
    if (on_epoch) on_epoch(m);
  }
}

EpochMetrics Trainer::evaluate_sample(std::size_t idx) {
  const GraspSample& s = data_.samples.at(idx);
  const HandContext& ctx = hands_.at(s.hand_id);
  Tape tape;
  MorphologyOutput morph = model_.encode_morphology(tape, ctx.tokens);
  Var basis = cfg_.teacher_forcing ? tape.constant(ctx.target.basis) : morph.eigengrasps;
  Var f = model_.encode_object(tape, plans_[idx]);
  Var q = GraspModel::decode(model_.predict_amplitudes(tape, basis, morph.embedding, f, s.wrist), basis, ctx.hand->dof());
  EpochMetrics m;
  m.epoch = state_.epoch;
  m.l_eig = loss_eig(morph.eigengrasps, ctx.target.basis).scalar();
  m.l_kal = loss_kal(q, s.q, weights_[idx]).scalar();
  m.l_total = m.l_eig + m.l_kal;
  return m;
}

// ---- autoencoder pretraining -------------------------------------------------

double mean_chamfer(ObjectAutoencoder& ae, const std::vector<Cloud>& clouds) {
  if (clouds.empty()) fail(ErrorKind::EmptyDataset, "no clouds to score");
  double total = 0.0;
  for (const Cloud& c : clouds) {
    Tape tape;
    total += ad::chamfer(ae.reconstruct(tape, nn::plan_set_abstraction(c, ae.encoder_config())), c).scalar();
  }
  return total / static_cast<double>(clouds.size());
}

std::vector<double> pretrain_object(ObjectAutoencoder& ae, const std::vector<Cloud>& clouds, const PretrainConfig& cfg,
                                    const std::function<void(int, double)>& on_epoch) {
  if (clouds.empty()) fail(ErrorKind::EmptyDataset, "pretraining needs at least one cloud");
  if (cfg.batch_size < 1 || cfg.epochs < 0) fail(ErrorKind::ConfigMismatch, "invalid pretraining schedule");
  std::vector<nn::SetAbstractionPlan> plans;
  plans.reserve(clouds.size());
  for (const Cloud& c : clouds) plans.push_back(nn::plan_set_abstraction(c, ae.encoder_config()));

  ad::AdamState state;
  ad::AdamConfig adam;
  adam.lr = cfg.lr;
  std::vector<double> history;
  std::vector<std::size_t> order(clouds.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    DataRng rng = stream_rng(cfg.seed, static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
      ae.parameters().zero_grad();
      Tape tape;
      Var loss;
      for (std::size_t i = b; i < end; ++i) {
        Var term = ad::chamfer(ae.reconstruct(tape, plans[order[i]]), clouds[order[i]]);
        loss = i == b ? term : ad::add(loss, term);
      }
      tape.backward(ad::scale(loss, 1.0 / static_cast<double>(end - b)));
      ad::adam_step(ae.parameters(), state, adam);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < clouds.size(); ++i) {
      Tape tape;
      total += ad::chamfer(ae.reconstruct(tape, plans[i]), clouds[i]).scalar();
    }
    history.push_back(total / static_cast<double>(clouds.size()));
    if (on_epoch) on_epoch(epoch, history.back());
  }
  return history;
}

// ---- inference ---------------------------------------------------------------

Prediction predict_articulation(GraspModel& model, const HandModel& hand, const Cloud& cloud, const WristPose& wrist) {
  const auto start = Clock::now();
  const ModelConfig& cfg = model.config();
  const Eigen::RowVector3d centroid = cloud.rows() ? Eigen::RowVector3d(cloud.colwise().mean()) : Eigen::RowVector3d::Zero();
  const Cloud centered = normalize_cloud(cloud);
  WristPose local = wrist;
  local.t -= centroid.transpose();

  const MorphologyTokens tokens = tokenize(hand, cfg.max_joints, cfg.max_dof);
  Tape tape;
  MorphologyOutput morph = model.encode_morphology(tape, tokens);
  Var f = model.encode_object(tape, nn::plan_set_abstraction(centered, cfg.object));
  Var a = model.predict_amplitudes(tape, morph.eigengrasps, morph.embedding, f, local);
  Var q = GraspModel::decode(a, morph.eigengrasps, hand.dof());

  Prediction p;
  p.amplitudes = a.value().row(0).transpose();
  p.q_raw = q.value().row(0).transpose();
  p.q = clamp_to_limits(hand, p.q_raw, &p.clamp);
  p.eigengrasps.basis = morph.eigengrasps.value();
  p.eigengrasps.active = morph.valid;
  p.morphology = morph.embedding.value().row(0);
  p.wall_time_s = seconds_since(start);
  return p;
}

Prediction predict_articulation(std::string_view urdf_text, const Cloud& cloud, const WristPose& wrist,
                                const fs::path& checkpoint) {
  GraspModel model = model_from_checkpoint(read_json_file(checkpoint));
  return predict_articulation(model, parse_urdf(urdf_text), cloud, wrist);
}

}  // namespace crossgrasp
