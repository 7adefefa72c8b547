#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "crossgrasp/data.hpp"
#include "crossgrasp/eigengrasp.hpp"
#include "crossgrasp/errors.hpp"
#include "crossgrasp/gevaluate.hpp"
#include "crossgrasp/kinematics.hpp"
#include "crossgrasp/morphology.hpp"
#include "crossgrasp/synth.hpp"
#include "crossgrasp/train.hpp"

namespace crossgrasp::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kProxyDisclaimer =
    "note: stability labels come from a quasi-static force-closure proxy, not a physics simulation";

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  out << text;
}

json to_array(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json matrix_rows(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string csv_number(double v) {
  std::ostringstream s;
  s << std::setprecision(12) << v;
  return s.str();
}

ModelConfig model_preset(const std::string& name) {
  if (name == "desk") return ModelConfig{};
  if (name == "small") return ModelConfig::small();
  fail(ErrorKind::ConfigMismatch, "unknown model preset '" + name + "' (desk, small)");
}

// ---- option records ---------------------------------------------------------

struct Global {
  std::uint64_t seed = 0;
};

struct TokenizeOpts {
  std::string urdf, out;
  int max_joints = kDefaultMaxJoints, max_dof = kDefaultMaxDof;
};

struct EigenOpts {
  std::string dataset, hand, out;
  int k = kDefaultEigengraspCount, max_dof = kDefaultMaxDof;
};

struct KalOpts {
  std::string urdf, out, dataset, hand;
  std::vector<double> q;
  std::vector<double> lambda{1.0, 1.0, 1.0, 0.05, 0.05, 0.05};
};

struct PretrainOpts {
  std::string dataset, out, preset = "desk";
  int primitives = 0, points = 384, epochs = 150, batch_size = 5, decoder_points = 128, decoder_hidden = 256;
  double lr = 2e-3, output_scale = 0.1;
};

struct TrainOpts {
  std::string dataset, out, model = "desk", object_preset, pretrained, resume, loss = "kal";
  int epochs = 100, batch_size = 8, log_every = 10, checkpoint_every = 0, eigengrasps = kDefaultEigengraspCount;
  double lr = 1e-3;
  bool no_augment = false, teacher_forcing = false, freeze_object = false, cosine = false, stable_only = false;
};

struct PredictOpts {
  std::string checkpoint, urdf, cloud, out;
  std::vector<double> wrist;
  bool geometry = false;
};

struct EvaluateOpts {
  std::string checkpoint, dataset, out;
  double mu = 0.5, contact_eps = 0.005, penetration_tol = 0.003;
  bool no_baseline = false;
};

struct SynthOpts {
  std::string out, hand_id = "synth";
  int fingers = 3, joints = 3, grasps = 200, objects = 20, points = 384, heldout_grasps = 0, heldout_objects = 5;
  std::vector<int> finger_joints;
};

// Resolved configuration: top-level values plus the invoked subcommand's
// section, in a form --config accepts back.
void snapshot(const Global& g, const CLI::App& sub, const fs::path& dir) {
  std::ostringstream doc;
  doc << "# resolved configuration\n";
  doc << "seed=" << g.seed << "\n\n";
  doc << '[' << sub.get_name() << "]\n";
  // empty values would read back as a one-element list
  std::istringstream lines(sub.config_to_str(true, false));
  for (std::string line; std::getline(lines, line);)
    if (line.size() < 3 || line.compare(line.size() - 3, 3, "=\"\"") != 0) doc << line << '\n';
  write_text(dir / "resolved_config.toml", doc.str());
}

// ---- commands ----------------------------------------------------------------

void cmd_tokenize(const TokenizeOpts& o, std::ostream& out) {
  const MorphologyTokens tokens = tokenize(load_urdf(o.urdf), o.max_joints, o.max_dof);
  write_text(fs::path(o.out) / "tokens.json", tokens_to_json(tokens).dump() + "\n");
  out << "tokens: M=" << tokens.joint_count << " d=" << tokens.dof() << " -> " << (fs::path(o.out) / "tokens.json").string()
      << '\n';
}

Eigen::MatrixXd articulation_matrix(const Dataset& data, const std::string& hand) {
  const auto groups = data.by_hand();
  const auto it = groups.find(hand);
  if (it == groups.end()) fail(ErrorKind::SchemaError, "dataset has no samples for hand '" + hand + "'");
  Eigen::MatrixXd q(static_cast<Eigen::Index>(it->second.size()), data.hand(hand).dof());
  for (std::size_t r = 0; r < it->second.size(); ++r) q.row(static_cast<Eigen::Index>(r)) = data.samples[it->second[r]].q.transpose();
  return q;
}

std::string pick_hand(const Dataset& data, const std::string& requested) {
  if (!requested.empty()) return requested;
  if (data.hands.size() != 1) fail(ErrorKind::SchemaError, "dataset has several hands; pass --hand");
  return data.hands.begin()->first;
}

void cmd_eigengrasps(const EigenOpts& o, std::ostream& out) {
  const Dataset data = load_dataset(o.dataset);
  const std::string hand = pick_hand(data, o.hand);
  const Eigen::MatrixXd q = articulation_matrix(data, hand);
  const EigengraspSet set = pca_eigengrasps(q, o.k, o.max_dof);
  json doc = eigengrasps_to_json(set);
  doc["hand_id"] = hand;
  doc["variance_explained"] = to_array(variance_explained(q, set));
  write_text(fs::path(o.out) / "eigengrasps.json", doc.dump() + "\n");
  out << "eigengrasps: hand=" << hand << " K=" << set.count() << " d=" << set.dof() << " samples=" << q.rows() << '\n';
}

void cmd_kal_weights(const KalOpts& o, std::ostream& out) {
  if (o.lambda.size() != 6) fail(ErrorKind::InvalidSpec, "--lambda needs 6 values");
  const Vector6d lambda = Eigen::Map<const Vector6d>(o.lambda.data());
  json doc;
  if (!o.dataset.empty()) {
    const Dataset data = load_dataset(o.dataset);
    const std::string hand = pick_hand(data, o.hand);
    const HandModel& model = data.hand(hand);
    json table = json::array();
    const auto groups = data.by_hand();
    for (std::size_t i : groups.at(hand)) table.push_back(to_array(kal_weights(model, data.samples[i].q, lambda).w));
    doc = {{"hand_id", hand}, {"weights", table}};
  } else {
    if (o.urdf.empty()) fail(ErrorKind::InvalidSpec, "pass a URDF or --dataset");
    const HandModel hand = load_urdf(o.urdf);
    Eigen::VectorXd q = Eigen::VectorXd::Zero(hand.dof());
    if (!o.q.empty()) {
      if (static_cast<int>(o.q.size()) != hand.dof()) {
        fail(ErrorKind::DimensionMismatch, "--q has " + std::to_string(o.q.size()) + " values, hand has " + std::to_string(hand.dof()));
      }
      q = Eigen::Map<const Eigen::VectorXd>(o.q.data(), hand.dof());
    }
    json names = json::array();
    for (int j : hand.revolute_joints()) names.push_back(hand.joints()[j].name);
    doc = {{"joints", names}, {"q", to_array(q)}, {"weights", json::array({to_array(kal_weights(hand, q, lambda).w)})}};
  }
  doc["lambda"] = o.lambda;
  write_text(fs::path(o.out) / "kal_weights.json", doc.dump() + "\n");
  out << "kal weights: " << doc["weights"].size() << " rows\n";
}

void cmd_pretrain(const PretrainOpts& o, const Global& g, std::ostream& out) {
  std::vector<Cloud> clouds;
  if (o.primitives > 0) {
    DataRng rng(g.seed);
    for (const ObjectSpec& spec : random_objects(o.primitives, rng)) clouds.push_back(sample_surface(spec, o.points, rng));
  } else {
    if (o.dataset.empty()) fail(ErrorKind::InvalidSpec, "pass a dataset or --primitives");
    const Dataset data = load_dataset(o.dataset);
    std::set<std::string> seen;
    for (const GraspSample& s : data.samples)
      if (seen.insert(s.object_id).second) clouds.push_back(s.cloud);
  }
  ObjectAutoencoder ae(nn::ObjectEncoderConfig::preset_named(o.preset),
                       nn::DecoderConfig{o.decoder_points, o.decoder_hidden, o.output_scale}, g.seed);
  PretrainConfig pc;
  pc.epochs = o.epochs;
  pc.batch_size = o.batch_size;
  pc.lr = o.lr;
  pc.seed = g.seed;
  std::ostringstream csv;
  csv << "epoch,chamfer\n";
  const auto history = pretrain_object(ae, clouds, pc, [&](int epoch, double c) {
    if (!std::isfinite(c)) fail(ErrorKind::DegenerateInput, "non-finite Chamfer at epoch " + std::to_string(epoch));
    csv << epoch << ',' << csv_number(c) << '\n';
  });
  const fs::path dir(o.out);
  write_json_file(dir / "object_ae.json", autoencoder_checkpoint(ae, &history));
  write_text(dir / "chamfer.csv", csv.str());
  out << "pretrain: clouds=" << clouds.size() << " final_chamfer=" << csv_number(history.empty() ? mean_chamfer(ae, clouds) : history.back())
      << '\n';
}

Dataset stable_subset(const Dataset& data) {
  Dataset out;
  out.hands = data.hands;
  for (const GraspSample& s : data.samples)
    if (!s.stable.has_value() || *s.stable) out.samples.push_back(s);
  return out;
}

void cmd_train(const TrainOpts& o, const Global& g, std::ostream& out) {
  if (o.loss != "kal" && o.loss != "mse") fail(ErrorKind::InvalidSpec, "--loss must be kal or mse");
  const Dataset loaded = load_dataset(o.dataset);
  const Dataset data = o.stable_only ? stable_subset(loaded) : loaded;
  if (data.samples.empty()) fail(ErrorKind::EmptyDataset, "no training samples left");

  TrainState state;
  std::optional<GraspModel> model;
  if (!o.resume.empty()) {
    model.emplace(model_from_checkpoint(read_json_file(o.resume), &state));
  } else {
    ModelConfig mc = model_preset(o.model);
    if (!o.object_preset.empty()) mc.object = nn::ObjectEncoderConfig::preset_named(o.object_preset);
    mc.eigengrasps = o.eigengrasps;
    mc.seed = g.seed;
    model.emplace(mc);
    if (!o.pretrained.empty()) load_pretrained_object(*model, read_json_file(o.pretrained));
  }

  TrainConfig tc;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch_size;
  tc.lr = o.lr;
  tc.cosine_decay = o.cosine;
  tc.mse_loss = o.loss == "mse";
  tc.teacher_forcing = o.teacher_forcing;
  tc.freeze_object = o.freeze_object;
  tc.augment = !o.no_augment;
  tc.augmentation.seed = g.seed;
  tc.seed = g.seed;

  const fs::path dir(o.out);
  Trainer trainer(*model, data, tc, state);
  auto save = [&] {
    write_json_file(dir / "checkpoint.json", grasp_checkpoint(*model, &trainer.state(), &tc));
    write_text(dir / "metrics.csv", metrics_csv(trainer.state().metrics));
  };
  trainer.run([&](const EpochMetrics& m) {
    if (!std::isfinite(m.l_total)) fail(ErrorKind::DegenerateInput, "non-finite loss at epoch " + std::to_string(m.epoch));
    if (o.log_every > 0 && (m.epoch % o.log_every == 0 || m.epoch + 1 == tc.epochs)) {
      out << "epoch " << m.epoch << " L_eig=" << csv_number(m.l_eig) << " L_KAL=" << csv_number(m.l_kal)
          << " t=" << csv_number(m.wall_time_s) << "s\n";
    }
    if (o.checkpoint_every > 0 && (m.epoch + 1) % o.checkpoint_every == 0) save();
  });
  save();
  double worst_kal = 0.0;
  for (std::size_t i = 0; i < data.samples.size(); ++i) worst_kal = std::max(worst_kal, trainer.evaluate_sample(i).l_kal);
  out << "train: samples=" << data.samples.size() << " epochs=" << trainer.state().epoch
      << " worst_sample_L_KAL=" << csv_number(worst_kal) << '\n';
}

WristPose wrist_from_values(const std::vector<double>& v) {
  if (v.size() != 9) fail(ErrorKind::InvalidSpec, "--wrist needs 9 values: t(3) then r6(6)");
  WristPose w;
  w.t = Eigen::Vector3d(v[0], v[1], v[2]);
  w.r6 = Eigen::Map<const Vector6d>(v.data() + 3);
  return w;
}

json geometry_dump(const HandModel& hand, const Eigen::VectorXd& q, const WristPose& wrist, const Cloud& cloud) {
  static const char* kinds[] = {"box", "cylinder", "sphere", "dummy"};
  json prims = json::array();
  for (const PosedPrimitive& p : posed_primitives(hand, q, wrist)) {
    prims.push_back({{"link", hand.links()[p.link].name},
                     {"kind", kinds[static_cast<int>(p.primitive.kind)]},
                     {"dims", p.primitive.dims},
                     {"pose", matrix_rows(p.pose.matrix())}});
  }
  return {{"primitives", prims}, {"cloud", matrix_rows(cloud)}, {"wrist", matrix_rows(wrist.transform().matrix())}};
}

void cmd_predict(const PredictOpts& o, std::ostream& out) {
  GraspModel model = model_from_checkpoint(read_json_file(o.checkpoint));
  const HandModel hand = load_urdf(o.urdf);
  const Cloud cloud = read_xyz(o.cloud);
  const WristPose wrist = wrist_from_values(o.wrist);
  const Prediction p = predict_articulation(model, hand, cloud, wrist);
  json doc = {{"q", to_array(p.q)},
              {"q_raw", to_array(p.q_raw)},
              {"clamp", to_array(p.clamp)},
              {"amplitudes", to_array(p.amplitudes)},
              {"wall_time_s", p.wall_time_s}};
  const fs::path dir(o.out);
  write_text(dir / "grasp.json", doc.dump() + "\n");
  if (o.geometry) write_text(dir / "geometry.json", geometry_dump(hand, p.q, wrist, cloud).dump() + "\n");
  out << "predict: d=" << p.q.size() << " wall_time_s=" << csv_number(p.wall_time_s) << '\n';
}

struct BatchResult {
  std::string csv;
  int stable = 0;
};

BatchResult verdict_rows(const std::vector<GraspVerdict>& verdicts) {
  std::ostringstream csv;
  csv << "sample_id,stable,fc_margin,contact_count,penetration\n";
  BatchResult r;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    const GraspVerdict& v = verdicts[i];
    csv << i << ',' << (v.stable ? 1 : 0) << ',' << csv_number(v.fc_margin) << ',' << v.contact_count << ','
        << csv_number(v.penetration) << '\n';
    r.stable += v.stable ? 1 : 0;
  }
  r.csv = csv.str();
  return r;
}

void cmd_evaluate(const EvaluateOpts& o, const Global& g, std::ostream& out) {
  GraspModel model = model_from_checkpoint(read_json_file(o.checkpoint));
  const Dataset data = load_dataset(o.dataset);
  if (data.samples.empty()) fail(ErrorKind::EmptyDataset, "nothing to evaluate");
  EvalConfig ec;
  ec.mu = o.mu;
  ec.contact_eps = o.contact_eps;
  ec.penetration_tol = o.penetration_tol;
  ec.seed = g.seed;

  std::vector<GraspVerdict> predicted, baseline, open_hand;
  double joint_error = 0.0, wall = 0.0;
  std::size_t joints = 0;
  DataRng rng(g.seed ^ 0xba5e11e5ULL);
  for (const GraspSample& s : data.samples) {
    const HandModel& hand = data.hand(s.hand_id);
    const Prediction p = predict_articulation(model, hand, s.cloud, s.wrist);
    wall += p.wall_time_s;
    joint_error += (p.q - s.q).cwiseAbs().sum();
    joints += static_cast<std::size_t>(s.q.size());
    predicted.push_back(evaluate_grasp(hand, p.q, s.wrist, s.cloud, ec));
    if (!o.no_baseline) {
      Eigen::VectorXd q(hand.dof());
      for (int k = 0; k < hand.dof(); ++k) {
        const JointSpec& j = hand.joints()[hand.revolute_joints()[k]];
        q[k] = std::uniform_real_distribution<double>(j.lower, j.upper)(rng);
      }
      baseline.push_back(evaluate_grasp(hand, q, s.wrist, s.cloud, ec));
      open_hand.push_back(evaluate_grasp(hand, clamp_to_limits(hand, Eigen::VectorXd::Zero(hand.dof())), s.wrist, s.cloud, ec));
    }
  }
  const fs::path dir(o.out);
  const BatchResult ours = verdict_rows(predicted);
  write_text(dir / "verdicts.csv", ours.csv);
  const double n = static_cast<double>(data.samples.size());
  json summary = {{"samples", data.samples.size()},
                  {"proxy_success_rate", ours.stable / n},
                  {"mean_abs_joint_error", joint_error / static_cast<double>(joints)},
                  {"mean_wall_time_s", wall / n},
                  {"disclaimer", kProxyDisclaimer}};
  int labeled = 0, labeled_stable = 0;
  for (const GraspSample& s : data.samples)
    if (s.stable) {
      ++labeled;
      labeled_stable += *s.stable ? 1 : 0;
    }
  if (labeled > 0) summary["dataset_label_success_rate"] = labeled_stable / static_cast<double>(labeled);
  if (!o.no_baseline) {
    const BatchResult base = verdict_rows(baseline);
    write_text(dir / "baseline_verdicts.csv", base.csv);
    summary["random_baseline_success_rate"] = base.stable / n;
    summary["open_hand_baseline_success_rate"] = verdict_rows(open_hand).stable / n;
  }
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  out << kProxyDisclaimer << '\n';
  out << "evaluate: samples=" << data.samples.size() << " proxy_success_rate=" << csv_number(ours.stable / n);
  if (!o.no_baseline) {
    out << " random_baseline=" << csv_number(summary["random_baseline_success_rate"].get<double>())
        << " open_hand_baseline=" << csv_number(summary["open_hand_baseline_success_rate"].get<double>());
  }
  out << " mean_wall_time_s=" << csv_number(wall / n) << '\n';
}

void cmd_synth(const SynthOpts& o, const Global& g, std::ostream& out) {
  HandSpec spec;
  spec.name = o.hand_id;
  spec.fingers = o.fingers;
  spec.joints_per_finger = o.joints;
  spec.finger_joints = o.finger_joints;
  const std::string urdf = synth_hand_urdf(spec);
  const fs::path dir(o.out);
  write_text(dir / "hand.urdf", urdf);

  Dataset data;
  data.hands.emplace(o.hand_id, HandEntry{"hand.urdf", parse_urdf(urdf)});
  const HandModel& hand = data.hand(o.hand_id);
  SynthConfig sc;
  sc.points = o.points;
  sc.seed = g.seed;
  sc.eval.seed = g.seed;
  DataRng rng(g.seed);
  data.samples = synth_grasps(hand, o.hand_id, random_objects(o.objects, rng), o.grasps, sc);
  write_dataset(dir / "grasps.jsonl", data);
  auto stable_count = [](const Dataset& d) {
    int n = 0;
    for (const auto& s : d.samples) n += s.stable.value_or(false) ? 1 : 0;
    return n;
  };
  out << "synth: dof=" << hand.dof() << " grasps=" << data.samples.size() << " stable=" << stable_count(data) << '\n';

  if (o.heldout_grasps > 0) {
    Dataset held;
    held.hands = data.hands;
    SynthConfig hc = sc;
    hc.seed = g.seed + 1;
    DataRng hrng(g.seed + 1);
    held.samples = synth_grasps(hand, o.hand_id, random_objects(o.heldout_objects, hrng, "heldout"), o.heldout_grasps, hc);
    write_dataset(dir / "heldout.jsonl", held);
    out << "synth: heldout grasps=" << held.samples.size() << " stable=" << stable_count(held) << '\n';
  }
}

int report(const std::string& message, int code, std::ostream& err) {
  std::string line = message;
  std::replace(line.begin(), line.end(), '\n', ' ');
  err << "error: " << line << '\n';
  return code;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-embodiment grasp articulation toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config file; command-line flags override its values");
  Global g;
  app.add_option("--seed", g.seed, "Global seed")->capture_default_str();

  TokenizeOpts tok;
  auto* c_tok = app.add_subcommand("tokenize", "URDF -> padded joint tokens (tokens.json)");
  c_tok->add_option("urdf", tok.urdf, "URDF file")->required()->check(CLI::ExistingFile);
  c_tok->add_option("-o,--out", tok.out, "Output directory")->required();
  c_tok->add_option("--max-joints", tok.max_joints, "Token rows M_max")->capture_default_str();
  c_tok->add_option("--max-dof", tok.max_dof, "Articulation capacity D_max")->capture_default_str();

  EigenOpts eig;
  auto* c_eig = app.add_subcommand("eigengrasps", "PCA eigengrasps of one hand's articulations (eigengrasps.json)");
  c_eig->add_option("dataset", eig.dataset, "Grasp dataset (.jsonl)")->required();
  c_eig->add_option("--hand", eig.hand, "Hand id (optional for single-hand datasets)");
  c_eig->add_option("-k,--k", eig.k, "Number of eigengrasps")->capture_default_str();
  c_eig->add_option("--max-dof", eig.max_dof, "Column capacity D_max")->capture_default_str();
  c_eig->add_option("-o,--out", eig.out, "Output directory")->required();

  KalOpts kal;
  auto* c_kal = app.add_subcommand("kal-weights", "Kinematics-aware joint weights (kal_weights.json)");
  c_kal->add_option("urdf", kal.urdf, "URDF file");
  c_kal->add_option("--q", kal.q, "Articulation (default zeros)")->delimiter(',');
  c_kal->add_option("--lambda", kal.lambda, "Per-component Jacobian weights")->delimiter(',')->capture_default_str();
  c_kal->add_option("--dataset", kal.dataset, "Emit one row per sample of this dataset instead");
  c_kal->add_option("--hand", kal.hand, "Hand id within --dataset");
  c_kal->add_option("-o,--out", kal.out, "Output directory")->required();

  PretrainOpts pre;
  auto* c_pre = app.add_subcommand("pretrain-object", "Chamfer autoencoder pretraining of the object encoder");
  c_pre->add_option("dataset", pre.dataset, "Grasp dataset; one cloud per distinct object");
  c_pre->add_option("--primitives", pre.primitives, "Sample this many random primitive clouds instead")->capture_default_str();
  c_pre->add_option("--points", pre.points, "Points per sampled primitive cloud")->capture_default_str();
  c_pre->add_option("--preset", pre.preset, "Encoder preset: paper, desk, tiny")->capture_default_str();
  c_pre->add_option("--epochs", pre.epochs, "Epochs")->capture_default_str();
  c_pre->add_option("--batch-size", pre.batch_size, "Clouds per step")->capture_default_str();
  c_pre->add_option("--lr", pre.lr, "Adam learning rate")->capture_default_str();
  c_pre->add_option("--decoder-points", pre.decoder_points, "Reconstructed points")->capture_default_str();
  c_pre->add_option("--decoder-hidden", pre.decoder_hidden, "Decoder hidden width")->capture_default_str();
  c_pre->add_option("--output-scale", pre.output_scale, "Decoder output scale, m")->capture_default_str();
  c_pre->add_option("-o,--out", pre.out, "Output directory")->required();

  TrainOpts tr;
  auto* c_tr = app.add_subcommand("train", "Train the grasp model (checkpoint.json, metrics.csv)");
  c_tr->add_option("dataset", tr.dataset, "Grasp dataset (.jsonl)")->required();
  c_tr->add_option("-o,--out", tr.out, "Output directory")->required();
  c_tr->add_option("--model", tr.model, "Model preset: desk, small")->capture_default_str();
  c_tr->add_option("--object-preset", tr.object_preset, "Override the object encoder preset");
  c_tr->add_option("--eigengrasps", tr.eigengrasps, "K")->capture_default_str();
  c_tr->add_option("--pretrained", tr.pretrained, "Object autoencoder checkpoint to start from");
  c_tr->add_option("--resume", tr.resume, "Continue from a training checkpoint");
  c_tr->add_option("--epochs", tr.epochs, "Total epochs")->capture_default_str();
  c_tr->add_option("--batch-size", tr.batch_size, "Samples per step (one hand per batch)")->capture_default_str();
  c_tr->add_option("--lr", tr.lr, "Adam learning rate")->capture_default_str();
  c_tr->add_option("--loss", tr.loss, "kal or mse (w = 1)")->capture_default_str();
  c_tr->add_flag("--no-augment", tr.no_augment, "Disable geometric and noise augmentation");
  c_tr->add_flag("--teacher-forcing", tr.teacher_forcing, "Amplitude predictor reads ground-truth eigengrasps");
  c_tr->add_flag("--freeze-object", tr.freeze_object, "Keep object encoder weights fixed");
  c_tr->add_flag("--cosine", tr.cosine, "Cosine learning-rate decay");
  c_tr->add_flag("--stable-only", tr.stable_only, "Drop samples labeled unstable");
  c_tr->add_option("--log-every", tr.log_every, "Print every N epochs (0 = quiet)")->capture_default_str();
  c_tr->add_option("--checkpoint-every", tr.checkpoint_every, "Also save every N epochs")->capture_default_str();

  PredictOpts pr;
  auto* c_pr = app.add_subcommand("predict", "Predict an articulation for one cloud and wrist (grasp.json)");
  c_pr->add_option("--checkpoint", pr.checkpoint, "Model checkpoint")->required();
  c_pr->add_option("--urdf", pr.urdf, "Hand URDF")->required();
  c_pr->add_option("--cloud", pr.cloud, "Object cloud, XYZ file")->required();
  c_pr->add_option("--wrist", pr.wrist, "tx,ty,tz,r1..r6")->delimiter(',')->required();
  c_pr->add_flag("--geometry", pr.geometry, "Also write posed hand primitives (geometry.json)");
  c_pr->add_option("-o,--out", pr.out, "Output directory")->required();

  EvaluateOpts ev;
  auto* c_ev = app.add_subcommand("evaluate", "Proxy stability of predicted grasps (verdicts.csv, summary.json)");
  c_ev->add_option("checkpoint", ev.checkpoint, "Model checkpoint")->required();
  c_ev->add_option("dataset", ev.dataset, "Grasp dataset (.jsonl)")->required();
  c_ev->add_option("--mu", ev.mu, "Friction coefficient")->capture_default_str();
  c_ev->add_option("--contact-eps", ev.contact_eps, "Contact distance, m")->capture_default_str();
  c_ev->add_option("--penetration-tol", ev.penetration_tol, "Allowed penetration, m")->capture_default_str();
  c_ev->add_flag("--no-baseline", ev.no_baseline, "Skip the random and open-hand baselines");
  c_ev->add_option("-o,--out", ev.out, "Output directory")->required();

  SynthOpts sy;
  auto* c_sy = app.add_subcommand("synth", "Synthetic hand plus labeled grasp dataset");
  c_sy->add_option("--fingers", sy.fingers, "Fingers")->capture_default_str();
  c_sy->add_option("--joints", sy.joints, "Revolute joints per finger")->capture_default_str();
  c_sy->add_option("--finger-joints", sy.finger_joints, "Per-finger joint counts")->delimiter(',');
  c_sy->add_option("--grasps", sy.grasps, "Training grasps")->capture_default_str();
  c_sy->add_option("--objects", sy.objects, "Distinct training objects")->capture_default_str();
  c_sy->add_option("--points", sy.points, "Points per cloud")->capture_default_str();
  c_sy->add_option("--heldout-grasps", sy.heldout_grasps, "Grasps on held-out objects (heldout.jsonl)")->capture_default_str();
  c_sy->add_option("--heldout-objects", sy.heldout_objects, "Distinct held-out objects")->capture_default_str();
  c_sy->add_option("--hand-id", sy.hand_id, "Hand id in the dataset")->capture_default_str();
  c_sy->add_option("-o,--out", sy.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kOk;
    }
    return report(e.what(), kInputError, err);
  }

  try {
    const std::map<CLI::App*, std::pair<std::string, std::function<void()>>> table{
        {c_tok, {tok.out, [&] { cmd_tokenize(tok, out); }}},
        {c_eig, {eig.out, [&] { cmd_eigengrasps(eig, out); }}},
        {c_kal, {kal.out, [&] { cmd_kal_weights(kal, out); }}},
        {c_pre, {pre.out, [&] { cmd_pretrain(pre, g, out); }}},
        {c_tr, {tr.out, [&] { cmd_train(tr, g, out); }}},
        {c_pr, {pr.out, [&] { cmd_predict(pr, out); }}},
        {c_ev, {ev.out, [&] { cmd_evaluate(ev, g, out); }}},
        {c_sy, {sy.out, [&] { cmd_synth(sy, g, out); }}},
    };
    for (const auto& [sub, entry] : table) {
      if (!sub->parsed()) continue;
      fs::create_directories(entry.first);
      snapshot(g, *sub, entry.first);
      entry.second();
    }
    return kOk;
  } catch (const Error& e) {
    return report(e.what(), is_input_error(e.kind()) ? kInputError : kNumericError, err);
  } catch (const fs::filesystem_error& e) {
    return report(std::string("IoError: ") + e.what(), kInputError, err);
  } catch (const json::exception& e) {
    return report(std::string("SchemaError: ") + e.what(), kInputError, err);
  } catch (const std::exception& e) {
    return report(e.what(), kNumericError, err);
  }
}

}  // namespace crossgrasp::cli
