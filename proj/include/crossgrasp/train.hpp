#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crossgrasp/data.hpp"
#include "crossgrasp/eigengrasp.hpp"
#include "crossgrasp/kinematics.hpp"
#include "crossgrasp/nets.hpp"

namespace crossgrasp {

struct EpochMetrics {
  int epoch = 0;
  double l_eig = 0.0;
  double l_kal = 0.0;
  double l_total = 0.0;
  double wall_time_s = 0.0;
};

/// Header line plus one row per epoch.
std::string metrics_csv(const std::vector<EpochMetrics>& metrics);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 8;
  double lr = 1e-3;
  bool cosine_decay = false;
  double min_lr_fraction = 0.1;
  bool mse_loss = false;         // w == 1 instead of kinematic weights
  bool teacher_forcing = false;  // amplitude predictor reads E* instead of predicted E
  bool freeze_object = false;
  bool augment = true;
  AugmentConfig augmentation;
  Vector6d lambda = default_kal_lambda();
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& doc);

struct TrainState {
  int epoch = 0;  // completed epochs
  ad::AdamState adam;
  std::vector<EpochMetrics> metrics;
};

// ---- checkpoints -----------------------------------------------------------
// {"format": "crossgrasp.checkpoint", "version": 1, "kind", "config", "params", "train_state"?}

inline constexpr int kCheckpointVersion = 1;

nlohmann::json grasp_checkpoint(const GraspModel& model, const TrainState* state = nullptr,
                                const TrainConfig* train = nullptr);
GraspModel model_from_checkpoint(const nlohmann::json& doc, TrainState* state = nullptr);
nlohmann::json autoencoder_checkpoint(const ObjectAutoencoder& ae, const std::vector<double>* chamfer = nullptr);
ObjectAutoencoder autoencoder_from_checkpoint(const nlohmann::json& doc);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc, int indent = -1);

/// Copies the pretrained "object.*" arrays into the model. Throws ConfigMismatch
/// when the encoder configurations differ.
void load_pretrained_object(GraspModel& model, const nlohmann::json& ae_checkpoint);

// ---- training --------------------------------------------------------------

/// Per-hand training context: tokens, ground-truth eigengrasps, per-sample KAL weights.
struct HandContext {
  const HandModel* hand = nullptr;
  MorphologyTokens tokens;
  EigengraspSet target;
  std::vector<std::size_t> samples;
};

class Trainer {
 public:
  Trainer(GraspModel& model, const Dataset& data, TrainConfig cfg, TrainState state = {});

  /// Runs until `epochs` are complete; `on_epoch` sees every new metrics row.
  void run(const std::function<void(const EpochMetrics&)>& on_epoch = {});
  EpochMetrics run_epoch();

  const TrainState& state() const { return state_; }
  const TrainConfig& config() const { return cfg_; }
  const std::map<std::string, HandContext>& hands() const { return hands_; }
  const Eigen::VectorXd& weights(std::size_t sample) const { return weights_[sample]; }

  /// Loss terms for one sample at the current parameters, no augmentation.
  EpochMetrics evaluate_sample(std::size_t sample);

 private:
  double learning_rate() const;

  GraspModel& model_;
  const Dataset& data_;
  TrainConfig cfg_;
  TrainState state_;
  std::map<std::string, HandContext> hands_;
  std::vector<Eigen::VectorXd> weights_;
  std::vector<nn::SetAbstractionPlan> plans_;  // cached un-augmented plans
};

struct PretrainConfig {
  int epochs = 150;
  int batch_size = 5;
  double lr = 2e-3;
  std::uint64_t seed = 0;
};

/// Chamfer autoencoder pretraining on centroid-normalized clouds; returns the
/// mean Chamfer over `clouds` after each epoch.
std::vector<double> pretrain_object(ObjectAutoencoder& ae, const std::vector<Cloud>& clouds, const PretrainConfig& cfg,
                                    const std::function<void(int, double)>& on_epoch = {});
double mean_chamfer(ObjectAutoencoder& ae, const std::vector<Cloud>& clouds);

// ---- inference -------------------------------------------------------------

struct Prediction {
  Eigen::VectorXd q;          // clamped to joint limits
  Eigen::VectorXd q_raw;      // before clamping
  Eigen::VectorXd clamp;      // |q_raw - q| per joint
  Eigen::VectorXd amplitudes; // length K
  EigengraspSet eigengrasps;
  Eigen::RowVectorXd morphology;
  double wall_time_s = 0.0;
};

/// Full pipeline on a world-frame cloud: the cloud is centroid-normalized and
/// the wrist shifted with it before encoding.
Prediction predict_articulation(GraspModel& model, const HandModel& hand, const Cloud& cloud, const WristPose& wrist);
Prediction predict_articulation(std::string_view urdf_text, const Cloud& cloud, const WristPose& wrist,
                                const std::filesystem::path& checkpoint);

}  // namespace crossgrasp
