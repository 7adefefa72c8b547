#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crossgrasp/layers.hpp"

namespace crossgrasp::nn {

struct SetAbstractionStage {
  int centroids = 0;         // ignored for the global stage
  double radius = 0.0;       // <= 0 marks the global stage
  std::vector<int> widths;   // per-point MLP widths
};

struct ObjectEncoderConfig {
  std::string preset = "desk";
  std::vector<SetAbstractionStage> stages;
  int max_neighbors = 32;
  double global_scale = 0.1;  // meters; global-stage coordinates are divided by it

  int output_dim() const { return stages.empty() ? 0 : stages.back().widths.back(); }

  /// "paper": (128, 0.02, [64,64,128]), (32, 0.04, [128,128,256]), global [256,512,1024].
  /// "desk":  the same stages with every width divided by 8.
  /// "tiny":  widths divided by 32 with fewer centroids, for gradient checks.
  static ObjectEncoderConfig preset_named(const std::string& name);
};

nlohmann::json to_json(const ObjectEncoderConfig& cfg);
ObjectEncoderConfig object_encoder_config_from_json(const nlohmann::json& doc);

/// Canonical point set: rows sorted lexicographically, exact duplicates
/// removed. Makes every downstream step independent of input order and
/// multiplicity.
Matrix canonical_point_set(const Matrix& points);

/// Farthest-point sampling on a canonical set. Starts from the point farthest
/// from the mean; ties go to the lower index.
std::vector<int> farthest_point_sample(const Matrix& points, int count);

/// Ball query: indices of points within `radius` of `center`, nearest first
/// (ties by index), truncated to `max_neighbors`.
std::vector<int> ball_query(const Matrix& points, const Eigen::RowVector3d& center, double radius, int max_neighbors);

/// Precomputed (non-differentiable) grouping for one cloud.
struct SetAbstractionPlan {
  struct Stage {
    std::vector<int> neighbors;  // flattened neighbor indices into the previous stage's points
    std::vector<int> offsets;    // group boundaries into `neighbors`
    Matrix relative;             // one row per neighbor: normalized coordinates
  };
  std::vector<Stage> stages;
};

SetAbstractionPlan plan_set_abstraction(const Matrix& points, const ObjectEncoderConfig& cfg);

void init_object_encoder(ParameterStore& ps, const ObjectEncoderConfig& cfg, Rng& rng, const std::string& name = "object");
/// Returns the 1 x output_dim global feature.
Var object_encoder(Tape& tape, ParameterStore& ps, const ObjectEncoderConfig& cfg, const SetAbstractionPlan& plan,
                   const std::string& name = "object");

struct DecoderConfig {
  int points = 128;
  int hidden = 256;
  double output_scale = 0.1;
};

void init_pointcloud_decoder(ParameterStore& ps, int input_dim, const DecoderConfig& cfg, Rng& rng,
                             const std::string& name = "decoder");
/// MLP from the object feature to a points x 3 cloud.
Var pointcloud_decoder(Tape& tape, ParameterStore& ps, const DecoderConfig& cfg, Var feature,
                       const std::string& name = "decoder");

}  // namespace crossgrasp::nn
