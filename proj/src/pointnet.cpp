#include "crossgrasp/pointnet.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "crossgrasp/errors.hpp"

namespace crossgrasp::nn {

ObjectEncoderConfig ObjectEncoderConfig::preset_named(const std::string& name) {
  ObjectEncoderConfig cfg;
  cfg.preset = name;
  if (name == "paper") {
    cfg.stages = {{128, 0.02, {64, 64, 128}}, {32, 0.04, {128, 128, 256}}, {1, 0.0, {256, 512, 1024}}};
  } else if (name == "desk") {
    cfg.stages = {{128, 0.02, {8, 8, 16}}, {32, 0.04, {16, 16, 32}}, {1, 0.0, {32, 64, 128}}};
  } else if (name == "tiny") {
    cfg.stages = {{16, 0.04, {4, 4}}, {4, 0.08, {6, 8}}, {1, 0.0, {8, 12}}};
    cfg.max_neighbors = 8;
  } else {
    fail(ErrorKind::ConfigMismatch, "unknown object encoder preset '" + name + "'");
  }
  return cfg;
}

nlohmann::json to_json(const ObjectEncoderConfig& cfg) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : cfg.stages) stages.push_back({{"centroids", s.centroids}, {"radius", s.radius}, {"widths", s.widths}});
  return {{"preset", cfg.preset}, {"stages", stages}, {"max_neighbors", cfg.max_neighbors}, {"global_scale", cfg.global_scale}};
}

ObjectEncoderConfig object_encoder_config_from_json(const nlohmann::json& doc) {
  ObjectEncoderConfig cfg;
  cfg.preset = doc.at("preset").get<std::string>();
  for (const auto& s : doc.at("stages")) {
    cfg.stages.push_back({s.at("centroids").get<int>(), s.at("radius").get<double>(), s.at("widths").get<std::vector<int>>()});
  }
  cfg.max_neighbors = doc.at("max_neighbors").get<int>();
  cfg.global_scale = doc.at("global_scale").get<double>();
  return cfg;
}

Matrix canonical_point_set(const Matrix& points) {
  if (points.cols() != 3) fail(ErrorKind::ShapeMismatch, "point clouds must be N x 3");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(points.rows()));
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    for (int c = 0; c < 3; ++c) {
      if (points(a, c) != points(b, c)) return points(a, c) < points(b, c);
    }
    return false;
  };
  std::sort(order.begin(), order.end(), less);
  std::vector<Eigen::Index> unique;
  for (Eigen::Index i : order) {
    if (unique.empty() || less(unique.back(), i)) unique.push_back(i);
  }
  Matrix out(static_cast<Eigen::Index>(unique.size()), 3);
  for (std::size_t r = 0; r < unique.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = points.row(unique[r]);
  return out;
}

std::vector<int> farthest_point_sample(const Matrix& points, int count) {
  const Eigen::Index n = points.rows();
  count = static_cast<int>(std::min<Eigen::Index>(count, n));
  std::vector<int> picked;
  if (count <= 0) return picked;
  const Eigen::RowVector3d mean = points.colwise().mean();
  Eigen::Index start = 0;
  double far = -1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = (points.row(i) - mean).squaredNorm();
    if (d > far) {
      far = d;
      start = i;
    }
  }
  std::vector<double> min_dist(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  Eigen::Index current = start;
  for (int k = 0; k < count; ++k) {
    picked.push_back(static_cast<int>(current));
    Eigen::Index next = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = (points.row(i) - points.row(current)).squaredNorm();
      min_dist[i] = std::min(min_dist[i], d);
      if (min_dist[i] > best) {
        best = min_dist[i];
        next = i;
      }
    }
    current = next;
  }
  return picked;
}

std::vector<int> ball_query(const Matrix& points, const Eigen::RowVector3d& center, double radius, int max_neighbors) {
  std::vector<std::pair<double, int>> inside;
  const double r2 = radius * radius;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double d = (points.row(i) - center).squaredNorm();
    if (d <= r2) inside.emplace_back(d, static_cast<int>(i));
  }
  std::sort(inside.begin(), inside.end());
  if (static_cast<int>(inside.size()) > max_neighbors) inside.resize(static_cast<std::size_t>(max_neighbors));
  std::vector<int> out;
  out.reserve(inside.size());
  for (const auto& [d, i] : inside) out.push_back(i);
  return out;
}

SetAbstractionPlan plan_set_abstraction(const Matrix& points, const ObjectEncoderConfig& cfg) {
  if (points.rows() == 0) fail(ErrorKind::EmptyCloud, "object point cloud is empty");
  Matrix current = canonical_point_set(points);
  SetAbstractionPlan plan;
  for (const SetAbstractionStage& stage : cfg.stages) {
    SetAbstractionPlan::Stage out;
    out.offsets.push_back(0);
    if (stage.radius <= 0.0) {
      out.neighbors.resize(static_cast<std::size_t>(current.rows()));
      std::iota(out.neighbors.begin(), out.neighbors.end(), 0);
      out.offsets.push_back(static_cast<int>(current.rows()));
      out.relative = current / cfg.global_scale;
      plan.stages.push_back(std::move(out));
      current = Matrix::Zero(1, 3);
      continue;
    }
    const auto centroids = farthest_point_sample(current, stage.centroids);
    std::vector<Eigen::RowVector3d> rel_rows;
    for (int c : centroids) {
      const Eigen::RowVector3d center = current.row(c);
      auto nb = ball_query(current, center, stage.radius, cfg.max_neighbors);
      if (nb.empty()) nb.push_back(c);
      for (int i : nb) {
        out.neighbors.push_back(i);
        rel_rows.push_back((current.row(i) - center) / stage.radius);
      }
      out.offsets.push_back(static_cast<int>(out.neighbors.size()));
    }
    out.relative.resize(static_cast<Eigen::Index>(rel_rows.size()), 3);
    for (std::size_t r = 0; r < rel_rows.size(); ++r) out.relative.row(static_cast<Eigen::Index>(r)) = rel_rows[r];
    Matrix next(static_cast<Eigen::Index>(centroids.size()), 3);
    for (std::size_t r = 0; r < centroids.size(); ++r) next.row(static_cast<Eigen::Index>(r)) = current.row(centroids[r]);
    current = std::move(next);
    plan.stages.push_back(std::move(out));
  }
  return plan;
}

void init_object_encoder(ParameterStore& ps, const ObjectEncoderConfig& cfg, Rng& rng, const std::string& name) {
  int in_features = 0;
  for (std::size_t s = 0; s < cfg.stages.size(); ++s) {
    std::vector<int> dims{3 + in_features};
    dims.insert(dims.end(), cfg.stages[s].widths.begin(), cfg.stages[s].widths.end());
    init_mlp(ps, name + ".sa" + std::to_string(s), dims, rng);
    in_features = cfg.stages[s].widths.back();
  }
}

Var object_encoder(Tape& tape, ParameterStore& ps, const ObjectEncoderConfig& cfg, const SetAbstractionPlan& plan,
                   const std::string& name) {
  if (plan.stages.size() != cfg.stages.size()) fail(ErrorKind::ConfigMismatch, "plan does not match encoder stages");
  Var features;
  bool has_features = false;
  for (std::size_t s = 0; s < cfg.stages.size(); ++s) {
    const auto& stage = plan.stages[s];
    Var grouped = tape.constant(stage.relative);
    if (has_features) {
      const Var parts[] = {grouped, ad::gather_rows(features, stage.neighbors)};
      grouped = ad::concat_cols(parts);
    }
    Var point_features =
        mlp(tape, ps, name + ".sa" + std::to_string(s), grouped, cfg.stages[s].widths.size(), Activation::Gelu, true);
    features = ad::max_pool_groups(point_features, stage.offsets);
    has_features = true;
  }
  return features;
}

void init_pointcloud_decoder(ParameterStore& ps, int input_dim, const DecoderConfig& cfg, Rng& rng,
                             const std::string& name) {
  init_mlp(ps, name, {input_dim, cfg.hidden, cfg.points * 3}, rng);
}

Var pointcloud_decoder(Tape& tape, ParameterStore& ps, const DecoderConfig& cfg, Var feature, const std::string& name) {
  Var flat = mlp(tape, ps, name, feature, 2, Activation::Gelu, false);
  return ad::scale(ad::reshape(flat, cfg.points, 3), cfg.output_scale);
}

}  // namespace crossgrasp::nn
