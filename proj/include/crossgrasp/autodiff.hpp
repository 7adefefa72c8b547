#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace crossgrasp::ad {

// Every array is a row-major rank-2 matrix; vectors are 1 x n.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Parameter {
  Matrix value;
  Matrix grad;
};

/// Named leaf arrays plus their gradient accumulators. Node-based storage:
/// references returned by add()/at() stay valid for the store's lifetime.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, Matrix init);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  void zero_grad();
  std::size_t scalar_count() const;
  std::size_t size() const { return params_.size(); }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::map<std::string, Parameter> params_;
};

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Tape* tape() const { return tape_; }
  int id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Records operations in evaluation order (which is a topological order) and
/// replays them backwards. One tape per forward/backward pass; not thread-safe.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Leaf bound to a parameter; repeated calls return the same node.
  Var parameter(Parameter& p);

  /// Appends an op node. `fn` runs only when some parent requires a gradient.
  Var record(Matrix value, std::initializer_list<Var> parents, Backward fn);
  Var record(Matrix value, std::span<const Var> parents, Backward fn);

  const Matrix& value(Var v) const { return nodes_[v.id_].value; }
  /// Gradient of the last backward() seed w.r.t. v (zero-sized if none reached it).
  const Matrix& grad(Var v) const { return nodes_[v.id_].grad; }
  bool requires_grad(Var v) const { return nodes_[v.id_].requires_grad; }
  void accumulate(Var v, const Matrix& g);

  /// Seeds d(loss)/d(loss) = 1; throws NotAScalarLoss unless loss is 1 x 1.
  void backward(Var loss);
  void backward(Var out, const Matrix& cotangent);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
    Parameter* param = nullptr;
  };
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
};

// ---- operations -----------------------------------------------------------
// Binary elementwise ops accept b with a's shape, a 1 x cols row (broadcast
// over rows) or a 1 x 1 scalar.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
/// Row i of the result is row idx[i] of a, or zeros when idx[i] < 0.
Var gather_rows(Var a, std::span<const int> idx);
/// Zeroes rows where keep is false without reading them.
Var mask_rows(Var a, const std::vector<bool>& keep);
/// Zeroes columns where keep is false without reading them.
Var mask_cols(Var a, const std::vector<bool>& keep);
Var repeat_rows(Var row, Eigen::Index count);
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);
Var relu(Var a);
Var gelu(Var a);
Var tanh(Var a);
/// Row-wise softmax with max subtraction. Columns with valid[c] == false get
/// an additive -inf (probability exactly zero); fully masked rows are zero.
Var softmax_rows(Var a, const std::vector<bool>& valid = {});
/// Row-wise (x - mean) / sqrt(var + eps), no affine part.
Var layer_norm_rows(Var a, double eps = 1e-5);
Var sum(Var a);
Var mean(Var a);
/// Column-wise max over row groups [offsets[g], offsets[g + 1]).
Var max_pool_groups(Var a, std::span<const int> offsets);
/// mean over entries of (a - b)^2.
Var mse(Var a, Var b);
/// (1 / n) sum_j w_j (a_j - b_j)^2 over all n entries; w has a's shape.
Var weighted_mse(Var a, Var b, const Matrix& w);
/// Symmetric Chamfer distance between the rows of `pred` (n x 3) and `target`
/// (m x 3): mean_x min_y |x - y|^2 + mean_y min_x |x - y|^2.
Var chamfer(Var pred, const Matrix& target);

// ---- optimisation and checking --------------------------------------------

struct GradcheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
};

/// Central differences at `step` against reverse mode for every parameter
/// entry (or a seeded sample of at most `max_entries_per_param` per array).
/// Relative error is |g_ad - g_fd| / max(|g_ad|, |g_fd|, floor).
GradcheckReport gradcheck(const std::function<Var(Tape&)>& build_loss, ParameterStore& params, double step = 1e-6,
                          std::size_t max_entries_per_param = static_cast<std::size_t>(-1), std::uint64_t seed = 0,
                          double floor = 1e-6);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamMoments {
  Matrix m;
  Matrix v;
};

struct AdamState {
  long step = 0;
  std::map<std::string, AdamMoments> moments;
};

/// One Adam update over every parameter accepted by `trainable` (all when empty).
void adam_step(ParameterStore& params, AdamState& state, const AdamConfig& cfg,
               const std::function<bool(const std::string&)>& trainable = {});

// ---- serialization ---------------------------------------------------------

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& doc);
/// {"format": "crossgrasp.arrays", "version": 1, "arrays": {name: {"shape", "data"}}}
nlohmann::json parameters_to_json(const ParameterStore& params);
/// Overwrites values of existing parameters (shapes must agree); returns the
/// number of arrays loaded. Unknown names are ignored when `strict` is false.
std::size_t load_parameters(ParameterStore& params, const nlohmann::json& doc, bool strict = true,
                            const std::string& prefix = "");
nlohmann::json adam_state_to_json(const AdamState& state);
AdamState adam_state_from_json(const nlohmann::json& doc);

}  // namespace crossgrasp::ad
