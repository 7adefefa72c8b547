#include "crossgrasp/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "crossgrasp/errors.hpp"

namespace crossgrasp::ad {

namespace {

std::string shape_str(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  fail(ErrorKind::ShapeMismatch, std::string(op) + ": " + shape_str(a) + " vs " + shape_str(b));
}

enum class Broadcast { Same, Row, Scalar };

Broadcast broadcast_kind(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::Same;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::Row;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::Scalar;
  shape_error(op, a, b);
}

Matrix expand(const Matrix& b, Broadcast kind, Eigen::Index rows, Eigen::Index cols) {
  switch (kind) {
    case Broadcast::Same: return b;
    case Broadcast::Row: return b.replicate(rows, 1);
    case Broadcast::Scalar: return Matrix::Constant(rows, cols, b(0, 0));
  }
  return b;
}

Matrix reduce(const Matrix& g, Broadcast kind) {
  switch (kind) {
    case Broadcast::Same: return g;
    case Broadcast::Row: return g.colwise().sum();
    case Broadcast::Scalar: return Matrix::Constant(1, 1, g.sum());
  }
  return g;
}

Matrix scalar_matrix(double v) { return Matrix::Constant(1, 1, v); }

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

// ---- ParameterStore ---------------------------------------------------------

Parameter& ParameterStore::add(const std::string& name, Matrix init) {
  if (params_.count(name)) fail(ErrorKind::ConfigMismatch, "duplicate parameter '" + name + "'");
  Parameter& p = params_[name];
  p.grad = Matrix::Zero(init.rows(), init.cols());
  p.value = std::move(init);
  return p;
}

Parameter& ParameterStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) fail(ErrorKind::ConfigMismatch, "unknown parameter '" + name + "'");
  return it->second;
}

const Parameter& ParameterStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) fail(ErrorKind::ConfigMismatch, "unknown parameter '" + name + "'");
  return it->second;
}

void ParameterStore::zero_grad() {
  for (auto& [name, p] : params_) p.grad.setZero(p.value.rows(), p.value.cols());
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

// ---- Tape -------------------------------------------------------------------

const Matrix& Var::value() const { return tape_->value(*this); }

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}, nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::parameter(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  nodes_.push_back(Node{p.value, {}, true, {}, &p});
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_.emplace(&p, id);
  return Var(this, id);
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backward fn) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(fn));
}

Var Tape::record(Matrix value, std::span<const Var> parents, Backward fn) {
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape_ != this) fail(ErrorKind::ShapeMismatch, "operands belong to different tapes");
    needs = needs || nodes_[p.id_].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(fn) : Backward{}, nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[v.id_];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var loss) {
  const Matrix& v = value(loss);
  if (v.rows() != 1 || v.cols() != 1) {
    fail(ErrorKind::NotAScalarLoss, "backward() needs a 1x1 output or an explicit cotangent, got " + shape_str(v));
  }
  backward(loss, scalar_matrix(1.0));
}

void Tape::backward(Var out, const Matrix& cotangent) {
  if (cotangent.rows() != value(out).rows() || cotangent.cols() != value(out).cols()) {
    shape_error("backward", value(out), cotangent);
  }
  for (Node& n : nodes_) n.grad.resize(0, 0);
  nodes_[out.id_].grad = cotangent;
  for (int i = out.id_; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param) n.param->grad += n.grad;
  }
}

// ---- elementwise ------------------------------------------------------------

Var add(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const Broadcast kind = broadcast_kind("add", av, bv);
  Matrix out = av + expand(bv, kind, av.rows(), av.cols());
  return a.tape()->record(std::move(out), {a, b}, [a, b, kind](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.requires_grad(b)) t.accumulate(b, reduce(g, kind));
  });
}

Var sub(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const Broadcast kind = broadcast_kind("sub", av, bv);
  Matrix out = av - expand(bv, kind, av.rows(), av.cols());
  return a.tape()->record(std::move(out), {a, b}, [a, b, kind](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.requires_grad(b)) t.accumulate(b, reduce(-g, kind));
  });
}

Var mul(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const Broadcast kind = broadcast_kind("mul", av, bv);
  Matrix out = av.cwiseProduct(expand(bv, kind, av.rows(), av.cols()));
  return a.tape()->record(std::move(out), {a, b}, [a, b, kind](Tape& t, const Matrix& g) {
    const Matrix& av = t.value(a);
    const Matrix& bv = t.value(b);
    if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(expand(bv, kind, av.rows(), av.cols())));
    if (t.requires_grad(b)) t.accumulate(b, reduce(g.cwiseProduct(av), kind));
  });
}

Var scale(Var a, double s) {
  Matrix out = a.value() * s;
  return a.tape()->record(std::move(out), {a}, [a, s](Tape& t, const Matrix& g) { t.accumulate(a, g * s); });
}

Var relu(Var a) {
  Matrix out = a.value().cwiseMax(0.0);
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    const Matrix& x = t.value(a);
    t.accumulate(a, g.cwiseProduct((x.array() > 0.0).cast<double>().matrix()));
  });
}

Var gelu(Var a) {
  const Matrix& x = a.value();
  Matrix out = x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); });
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    const Matrix d = t.value(a).unaryExpr([](double v) {
      return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
    });
    t.accumulate(a, g.cwiseProduct(d));
  });
}

Var tanh(Var a) {
  Matrix out = a.value().array().tanh().matrix();
  return a.tape()->record(out, {a}, [a, out](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct((1.0 - out.array().square()).matrix()));
  });
}

// ---- structural -------------------------------------------------------------

Var matmul(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
  Matrix out = av * bv;
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.requires_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

Var transpose(Var a) {
  Matrix out = a.value().transpose();
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g) { t.accumulate(a, g.transpose()); });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorKind::ShapeMismatch, "concat_cols of nothing");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) shape_error("concat_cols", parts[0].value(), p.value());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    offsets.push_back(c);
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Var> copy(parts.begin(), parts.end());
  return parts[0].tape()->record(std::move(out), parts, [copy, offsets](Tape& t, const Matrix& g) {
    for (std::size_t i = 0; i < copy.size(); ++i) {
      if (t.requires_grad(copy[i])) t.accumulate(copy[i], g.middleCols(offsets[i], copy[i].cols()));
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorKind::ShapeMismatch, "concat_rows of nothing");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) shape_error("concat_rows", parts[0].value(), p.value());
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    offsets.push_back(r);
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> copy(parts.begin(), parts.end());
  return parts[0].tape()->record(std::move(out), parts, [copy, offsets](Tape& t, const Matrix& g) {
    for (std::size_t i = 0; i < copy.size(); ++i) {
      if (t.requires_grad(copy[i])) t.accumulate(copy[i], g.middleRows(offsets[i], copy[i].rows()));
    }
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  const Matrix& av = a.value();
  if (start < 0 || count < 0 || start + count > av.rows()) {
    fail(ErrorKind::ShapeMismatch, "slice_rows out of range for " + shape_str(av));
  }
  Matrix out = av.middleRows(start, count);
  const Eigen::Index rows = av.rows();
  return a.tape()->record(std::move(out), {a}, [a, start, count, rows](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(rows, g.cols());
    full.middleRows(start, count) = g;
    t.accumulate(a, full);
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  const Matrix& av = a.value();
  if (start < 0 || count < 0 || start + count > av.cols()) {
    fail(ErrorKind::ShapeMismatch, "slice_cols out of range for " + shape_str(av));
  }
  Matrix out = av.middleCols(start, count);
  const Eigen::Index cols = av.cols();
  return a.tape()->record(std::move(out), {a}, [a, start, count, cols](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(g.rows(), cols);
    full.middleCols(start, count) = g;
    t.accumulate(a, full);
  });
}

Var gather_rows(Var a, std::span<const int> idx) {
  const Matrix& av = a.value();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(idx.size()), av.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= av.rows()) fail(ErrorKind::ShapeMismatch, "gather_rows index out of range");
    if (idx[i] >= 0) out.row(static_cast<Eigen::Index>(i)) = av.row(idx[i]);
  }
  std::vector<int> copy(idx.begin(), idx.end());
  const Eigen::Index rows = av.rows();
  return a.tape()->record(std::move(out), {a}, [a, copy, rows](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(rows, g.cols());
    for (std::size_t i = 0; i < copy.size(); ++i) {
      if (copy[i] >= 0) full.row(copy[i]) += g.row(static_cast<Eigen::Index>(i));
    }
    t.accumulate(a, full);
  });
}

Var mask_rows(Var a, const std::vector<bool>& keep) {
  const Matrix& av = a.value();
  if (static_cast<Eigen::Index>(keep.size()) != av.rows()) {
    fail(ErrorKind::ShapeMismatch, "mask_rows: mask length does not match " + shape_str(av));
  }
  Matrix out = Matrix::Zero(av.rows(), av.cols());
  for (Eigen::Index r = 0; r < av.rows(); ++r) {
    if (keep[r]) out.row(r) = av.row(r);
  }
  return a.tape()->record(std::move(out), {a}, [a, keep](Tape& t, const Matrix& g) {
    Matrix masked = Matrix::Zero(g.rows(), g.cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      if (keep[r]) masked.row(r) = g.row(r);
    }
    t.accumulate(a, masked);
  });
}

Var mask_cols(Var a, const std::vector<bool>& keep) {
  const Matrix& av = a.value();
  if (static_cast<Eigen::Index>(keep.size()) != av.cols()) {
    fail(ErrorKind::ShapeMismatch, "mask_cols: mask length does not match " + shape_str(av));
  }
  Matrix out = Matrix::Zero(av.rows(), av.cols());
  for (Eigen::Index c = 0; c < av.cols(); ++c) {
    if (keep[c]) out.col(c) = av.col(c);
  }
  return a.tape()->record(std::move(out), {a}, [a, keep](Tape& t, const Matrix& g) {
    Matrix masked = Matrix::Zero(g.rows(), g.cols());
    for (Eigen::Index c = 0; c < g.cols(); ++c) {
      if (keep[c]) masked.col(c) = g.col(c);
    }
    t.accumulate(a, masked);
  });
}

Var repeat_rows(Var row, Eigen::Index count) {
  const Matrix& v = row.value();
  if (v.rows() != 1) fail(ErrorKind::ShapeMismatch, "repeat_rows needs a single row, got " + shape_str(v));
  Matrix out = v.replicate(count, 1);
  return row.tape()->record(std::move(out), {row},
                            [row](Tape& t, const Matrix& g) { t.accumulate(row, g.colwise().sum()); });
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  const Matrix& av = a.value();
  if (rows * cols != av.size()) fail(ErrorKind::ShapeMismatch, "reshape " + shape_str(av) + " to " +
                                                                   std::to_string(rows) + "x" + std::to_string(cols));
  Matrix out = Eigen::Map<const Matrix>(av.data(), rows, cols);
  const Eigen::Index r0 = av.rows(), c0 = av.cols();
  return a.tape()->record(std::move(out), {a}, [a, r0, c0](Tape& t, const Matrix& g) {
    t.accumulate(a, Eigen::Map<const Matrix>(g.data(), r0, c0));
  });
}

// ---- normalisation ----------------------------------------------------------

Var softmax_rows(Var a, const std::vector<bool>& valid) {
  const Matrix& x = a.value();
  if (!valid.empty() && static_cast<Eigen::Index>(valid.size()) != x.cols()) {
    fail(ErrorKind::ShapeMismatch, "softmax mask length does not match " + shape_str(x));
  }
  auto is_valid = [&valid](Eigen::Index c) { return valid.empty() || valid[c]; };
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double peak = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (is_valid(c)) peak = std::max(peak, x(r, c));
    }
    if (peak == -std::numeric_limits<double>::infinity()) continue;
    double total = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (is_valid(c)) {
        out(r, c) = std::exp(x(r, c) - peak);
        total += out(r, c);
      }
    }
    out.row(r) /= total;
  }
  return a.tape()->record(out, {a}, [a, out](Tape& t, const Matrix& g) {
    Matrix gi(out.rows(), out.cols());
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      const double dot = g.row(r).dot(out.row(r));
      gi.row(r) = out.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
    }
    t.accumulate(a, gi);
  });
}

Var layer_norm_rows(Var a, double eps) {
  const Matrix& x = a.value();
  const Eigen::Index n = x.cols();
  Matrix y(x.rows(), n);
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const auto centered = (x.row(r).array() - mu).matrix();
    const double var = centered.squaredNorm() / static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    y.row(r) = centered * inv_std[r];
  }
  return a.tape()->record(y, {a}, [a, y, inv_std](Tape& t, const Matrix& g) {
    Matrix gi(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double g_mean = g.row(r).mean();
      const double gy_mean = g.row(r).dot(y.row(r)) / static_cast<double>(y.cols());
      gi.row(r) = inv_std[r] * (g.row(r).array() - g_mean - y.row(r).array() * gy_mean).matrix();
    }
    t.accumulate(a, gi);
  });
}

// ---- reductions -------------------------------------------------------------

Var sum(Var a) {
  const Eigen::Index r = a.rows(), c = a.cols();
  return a.tape()->record(scalar_matrix(a.value().sum()), {a},
                          [a, r, c](Tape& t, const Matrix& g) { t.accumulate(a, Matrix::Constant(r, c, g(0, 0))); });
}

Var mean(Var a) {
  const Eigen::Index r = a.rows(), c = a.cols();
  const double n = static_cast<double>(r * c);
  if (r * c == 0) fail(ErrorKind::ShapeMismatch, "mean of an empty array");
  return a.tape()->record(scalar_matrix(a.value().sum() / n), {a}, [a, r, c, n](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(r, c, g(0, 0) / n));
  });
}

Var max_pool_groups(Var a, std::span<const int> offsets) {
  const Matrix& x = a.value();
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != x.rows()) {
    fail(ErrorKind::ShapeMismatch, "max_pool_groups offsets do not cover " + shape_str(x));
  }
  const Eigen::Index groups = static_cast<Eigen::Index>(offsets.size()) - 1;
  Matrix out(groups, x.cols());
  std::vector<int> argmax(static_cast<std::size_t>(groups * x.cols()));
  for (Eigen::Index g = 0; g < groups; ++g) {
    const int begin = offsets[g], end = offsets[g + 1];
    if (end <= begin) fail(ErrorKind::ShapeMismatch, "max_pool_groups: empty group");
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      int best = begin;
      for (int r = begin + 1; r < end; ++r) {
        if (x(r, c) > x(best, c)) best = r;
      }
      out(g, c) = x(best, c);
      argmax[static_cast<std::size_t>(g * x.cols() + c)] = best;
    }
  }
  const Eigen::Index rows = x.rows();
  return a.tape()->record(std::move(out), {a}, [a, argmax, rows](Tape& t, const Matrix& g) {
    Matrix gi = Matrix::Zero(rows, g.cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      for (Eigen::Index c = 0; c < g.cols(); ++c) gi(argmax[static_cast<std::size_t>(r * g.cols() + c)], c) += g(r, c);
    }
    t.accumulate(a, gi);
  });
}

Var mse(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) shape_error("mse", av, bv);
  const double n = static_cast<double>(av.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < av.size(); ++i) {
    const double e = av.data()[i] - bv.data()[i];
    total += e * e;
  }
  return a.tape()->record(scalar_matrix(total / n), {a, b}, [a, b, n](Tape& t, const Matrix& g) {
    const Matrix diff = (t.value(a) - t.value(b)) * (2.0 * g(0, 0) / n);
    t.accumulate(a, diff);
    if (t.requires_grad(b)) t.accumulate(b, -diff);
  });
}

Var weighted_mse(Var a, Var b, const Matrix& w) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) shape_error("weighted_mse", av, bv);
  if (w.rows() != av.rows() || w.cols() != av.cols()) shape_error("weighted_mse weights", av, w);
  const double n = static_cast<double>(av.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < av.size(); ++i) {
    const double e = av.data()[i] - bv.data()[i];
    total += w.data()[i] * (e * e);
  }
  return a.tape()->record(scalar_matrix(total / n), {a, b}, [a, b, w, n](Tape& t, const Matrix& g) {
    const Matrix diff = (t.value(a) - t.value(b)).cwiseProduct(w) * (2.0 * g(0, 0) / n);
    t.accumulate(a, diff);
    if (t.requires_grad(b)) t.accumulate(b, -diff);
  });
}

Var chamfer(Var pred, const Matrix& target) {
  const Matrix& p = pred.value();
  if (p.rows() == 0 || target.rows() == 0) fail(ErrorKind::EmptyCloud, "chamfer of an empty cloud");
  if (p.cols() != 3 || target.cols() != 3) shape_error("chamfer", p, target);
  const Eigen::Index n = p.rows(), m = target.rows();
  std::vector<Eigen::Index> nearest_target(n), nearest_pred(m);
  std::vector<double> best_pred(m, std::numeric_limits<double>::infinity());
  double forward = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < m; ++j) {
      const double d = (p.row(i) - target.row(j)).squaredNorm();
      if (d < best) {
        best = d;
        nearest_target[i] = j;
      }
      if (d < best_pred[j]) {
        best_pred[j] = d;
        nearest_pred[j] = i;
      }
    }
    forward += best;
  }
  double backward_term = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) backward_term += best_pred[j];
  const double value = forward / static_cast<double>(n) + backward_term / static_cast<double>(m);
  return pred.tape()->record(
      scalar_matrix(value), {pred}, [pred, target, nearest_target, nearest_pred](Tape& t, const Matrix& g) {
        const Matrix& p = t.value(pred);
        const double n = static_cast<double>(p.rows()), m = static_cast<double>(target.rows());
        Matrix gi = Matrix::Zero(p.rows(), 3);
        for (Eigen::Index i = 0; i < p.rows(); ++i) gi.row(i) += (2.0 / n) * (p.row(i) - target.row(nearest_target[i]));
        for (Eigen::Index j = 0; j < target.rows(); ++j) {
          const Eigen::Index i = nearest_pred[j];
          gi.row(i) += (2.0 / m) * (p.row(i) - target.row(j));
        }
        t.accumulate(pred, gi * g(0, 0));
      });
}

// ---- gradcheck & Adam -------------------------------------------------------

GradcheckReport gradcheck(const std::function<Var(Tape&)>& build_loss, ParameterStore& params, double step,
                          std::size_t max_entries_per_param, std::uint64_t seed, double floor) {
  params.zero_grad();
  {
    Tape tape;
    Var loss = build_loss(tape);
    tape.backward(loss);
  }
  auto evaluate = [&]() {
    Tape tape;
    return build_loss(tape).scalar();
  };

  GradcheckReport report;
  std::mt19937_64 rng(seed);
  for (auto& [name, p] : params) {
    const Matrix analytic = p.grad;
    std::vector<Eigen::Index> entries(static_cast<std::size_t>(p.value.size()));
    std::iota(entries.begin(), entries.end(), 0);
    if (entries.size() > max_entries_per_param) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(max_entries_per_param);
    }
    for (Eigen::Index e : entries) {
      double& slot = p.value.data()[e];
      const double original = slot;
      slot = original + step;
      const double plus = evaluate();
      slot = original - step;
      const double minus = evaluate();
      slot = original;
      const double numeric = (plus - minus) / (2.0 * step);
      const double exact = analytic.data()[e];
      const double abs_err = std::abs(numeric - exact);
      const double rel_err = abs_err / std::max({std::abs(numeric), std::abs(exact), floor});
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (rel_err > report.max_rel_error || report.checked == 0) {
        report.max_rel_error = rel_err;
        report.worst_parameter = name + "[" + std::to_string(e) + "]";
      }
      ++report.checked;
    }
  }
  return report;
}

void adam_step(ParameterStore& params, AdamState& state, const AdamConfig& cfg,
               const std::function<bool(const std::string&)>& trainable) {
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (auto& [name, p] : params) {
    if (trainable && !trainable(name)) continue;
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) shape_error("adam_step", p.value, p.grad);
    AdamMoments& mom = state.moments[name];
    if (mom.m.size() == 0) {
      mom.m = Matrix::Zero(p.value.rows(), p.value.cols());
      mom.v = Matrix::Zero(p.value.rows(), p.value.cols());
    } else if (mom.m.rows() != p.value.rows() || mom.m.cols() != p.value.cols()) {
      shape_error("adam_step state", p.value, mom.m);
    }
    mom.m = cfg.beta1 * mom.m + (1.0 - cfg.beta1) * p.grad;
    mom.v = cfg.beta2 * mom.v + (1.0 - cfg.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= cfg.lr * (mom.m.array() / c1) / ((mom.v.array() / c2).sqrt() + cfg.eps);
  }
}

// ---- serialization ----------------------------------------------------------

nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"shape", {m.rows(), m.cols()}}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from_json(const nlohmann::json& doc) {
  try {
    const auto shape = doc.at("shape").get<std::vector<Eigen::Index>>();
    const auto data = doc.at("data").get<std::vector<double>>();
    if (shape.size() != 2 || shape[0] * shape[1] != static_cast<Eigen::Index>(data.size())) {
      fail(ErrorKind::SchemaError, "array shape does not match its data length");
    }
    return Eigen::Map<const Matrix>(data.data(), shape[0], shape[1]);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::SchemaError, e.what());
  }
}

nlohmann::json parameters_to_json(const ParameterStore& params) {
  nlohmann::json arrays = nlohmann::json::object();
  for (const auto& [name, p] : params) arrays[name] = matrix_to_json(p.value);
  return {{"format", "crossgrasp.arrays"}, {"version", 1}, {"arrays", std::move(arrays)}};
}

std::size_t load_parameters(ParameterStore& params, const nlohmann::json& doc, bool strict, const std::string& prefix) {
  if (doc.value("format", "") != "crossgrasp.arrays" || doc.value("version", 0) != 1) {
    fail(ErrorKind::SchemaError, "not a version-1 crossgrasp array container");
  }
  std::size_t loaded = 0;
  for (const auto& [name, array] : doc.at("arrays").items()) {
    if (!prefix.empty() && name.rfind(prefix, 0) != 0) continue;
    if (!params.contains(name)) {
      if (strict) fail(ErrorKind::ConfigMismatch, "checkpoint array '" + name + "' has no matching parameter");
      continue;
    }
    Parameter& p = params.at(name);
    Matrix value = matrix_from_json(array);
    if (value.rows() != p.value.rows() || value.cols() != p.value.cols()) {
      fail(ErrorKind::ConfigMismatch, "checkpoint array '" + name + "' is " + shape_str(value) + ", model expects " +
                                          shape_str(p.value));
    }
    p.value = std::move(value);
    ++loaded;
  }
  if (strict && prefix.empty() && loaded != params.size()) {
    fail(ErrorKind::ConfigMismatch, "checkpoint covers " + std::to_string(loaded) + " of " +
                                        std::to_string(params.size()) + " parameters");
  }
  return loaded;
}

nlohmann::json adam_state_to_json(const AdamState& state) {
  nlohmann::json moments = nlohmann::json::object();
  for (const auto& [name, mom] : state.moments) moments[name] = {{"m", matrix_to_json(mom.m)}, {"v", matrix_to_json(mom.v)}};
  return {{"step", state.step}, {"moments", std::move(moments)}};
}

AdamState adam_state_from_json(const nlohmann::json& doc) {
  AdamState state;
  state.step = doc.at("step").get<long>();
  for (const auto& [name, mom] : doc.at("moments").items()) {
    state.moments[name] = {matrix_from_json(mom.at("m")), matrix_from_json(mom.at("v"))};
  }
  return state;
}

}  // namespace crossgrasp::ad
