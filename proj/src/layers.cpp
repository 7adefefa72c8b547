#include "crossgrasp/layers.hpp"

#include <cmath>

#include "crossgrasp/errors.hpp"

namespace crossgrasp::nn {

Var activate(Var x, Activation act) {
  switch (act) {
    case Activation::Gelu: return ad::gelu(x);
    case Activation::Relu: return ad::relu(x);
    case Activation::None: return x;
  }
  return x;
}

void init_linear(ParameterStore& ps, const std::string& name, int in, int out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix w(in, out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  ps.add(name + ".weight", std::move(w));
  ps.add(name + ".bias", Matrix::Zero(1, out));
}

Var linear(Tape& tape, ParameterStore& ps, const std::string& name, Var x) {
  Var w = tape.parameter(ps.at(name + ".weight"));
  Var b = tape.parameter(ps.at(name + ".bias"));
  return ad::add(ad::matmul(x, w), b);
}

void init_mlp(ParameterStore& ps, const std::string& name, const std::vector<int>& dims, Rng& rng) {
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) init_linear(ps, name + ".l" + std::to_string(i), dims[i], dims[i + 1], rng);
}

Var mlp(Tape& tape, ParameterStore& ps, const std::string& name, Var x, std::size_t layers, Activation act,
        bool activate_last) {
  for (std::size_t i = 0; i < layers; ++i) {
    x = linear(tape, ps, name + ".l" + std::to_string(i), x);
    if (i + 1 < layers || activate_last) x = activate(x, act);
  }
  return x;
}

void init_layer_norm(ParameterStore& ps, const std::string& name, int dim) {
  ps.add(name + ".gamma", Matrix::Ones(1, dim));
  ps.add(name + ".beta", Matrix::Zero(1, dim));
}

Var layer_norm(Tape& tape, ParameterStore& ps, const std::string& name, Var x) {
  Var y = ad::layer_norm_rows(x, 1e-5);
  return ad::add(ad::mul(y, tape.parameter(ps.at(name + ".gamma"))), tape.parameter(ps.at(name + ".beta")));
}

void init_attention(ParameterStore& ps, const std::string& name, int dim, Rng& rng) {
  for (const char* part : {".q", ".k", ".v", ".o"}) init_linear(ps, name + part, dim, dim, rng);
}

Var self_attention(Tape& tape, ParameterStore& ps, const std::string& name, Var x, int heads,
                   const std::vector<bool>& key_valid) {
  const Eigen::Index dim = x.cols();
  if (heads <= 0 || dim % heads != 0) {
    fail(ErrorKind::ConfigMismatch, "width " + std::to_string(dim) + " is not divisible by " + std::to_string(heads) + " heads");
  }
  const Eigen::Index head_dim = dim / heads;
  Var q = linear(tape, ps, name + ".q", x);
  Var k = linear(tape, ps, name + ".k", x);
  Var v = linear(tape, ps, name + ".v", x);
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<Var> outputs;
  outputs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Var qh = ad::slice_cols(q, h * head_dim, head_dim);
    Var kh = ad::slice_cols(k, h * head_dim, head_dim);
    Var vh = ad::slice_cols(v, h * head_dim, head_dim);
    Var scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_scale);
    Var probs = ad::softmax_rows(scores, key_valid);
    outputs.push_back(ad::matmul(probs, vh));
  }
  Var merged = heads == 1 ? outputs.front() : ad::concat_cols(outputs);
  return linear(tape, ps, name + ".o", merged);
}

void init_encoder_layer(ParameterStore& ps, const std::string& name, int dim, int ffn_dim, Rng& rng) {
  init_layer_norm(ps, name + ".norm1", dim);
  init_attention(ps, name + ".attn", dim, rng);
  init_layer_norm(ps, name + ".norm2", dim);
  init_mlp(ps, name + ".ffn", {dim, ffn_dim, dim}, rng);
}

Var encoder_layer(Tape& tape, ParameterStore& ps, const std::string& name, Var x, int heads,
                  const std::vector<bool>& row_valid) {
  Var attn = self_attention(tape, ps, name + ".attn", layer_norm(tape, ps, name + ".norm1", x), heads, row_valid);
  x = ad::add(x, attn);
  Var ffn = mlp(tape, ps, name + ".ffn", layer_norm(tape, ps, name + ".norm2", x), 2, Activation::Gelu, false);
  x = ad::add(x, ffn);
  return row_valid.empty() ? x : ad::mask_rows(x, row_valid);
}

void init_attention_pool(ParameterStore& ps, const std::string& name, int dim, Rng& rng) {
  init_linear(ps, name + ".key", dim, dim, rng);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  Matrix query(1, dim);
  for (Eigen::Index i = 0; i < query.size(); ++i) query.data()[i] = dist(rng);
  ps.add(name + ".query", std::move(query));
}

Var attention_pool(Tape& tape, ParameterStore& ps, const std::string& name, Var x,
                   const std::vector<bool>& row_valid) {
  Var keys = linear(tape, ps, name + ".key", x);
  Var query = tape.parameter(ps.at(name + ".query"));
  Var scores = ad::scale(ad::matmul(query, ad::transpose(keys)), 1.0 / std::sqrt(static_cast<double>(x.cols())));
  Var weights = ad::softmax_rows(scores, row_valid);
  return ad::matmul(weights, x);
}

}  // namespace crossgrasp::nn
