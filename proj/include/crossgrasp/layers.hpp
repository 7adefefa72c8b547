#pragma once

#include <random>
#include <string>
#include <vector>

#include "crossgrasp/autodiff.hpp"

// Parameterised building blocks. Each block owns the parameters named
// "<name>.<field>" inside a ParameterStore; init_* creates them and the
// matching forward function reads them onto a tape.
namespace crossgrasp::nn {

using ad::Matrix;
using ad::ParameterStore;
using ad::Tape;
using ad::Var;
using Rng = std::mt19937_64;

enum class Activation { Gelu, Relu, None };

Var activate(Var x, Activation act);

// y = x W + b with W: in x out (Glorot-uniform), b: 1 x out (zeros).
void init_linear(ParameterStore& ps, const std::string& name, int in, int out, Rng& rng);
Var linear(Tape& tape, ParameterStore& ps, const std::string& name, Var x);

// dims = {in, hidden..., out}; activation between layers and, optionally,
// after the last one.
void init_mlp(ParameterStore& ps, const std::string& name, const std::vector<int>& dims, Rng& rng);
Var mlp(Tape& tape, ParameterStore& ps, const std::string& name, Var x, std::size_t layers, Activation act,
        bool activate_last);

void init_layer_norm(ParameterStore& ps, const std::string& name, int dim);
Var layer_norm(Tape& tape, ParameterStore& ps, const std::string& name, Var x);

/// Multi-head self-attention over the rows of x. Keys with key_valid false
/// receive an additive -inf score.
void init_attention(ParameterStore& ps, const std::string& name, int dim, Rng& rng);
Var self_attention(Tape& tape, ParameterStore& ps, const std::string& name, Var x, int heads,
                   const std::vector<bool>& key_valid);

/// Pre-norm encoder layer: x + Attn(LN(x)), then + FFN(LN(x)). Rows whose
/// row_valid flag is false are zeroed on output.
void init_encoder_layer(ParameterStore& ps, const std::string& name, int dim, int ffn_dim, Rng& rng);
Var encoder_layer(Tape& tape, ParameterStore& ps, const std::string& name, Var x, int heads,
                  const std::vector<bool>& row_valid);

/// Learned-query attention pooling: softmax over valid rows of
/// (x W_k) q / sqrt(dim), returning the weighted sum of rows (1 x dim).
void init_attention_pool(ParameterStore& ps, const std::string& name, int dim, Rng& rng);
Var attention_pool(Tape& tape, ParameterStore& ps, const std::string& name, Var x,
                   const std::vector<bool>& row_valid);

}  // namespace crossgrasp::nn
