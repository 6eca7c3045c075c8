#pragma once

#include <string>
#include <vector>

#include "semcom/graph.hpp"
#include "semcom/params.hpp"

namespace semcom {

// Thin layer wrappers: parameters live in a ParamStore and are registered on
// the tape by name at every forward, so gradients land on named nodes.

struct Linear {
  Linear() = default;
  Linear(ParamStore& store, std::string name, int in, int out, double gain = 1.0);
  VarId forward(Graph& g, VarId x) const;

  std::string name;
  Tensor* w = nullptr;
  Tensor* b = nullptr;
};

struct Conv2d {
  Conv2d() = default;
  Conv2d(ParamStore& store, std::string name, int kernel, int in, int out, int stride,
         int pad, double gain = 1.0);
  VarId forward(Graph& g, VarId x) const;

  std::string name;
  Tensor* w = nullptr;
  Tensor* b = nullptr;
  int stride = 1;
  int pad = 0;
};

struct LayerNorm {
  LayerNorm() = default;
  LayerNorm(ParamStore& store, std::string name, int dim);
  VarId forward(Graph& g, VarId x) const;

  std::string name;
  Tensor* gamma = nullptr;
  Tensor* beta = nullptr;
};

// conv -> gelu -> conv with identity skip; in/out channel count must match
struct ResidualBlock {
  ResidualBlock() = default;
  ResidualBlock(ParamStore& store, std::string name, int channels, int kernel);
  VarId forward(Graph& g, VarId x, double dropout_rate = 0.0, Rng* rng = nullptr) const;

  Conv2d conv1, conv2;
};

// token MLP with GELU, hidden = ratio * dim
struct Mlp {
  Mlp() = default;
  Mlp(ParamStore& store, std::string name, int dim, double ratio);
  VarId forward(Graph& g, VarId x) const;

  Linear fc1, fc2;
};

// Multi-head self-attention over B independent token groups (windows).
// Token layout [B*T, C]; scores may carry an additive constant mask [B*h,T,T].
struct MultiheadAttention {
  MultiheadAttention() = default;
  MultiheadAttention(ParamStore& store, std::string name, int dim, int heads);
  VarId forward(Graph& g, VarId tokens, int groups, int tokens_per_group,
                const Tensor* mask = nullptr) const;

  Linear q, k, v, proj;
  int heads = 1;
  int dim = 0;
};

// Pre-norm transformer block: x += attn(LN(x)); x += mlp(LN(x)).
struct TransformerBlock {
  TransformerBlock() = default;
  TransformerBlock(ParamStore& store, std::string name, int dim, int heads, double mlp_ratio);
  VarId forward(Graph& g, VarId tokens, int groups, int tokens_per_group,
                const Tensor* mask = nullptr) const;

  LayerNorm norm1, norm2;
  MultiheadAttention attn;
  Mlp mlp;
};

// index map builders (element-level gathers over row-major H x W x C grids)

// [H,W,C] -> [(H/p)*(W/p), p*p*C] patch rows
IndexMap make_patchify(int h, int w, int c, int p);
// inverse of make_patchify: tokens back to the [H,W,C] grid
IndexMap make_unpatchify(int h, int w, int c, int p);
// [H,W,C] -> [nW*T, C] window partition with optional cyclic shift
IndexMap make_window_partition(int h, int w, int c, int win, int shift);
IndexMap make_window_merge(int h, int w, int c, int win, int shift);
// [B*T, heads*hd] -> [B*heads, T, hd] and back
IndexMap make_head_split(int groups, int tokens, int heads, int head_dim);
IndexMap make_head_merge(int groups, int tokens, int heads, int head_dim);
// nearest-neighbor upsample [H,W,C] -> [H*f, W*f, C]
IndexMap make_upsample_nearest(int h, int w, int c, int f);
// sub-pixel rearrangement [H,W,f*f*C] -> [H*f, W*f, C]
IndexMap make_depth_to_space(int h, int w, int c, int f);

// 4-tap bilinear resize tables for linear_combine
void make_bilinear_taps(int in_h, int in_w, int c, int out_h, int out_w, IndexMap& idx,
                        CoefMap& coef);

// Additive attention mask for shifted windows: token pairs from different
// pre-shift regions must not attend to each other.
Tensor make_shift_mask(int h, int w, int win, int shift, int heads);

// sinusoidal tables
Tensor sinusoidal_positions(int count, int dim);       // [count, dim]
Tensor sinusoidal_time(int step, int count, int dim);  // step index broadcast to [count, dim]

}  // namespace semcom
