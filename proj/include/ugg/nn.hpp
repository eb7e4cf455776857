#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ugg/params.hpp"
#include "ugg/rng.hpp"
#include "ugg/tape.hpp"

namespace ugg {

// Binds one forward pass to a (tape, store) pair. Parameters enter the graph
// through p(), which creates at most one leaf per path so repeated use shares
// a single gradient slot; harvest_grads() adds tape gradients back onto the
// store after backward().
struct GraphCtx {
  Tape& tape;
  ParamStore& params;
  std::unordered_map<std::string, int> bound;

  Var p(const std::string& path);
  Var c(Tensor value) { return tape.constant(std::move(value)); }
  void harvest_grads();
};

enum class Act { None, ReLU, GELU };

Var activate(Var x, Act act);

// Dense y = x W + b over the last axis; x may be rank 2 or 3.
struct Dense {
  std::string path;
  int64_t in = 0, out = 0;
  Dense() = default;
  Dense(std::string path, int64_t in, int64_t out) : path(std::move(path)), in(in), out(out) {}
  void init(ParamStore& store, RngStream& rng) const;
  Var operator()(GraphCtx& ctx, Var x) const;
};

struct LayerNormLayer {
  std::string path;
  int64_t dim = 0;
  LayerNormLayer() = default;
  LayerNormLayer(std::string path, int64_t dim) : path(std::move(path)), dim(dim) {}
  void init(ParamStore& store) const;
  Var operator()(GraphCtx& ctx, Var x) const;
};

// widths = [in, h1, ..., out]; activation between layers, optionally after the
// last one as well.
struct Mlp {
  std::string path;
  std::vector<int64_t> widths;
  Act act = Act::ReLU;
  bool final_act = false;
  Mlp() = default;
  Mlp(std::string path, std::vector<int64_t> widths, Act act = Act::ReLU, bool final_act = false)
      : path(std::move(path)), widths(std::move(widths)), act(act), final_act(final_act) {}
  void init(ParamStore& store, RngStream& rng) const;
  Var operator()(GraphCtx& ctx, Var x) const;
  std::vector<Dense> layers() const;
};

// Multi-head self-attention over [B, T, d] (fused QKV projection).
struct SelfAttention {
  std::string path;
  int64_t dim = 0, heads = 0;
  SelfAttention() = default;
  SelfAttention(std::string path, int64_t dim, int64_t heads)
      : path(std::move(path)), dim(dim), heads(heads) {}
  void init(ParamStore& store, RngStream& rng) const;
  Var operator()(GraphCtx& ctx, Var x) const;
};

// Pre-norm transformer block: x += attn(ln1(x)); x += mlp(ln2(x)).
struct TransformerBlock {
  std::string path;
  int64_t dim = 0, heads = 0, hidden = 0;
  TransformerBlock() = default;
  TransformerBlock(std::string path, int64_t dim, int64_t heads, int64_t hidden)
      : path(std::move(path)), dim(dim), heads(heads), hidden(hidden) {}
  void init(ParamStore& store, RngStream& rng) const;
  Var operator()(GraphCtx& ctx, Var x) const;

 private:
  LayerNormLayer ln1() const { return {path + ".ln1", dim}; }
  LayerNormLayer ln2() const { return {path + ".ln2", dim}; }
  SelfAttention attn() const { return {path + ".attn", dim, heads}; }
  Mlp mlp() const { return {path + ".mlp", {dim, hidden, dim}, Act::GELU, false}; }
};

// Transformer trunk with U-ViT style long skips: the first half of the blocks
// push their outputs, the second half concat the popped skip and fuse it with
// a linear layer before the block. Token-permutation equivariant (no
// positional embedding of its own).
struct UVitTrunk {
  std::string path;
  int64_t dim = 0, depth = 0, heads = 0, hidden = 0;
  UVitTrunk() = default;
  UVitTrunk(std::string path, int64_t dim, int64_t depth, int64_t heads, int64_t hidden)
      : path(std::move(path)), dim(dim), depth(depth), heads(heads), hidden(hidden) {}
  void init(ParamStore& store, RngStream& rng) const;
  Var operator()(GraphCtx& ctx, Var x) const;  // [B, T, d] -> [B, T, d]

 private:
  TransformerBlock block(int64_t i) const {
    return {path + ".block" + std::to_string(i), dim, heads, hidden};
  }
  Dense fuse(int64_t i) const {
    return {path + ".fuse" + std::to_string(i), 2 * dim, dim};
  }
  LayerNormLayer out_norm() const { return {path + ".out_norm", dim}; }
};

// Sinusoidal timestep embedding of width `dim` (even), frequencies spaced
// geometrically from 1 to 1/10000, as a plain tensor (no grad path needed).
Tensor timestep_embedding(int64_t t, int64_t dim);

}  // namespace ugg
