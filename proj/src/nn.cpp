#include "ugg/nn.hpp"

#include <cmath>

#include "ugg/common.hpp"

namespace ugg {

Var GraphCtx::p(const std::string& path) {
  auto it = bound.find(path);
  if (it != bound.end()) return Var{&tape, it->second};
  Var v = tape.leaf(params.get(path));
  bound[path] = v.id;
  return v;
}

void GraphCtx::harvest_grads() {
  for (const auto& [path, id] : bound) {
    Tensor g = tape.grad(Var{&tape, id});
    Tensor& slot = params.grad(path);
    check(slot.same_shape(g), "gradient shape mismatch for '" + path + "'");
    for (int64_t i = 0; i < g.size(); ++i) slot[i] += g[i];
  }
}

Var activate(Var x, Act act) {
  switch (act) {
    case Act::None: return x;
    case Act::ReLU: return relu(x);
    case Act::GELU: return gelu(x);
  }
  check(false, "unknown activation");
  return x;
}

namespace {
// Glorot-normal weight init, zero bias.
void init_dense(ParamStore& store, RngStream& rng, const std::string& path, int64_t in, int64_t out) {
  Tensor& w = store.create(path + ".w", {in, out});
  RngStream sub = rng.fork(path);
  const double std = std::sqrt(2.0 / static_cast<double>(in + out));
  for (int64_t i = 0; i < w.size(); ++i) w[i] = std * sub.normal();
  store.create(path + ".b", {out});
}
}  // namespace

void Dense::init(ParamStore& store, RngStream& rng) const {
  init_dense(store, rng, path, in, out);
}

Var Dense::operator()(GraphCtx& ctx, Var x) const {
  const Shape xs = x.val().shape();
  check(!xs.empty() && xs.back() == in,
        "dense '" + path + "' wants last dim " + std::to_string(in) + ", got " + shape_str(xs));
  Var flat = x;
  if (xs.size() != 2) flat = reshape(x, {x.val().size() / in, in});
  Var y = add(matmul(flat, ctx.p(path + ".w")), ctx.p(path + ".b"));
  if (xs.size() != 2) {
    Shape out_shape = xs;
    out_shape.back() = out;
    y = reshape(y, out_shape);
  }
  return y;
}

void LayerNormLayer::init(ParamStore& store) const {
  store.create(path + ".g", {dim}).fill(1.0);
  store.create(path + ".b", {dim});
}

Var LayerNormLayer::operator()(GraphCtx& ctx, Var x) const {
  return layer_norm_lastdim(x, ctx.p(path + ".g"), ctx.p(path + ".b"));
}

std::vector<Dense> Mlp::layers() const {
  check(widths.size() >= 2, "mlp '" + path + "' needs at least [in, out] widths");
  std::vector<Dense> out;
  for (size_t i = 0; i + 1 < widths.size(); ++i)
    out.emplace_back(path + ".l" + std::to_string(i), widths[i], widths[i + 1]);
  return out;
}

void Mlp::init(ParamStore& store, RngStream& rng) const {
  for (const Dense& d : layers()) d.init(store, rng);
}

Var Mlp::operator()(GraphCtx& ctx, Var x) const {
  const std::vector<Dense> ls = layers();
  for (size_t i = 0; i < ls.size(); ++i) {
    x = ls[i](ctx, x);
    if (i + 1 < ls.size() || final_act) x = activate(x, act);
  }
  return x;
}

void SelfAttention::init(ParamStore& store, RngStream& rng) const {
  check(dim % heads == 0, "attention '" + path + "' dim not divisible by heads");
  init_dense(store, rng, path + ".qkv", dim, 3 * dim);
  init_dense(store, rng, path + ".proj", dim, dim);
}

Var SelfAttention::operator()(GraphCtx& ctx, Var x) const {
  const Shape xs = x.val().shape();
  check(xs.size() == 3 && xs[2] == dim, "attention '" + path + "' wants [B,T," +
                                            std::to_string(dim) + "], got " + shape_str(xs));
  const int64_t B = xs[0], T = xs[1], dh = dim / heads;
  Var qkv = Dense{path + ".qkv", dim, 3 * dim}(ctx, x);  // [B,T,3d]
  auto split_heads = [&](Var v) {
    // [B,T,d] -> [B*h, T, dh]
    v = reshape(v, {B, T, heads, dh});
    v = transpose(v, {0, 2, 1, 3});
    return reshape(v, {B * heads, T, dh});
  };
  Var q = split_heads(slice(qkv, 2, 0, dim));
  Var k = split_heads(slice(qkv, 2, dim, dim));
  Var v = split_heads(slice(qkv, 2, 2 * dim, dim));
  Var scores = scale(bmm(q, transpose(k, {0, 2, 1})), 1.0 / std::sqrt(static_cast<double>(dh)));
  Var attn = softmax_lastdim(scores);          // [B*h, T, T]
  Var ctxv = bmm(attn, v);                     // [B*h, T, dh]
  ctxv = reshape(ctxv, {B, heads, T, dh});
  ctxv = transpose(ctxv, {0, 2, 1, 3});
  ctxv = reshape(ctxv, {B, T, dim});
  return Dense{path + ".proj", dim, dim}(ctx, ctxv);
}

void TransformerBlock::init(ParamStore& store, RngStream& rng) const {
  ln1().init(store);
  ln2().init(store);
  attn().init(store, rng);
  mlp().init(store, rng);
}

Var TransformerBlock::operator()(GraphCtx& ctx, Var x) const {
  x = add(x, attn()(ctx, ln1()(ctx, x)));
  x = add(x, mlp()(ctx, ln2()(ctx, x)));
  return x;
}

void UVitTrunk::init(ParamStore& store, RngStream& rng) const {
  check(depth >= 2 && depth % 2 == 0, "u-vit trunk depth must be even and >= 2");
  for (int64_t i = 0; i < depth; ++i) block(i).init(store, rng);
  for (int64_t i = depth / 2; i < depth; ++i) fuse(i).init(store, rng);
  out_norm().init(store);
}

Var UVitTrunk::operator()(GraphCtx& ctx, Var x) const {
  std::vector<Var> skips;
  for (int64_t i = 0; i < depth / 2; ++i) {
    x = block(i)(ctx, x);
    skips.push_back(x);
  }
  for (int64_t i = depth / 2; i < depth; ++i) {
    Var s = skips.back();
    skips.pop_back();
    x = fuse(i)(ctx, concat({x, s}, 2));
    x = block(i)(ctx, x);
  }
  return out_norm()(ctx, x);
}

Tensor timestep_embedding(int64_t t, int64_t dim) {
  check(dim >= 2 && dim % 2 == 0, "timestep embedding width must be even");
  Tensor out({dim});
  const int64_t half = dim / 2;
  for (int64_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) /
                                 static_cast<double>(half > 1 ? half - 1 : 1));
    out[i] = std::sin(static_cast<double>(t) * freq);
    out[half + i] = std::cos(static_cast<double>(t) * freq);
  }
  return out;
}

}  // namespace ugg
