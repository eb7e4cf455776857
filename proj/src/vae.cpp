#include "ugg/vae.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "ugg/common.hpp"

namespace ugg {

namespace {

// Repeat a [1,d] row n times via a broadcast multiply with a column of ones.
Var tile_rows(GraphCtx& ctx, Var row, int64_t n) {
  return mul(ctx.c(Tensor::full({n, 1}, 1.0)), row);
}

Tensor cloud_matrix(const PointCloud& pc) { return pc.points; }

}  // namespace

Var reparameterize(GraphCtx& ctx, Var mean, Var logvar, const Tensor& eps) {
  check(eps.shape() == mean.shape(), "reparameterize: eps shape " + shape_str(eps.shape()) +
                                         " does not match mean " + shape_str(mean.shape()));
  return add(mean, mul(exp_(scale(logvar, 0.5)), ctx.c(eps)));
}

Var kl_divergence(Var mean, Var logvar) {
  // 0.5 * sum(mean^2 + exp(logvar) - logvar - 1)
  Var inner = sub(add(square(mean), exp_(logvar)), add_const(logvar, 1.0));
  return scale(sum_all(inner), 0.5);
}

// ---------------------------------------------------------------------------
// Object VAE
// ---------------------------------------------------------------------------

namespace {

Mlp ovae_enc_pp(const ObjectVaeConfig& c) {
  return {"ovae.enc_pp", {3, c.hidden, c.hidden}, Act::ReLU, true};
}
Dense ovae_enc_g(const ObjectVaeConfig& c) { return {"ovae.enc_g", c.hidden, 2 * c.d_g}; }
Mlp ovae_enc_l(const ObjectVaeConfig& c) {
  return {"ovae.enc_l", {3 + c.d_g, c.hidden, 2 * c.d_l}, Act::ReLU, false};
}
Mlp ovae_dec(const ObjectVaeConfig& c) {
  return {"ovae.dec", {3 + c.d_l + c.d_g, c.hidden, c.hidden, 3}, Act::ReLU, false};
}

}  // namespace

void ObjectVae::init(ParamStore& store, RngStream& rng) const {
  ovae_enc_pp(cfg_).init(store, rng);
  ovae_enc_g(cfg_).init(store, rng);
  ovae_enc_l(cfg_).init(store, rng);
  ovae_dec(cfg_).init(store, rng);
}

// pts [N,3] -> [1, 2*d_g]: shared per-point trunk, max-pool over points, then
// a linear head producing mean || logvar of the global code.
Var ObjectVae::encode_global(GraphCtx& ctx, Var pts) const {
  Var h = ovae_enc_pp(cfg_)(ctx, pts);        // [N, hidden]
  Var pooled = max_axis(h, 0, true);          // [1, hidden]
  return ovae_enc_g(cfg_)(ctx, pooled);       // [1, 2*d_g]
}

// pts [N,3], g [1,d_g] -> [N, 2*d_l]: per-point mean || logvar of the local
// feature channels, conditioned on the global code.
Var ObjectVae::encode_local(GraphCtx& ctx, Var pts, Var g) const {
  const int64_t n = pts.shape()[0];
  Var in = concat({pts, tile_rows(ctx, g, n)}, 1);  // [N, 3+d_g]
  return ovae_enc_l(cfg_)(ctx, in);
}

// local [N,3+d_l], g [1,d_g] -> [N,3]: residual refinement of the latent
// positions, so reconstruction collapses when the positions are destroyed.
Var ObjectVae::decode(GraphCtx& ctx, Var local, Var g) const {
  const int64_t n = local.shape()[0];
  Var in = concat({local, tile_rows(ctx, g, n)}, 1);  // [N, 3+d_l+d_g]
  Var offsets = ovae_dec(cfg_)(ctx, in);              // [N, 3]
  Var pts = slice(local, 1, 0, 3);
  return add(pts, offsets);
}

ObjectLatent ObjectVae::encode(const ParamStore& store, const PointCloud& pc, RngStream& stream,
                               bool sample) const {
  PointCloud fitted = fit_cloud(pc);
  Tape tape(false);
  GraphCtx ctx{tape, const_cast<ParamStore&>(store), {}};
  Var pts = ctx.c(cloud_matrix(fitted));

  Var gstats = encode_global(ctx, pts);
  Var g_mean = slice(gstats, 1, 0, cfg_.d_g);
  Var g_logvar = slice(gstats, 1, cfg_.d_g, cfg_.d_g);
  Var g = sample ? reparameterize(ctx, g_mean, g_logvar, stream.gaussian({1, cfg_.d_g})) : g_mean;

  Var lstats = encode_local(ctx, pts, g);
  Var l_mean = slice(lstats, 1, 0, cfg_.d_l);
  Var l_logvar = slice(lstats, 1, cfg_.d_l, cfg_.d_l);
  Var feat = sample ? reparameterize(ctx, l_mean, l_logvar,
                                     stream.gaussian({cfg_.n_points, cfg_.d_l}))
                    : l_mean;

  ObjectLatent out;
  out.g = Tensor(Shape{cfg_.d_g}, g.val().raw());
  out.local = concat({pts, feat}, 1).val();
  return out;
}

PointCloud ObjectVae::decode_cloud(const ParamStore& store, const ObjectLatent& latent) const {
  check(latent.local.shape() == Shape({cfg_.n_points, 3 + cfg_.d_l}),
        "decode_cloud: latent.local has shape " + shape_str(latent.local.shape()));
  check(latent.g.size() == cfg_.d_g, "decode_cloud: latent.g has " +
                                         std::to_string(latent.g.size()) + " values, expected " +
                                         std::to_string(cfg_.d_g));
  Tape tape(false);
  GraphCtx ctx{tape, const_cast<ParamStore&>(store), {}};
  Var local = ctx.c(latent.local);
  Var g = ctx.c(Tensor(Shape{1, cfg_.d_g}, latent.g.raw()));
  Var out = decode(ctx, local, g);
  PointCloud pc;
  pc.points = out.val();
  return pc;
}

PointCloud ObjectVae::fit_cloud(const PointCloud& pc) const {
  check(pc.size() >= cfg_.n_points, "fit_cloud: cloud has " + std::to_string(pc.size()) +
                                        " points, need at least " +
                                        std::to_string(cfg_.n_points));
  PointCloud out;
  if (pc.size() == cfg_.n_points) {
    out.points = pc.points;
    return out;
  }
  std::vector<int64_t> keep = farthest_point_sample(pc.points, cfg_.n_points, 0);
  out.points = Tensor::zeros({cfg_.n_points, 3});
  for (int64_t i = 0; i < cfg_.n_points; ++i) {
    for (int64_t d = 0; d < 3; ++d) out.points.at(i, d) = pc.points.at(keep[i], d);
  }
  return out;
}

std::vector<double> ObjectVae::train(ParamStore& store, const std::vector<PointCloud>& clouds,
                                     int64_t epochs, int64_t batch, double lr,
                                     RngStream& stream) const {
  check(!clouds.empty(), "object vae training set is empty");
  check(batch > 0 && epochs > 0, "object vae training needs positive epochs and batch size");

  std::vector<PointCloud> fitted;
  fitted.reserve(clouds.size());
  for (const PointCloud& pc : clouds) fitted.push_back(fit_cloud(pc));

  Adam adam({lr});
  const int64_t m = static_cast<int64_t>(fitted.size());
  std::vector<double> epoch_losses;
  for (int64_t e = 0; e < epochs; ++e) {
    RngStream estream = stream.fork("ovae_epoch" + std::to_string(e));
    std::vector<int64_t> order = estream.permutation(m);
    double total = 0.0;
    int64_t nbatches = 0;
    for (int64_t start = 0; start < m; start += batch) {
      const int64_t bsz = std::min(batch, m - start);
      Tape tape;
      GraphCtx ctx{tape, store, {}};
      Var sum_loss = ctx.c(Tensor::scalar(0.0));
      for (int64_t b = 0; b < bsz; ++b) {
        const PointCloud& pc = fitted[order[start + b]];
        Var pts = ctx.c(cloud_matrix(pc));

        Var gstats = encode_global(ctx, pts);
        Var g_mean = slice(gstats, 1, 0, cfg_.d_g);
        Var g_logvar = slice(gstats, 1, cfg_.d_g, cfg_.d_g);
        Var g = reparameterize(ctx, g_mean, g_logvar, estream.gaussian({1, cfg_.d_g}));

        Var lstats = encode_local(ctx, pts, g);
        Var l_mean = slice(lstats, 1, 0, cfg_.d_l);
        Var l_logvar = slice(lstats, 1, cfg_.d_l, cfg_.d_l);
        Var feat = reparameterize(ctx, l_mean, l_logvar,
                                  estream.gaussian({cfg_.n_points, cfg_.d_l}));

        Var out = decode(ctx, concat({pts, feat}, 1), g);
        Var recon = sum_all(square(sub(out, pts)));
        Var kl = add(kl_divergence(g_mean, g_logvar), kl_divergence(l_mean, l_logvar));
        sum_loss = add(sum_loss, add(recon, scale(kl, cfg_.kl_weight)));
      }
      Var loss = scale(sum_loss, 1.0 / static_cast<double>(bsz));
      const double lval = loss.val().item();
      check(std::isfinite(lval), "object vae training diverged (non-finite loss at epoch " +
                                     std::to_string(e) + ")");
      store.zero_grads();
      tape.backward(loss);
      ctx.harvest_grads();
      adam.step(store);
      total += lval;
      ++nbatches;
    }
    epoch_losses.push_back(total / static_cast<double>(nbatches));
  }
  return epoch_losses;
}

// ---------------------------------------------------------------------------
// Hand VAE
// ---------------------------------------------------------------------------

namespace {

Dense hvae_enc(const HandVaeConfig& c) { return {"hvae.enc", c.k, c.hidden}; }
Dense hvae_mean(const HandVaeConfig& c) { return {"hvae.mean", c.hidden, c.d_h}; }
Dense hvae_logvar(const HandVaeConfig& c) { return {"hvae.logvar", c.hidden, c.d_h}; }
Mlp hvae_dec(const HandVaeConfig& c) {
  return {"hvae.dec", {c.d_h, c.hidden, c.k}, Act::ReLU, false};
}

}  // namespace

void HandVae::init(ParamStore& store, RngStream& rng) const {
  hvae_enc(cfg_).init(store, rng);
  hvae_mean(cfg_).init(store, rng);
  hvae_logvar(cfg_).init(store, rng);
  hvae_dec(cfg_).init(store, rng);
  // Low-noise posterior at initialization, as for the object VAE.
  store.get("hvae.logvar.b").fill(-6.0);
}

Var HandVae::encode_graph(GraphCtx& ctx, Var theta_norm) const {
  Var h = relu(hvae_enc(cfg_)(ctx, theta_norm));  // [B, hidden]
  return concat({hvae_mean(cfg_)(ctx, h), hvae_logvar(cfg_)(ctx, h)}, 1);  // [B, 2*d_h]
}

Var HandVae::decode_graph(GraphCtx& ctx, Var g_h) const { return hvae_dec(cfg_)(ctx, g_h); }

Tensor HandVae::encode(const ParamStore& store, const HandSpec& spec, const Tensor& theta,
                       RngStream& stream, bool sample) const {
  check(theta.size() == cfg_.k, "hand vae encode: theta has " + std::to_string(theta.size()) +
                                    " joints, expected " + std::to_string(cfg_.k));
  Tensor thn = normalize_joints(spec, theta);
  Tape tape(false);
  GraphCtx ctx{tape, const_cast<ParamStore&>(store), {}};
  Var stats = encode_graph(ctx, ctx.c(Tensor(Shape{1, cfg_.k}, thn.raw())));
  Var mean = slice(stats, 1, 0, cfg_.d_h);
  Var logvar = slice(stats, 1, cfg_.d_h, cfg_.d_h);
  Var g = sample ? reparameterize(ctx, mean, logvar, stream.gaussian({1, cfg_.d_h})) : mean;
  return Tensor(Shape{cfg_.d_h}, g.val().raw());
}

Tensor HandVae::decode(const ParamStore& store, const HandSpec& spec, const Tensor& g_h) const {
  check(g_h.size() == cfg_.d_h, "hand vae decode: latent has " + std::to_string(g_h.size()) +
                                    " values, expected " + std::to_string(cfg_.d_h));
  Tape tape(false);
  GraphCtx ctx{tape, const_cast<ParamStore&>(store), {}};
  Var out = decode_graph(ctx, ctx.c(Tensor(Shape{1, cfg_.d_h}, g_h.raw())));
  Tensor thn(Shape{cfg_.k}, out.val().raw());
  return denormalize_joints(spec, thn);
}

std::vector<double> HandVae::train(ParamStore& store, const HandSpec& spec,
                                   const std::vector<Tensor>& thetas, int64_t epochs,
                                   int64_t batch, double lr, RngStream& stream) const {
  check(!thetas.empty(), "hand vae training set is empty");
  check(batch > 0 && epochs > 0, "hand vae training needs positive epochs and batch size");

  const int64_t m = static_cast<int64_t>(thetas.size());
  Tensor data = Tensor::zeros({m, cfg_.k});
  for (int64_t i = 0; i < m; ++i) {
    check(thetas[i].size() == cfg_.k, "hand vae training: item " + std::to_string(i) + " has " +
                                          std::to_string(thetas[i].size()) + " joints");
    Tensor thn = normalize_joints(spec, thetas[i]);
    for (int64_t j = 0; j < cfg_.k; ++j) data.at(i, j) = thn[j];
  }

  Adam adam({lr});
  std::vector<double> epoch_losses;
  for (int64_t e = 0; e < epochs; ++e) {
    RngStream estream = stream.fork("hvae_epoch" + std::to_string(e));
    std::vector<int64_t> order = estream.permutation(m);
    double total = 0.0;
    int64_t nbatches = 0;
    for (int64_t start = 0; start < m; start += batch) {
      const int64_t bsz = std::min(batch, m - start);
      Tensor bt = Tensor::zeros({bsz, cfg_.k});
      for (int64_t b = 0; b < bsz; ++b)
        for (int64_t j = 0; j < cfg_.k; ++j) bt.at(b, j) = data.at(order[start + b], j);

      Tape tape;
      GraphCtx ctx{tape, store, {}};
      Var x = ctx.c(bt);
      Var stats = encode_graph(ctx, x);
      Var mean = slice(stats, 1, 0, cfg_.d_h);
      Var logvar = slice(stats, 1, cfg_.d_h, cfg_.d_h);
      Var g = reparameterize(ctx, mean, logvar, estream.gaussian({bsz, cfg_.d_h}));
      Var out = decode_graph(ctx, g);

      const double inv_b = 1.0 / static_cast<double>(bsz);
      Var recon = scale(sum_all(square(sub(out, x))), inv_b);
      Var kl = scale(kl_divergence(mean, logvar), inv_b);
      Var loss = add(recon, scale(kl, cfg_.kl_weight));

      const double lval = loss.val().item();
      check(std::isfinite(lval), "hand vae training diverged (non-finite loss at epoch " +
                                     std::to_string(e) + ")");
      store.zero_grads();
      tape.backward(loss);
      ctx.harvest_grads();
      adam.step(store);
      total += lval;
      ++nbatches;
    }
    epoch_losses.push_back(total / static_cast<double>(nbatches));
  }
  return epoch_losses;
}

}  // namespace ugg
