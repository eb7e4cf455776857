#pragma once

#include <vector>

#include "ugg/geometry.hpp"
#include "ugg/hand.hpp"
#include "ugg/nn.hpp"
#include "ugg/optim.hpp"
#include "ugg/params.hpp"

namespace ugg {

// Object latent bundle: global code g plus latent points (positions with a
// per-point feature channel).
struct ObjectLatent {
  Tensor g;      // [d_g]
  Tensor local;  // [N, 3 + d_l]
};

struct ObjectVaeConfig {
  int64_t n_points = 256;
  int64_t d_g = 16;
  int64_t d_l = 1;
  int64_t hidden = 64;
  double kl_weight = 1e-4;
};

// Parameter layout under prefix "ovae": a shared per-point encoder, a max-pool
// global head, a conditional local-feature head, and a residual decoder.
class ObjectVae {
 public:
  explicit ObjectVae(ObjectVaeConfig cfg = {}) : cfg_(cfg) {}
  const ObjectVaeConfig& config() const { return cfg_; }

  void init(ParamStore& store, RngStream& rng) const;

  // Graph-level pieces (shape notes in the .cpp).
  Var encode_global(GraphCtx& ctx, Var pts) const;              // [N,3] -> [1, 2*d_g]
  Var encode_local(GraphCtx& ctx, Var pts, Var g) const;        // -> [N, 2*d_l]
  Var decode(GraphCtx& ctx, Var local, Var g) const;            // [N,3+d_l],[1,d_g] -> [N,3]

  // Plain inference. `sample` draws the reparameterized latent, else the mean.
  ObjectLatent encode(const ParamStore& store, const PointCloud& pc, RngStream& stream,
                      bool sample = false) const;
  PointCloud decode_cloud(const ParamStore& store, const ObjectLatent& latent) const;

  // Resample or reject clouds whose size differs from the configured N.
  PointCloud fit_cloud(const PointCloud& pc) const;

  // ELBO training; returns per-epoch mean losses.
  std::vector<double> train(ParamStore& store, const std::vector<PointCloud>& clouds,
                            int64_t epochs, int64_t batch, double lr, RngStream& stream) const;

 private:
  ObjectVaeConfig cfg_;
};

struct HandVaeConfig {
  int64_t k = 22;       // DOF
  int64_t hidden = 32;  // encoder/decoder hidden width
  int64_t d_h = 64;     // latent width
  double kl_weight = 1e-4;
};

// MLP autoencoder over normalized joint vectors, prefix "hvae".
class HandVae {
 public:
  explicit HandVae(HandVaeConfig cfg = {}) : cfg_(cfg) {}
  const HandVaeConfig& config() const { return cfg_; }

  void init(ParamStore& store, RngStream& rng) const;
  Var encode_graph(GraphCtx& ctx, Var theta_norm) const;  // [B,k] -> [B, 2*d_h]
  Var decode_graph(GraphCtx& ctx, Var g_h) const;         // [B,d_h] -> [B,k]

  // Plain inference on raw joint angles (normalization handled inside).
  Tensor encode(const ParamStore& store, const HandSpec& spec, const Tensor& theta,
                RngStream& stream, bool sample = false) const;  // -> [d_h]
  Tensor decode(const ParamStore& store, const HandSpec& spec, const Tensor& g_h) const;  // -> [k]

  std::vector<double> train(ParamStore& store, const HandSpec& spec,
                            const std::vector<Tensor>& thetas, int64_t epochs, int64_t batch,
                            double lr, RngStream& stream) const;

 private:
  HandVaeConfig cfg_;
};

// Reparameterized draw mean + exp(logvar/2) * eps with eps recorded as a
// constant, so gradients flow to mean and logvar.
Var reparameterize(GraphCtx& ctx, Var mean, Var logvar, const Tensor& eps);

// KL(N(mean, exp(logvar)) || N(0, I)) summed over elements.
Var kl_divergence(Var mean, Var logvar);

}  // namespace ugg
