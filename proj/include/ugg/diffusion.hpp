#pragma once

#include <functional>
#include <vector>

#include "ugg/nn.hpp"
#include "ugg/optim.hpp"
#include "ugg/params.hpp"
#include "ugg/rng.hpp"
#include "ugg/vae.hpp"

namespace ugg {

// Variance schedule with beta growing quadratically in sqrt-space.
struct NoiseSchedule {
  int64_t T = 0;
  std::vector<double> beta;       // [T], 1-based via beta[t-1]
  std::vector<double> alpha;      // 1 - beta
  std::vector<double> alpha_bar;  // running product of alpha
  std::vector<double> sigma;      // sqrt(beta)

  double beta_at(int64_t t) const;
  double alpha_at(int64_t t) const;
  double alpha_bar_at(int64_t t) const;
  double sigma_at(int64_t t) const;
};

NoiseSchedule make_schedule(int64_t T, double beta1, double betaT);

// x_t = sqrt(abar_t) x0 + sqrt(1-abar_t) eps; t = 0 returns x0 (conditioning).
Tensor q_sample(const Tensor& x0, int64_t t, const Tensor& eps, const NoiseSchedule& sched);

// Per-modality timesteps; 0 marks a clean conditioning modality.
struct TimestepTriple {
  int64_t t_o = 0, t_h = 0, t_c = 0;
  void validate(int64_t T) const;
};

struct DiffusionConfig {
  int64_t d = 64;       // token width
  int64_t depth = 4;    // U-ViT depth (even)
  int64_t heads = 4;
  int64_t hidden = 128; // transformer MLP hidden width
  int64_t n_points = 256;
  int64_t n_local = 16; // local tokens; group size = n_points / n_local
  int64_t n_contact = 5;
  int64_t d_g = 16, d_l = 1, d_h = 64;

  int64_t group_size() const { return n_points / n_local; }
  int64_t n_tokens() const { return 1 + n_local + 3 + n_contact; }
  void validate() const;
};

// The variables the diffusion operates on, in standardized units. Role order
// everywhere is g_o, l_o, g_h, r, t, c.
struct LatentState {
  Tensor g_o;  // [d_g]
  Tensor l_o;  // [n_points, 3+d_l]
  Tensor g_h;  // [d_h]
  Tensor r;    // [6]
  Tensor t;    // [3]
  Tensor c;    // [n_contact, 3]

  static LatentState zeros(const DiffusionConfig& cfg);
  static LatentState gaussian(const DiffusionConfig& cfg, RngStream& stream);
  void validate(const DiffusionConfig& cfg) const;
  int64_t total_dim() const;
};

// Raw-space grasp latents as produced by the VAEs and anchor extraction
// (meters for positions, unscaled codes).
struct GraspLatents {
  Tensor g_o;      // [d_g]
  Tensor l_o;      // [n_points, 3+d_l]
  Tensor g_h;      // [d_h]
  Tensor r;        // [6]
  Tensor t;        // [3]
  Tensor anchors;  // [n_contact, 3]
};

// Affine map between raw latents and diffusion space: coordinates divide by
// pos_scale, code channels standardize against dataset statistics.
struct Standardizer {
  Tensor go_mean, go_std;      // [d_g]
  Tensor feat_mean, feat_std;  // [d_l]
  Tensor gh_mean, gh_std;      // [d_h]
  double pos_scale = 0.3;

  static Standardizer identity(const DiffusionConfig& cfg);
  static Standardizer fit(const DiffusionConfig& cfg, const std::vector<GraspLatents>& data);

  // Persist as non-trainable "std.*" entries of a checkpoint store.
  void put(ParamStore& store) const;
  static Standardizer from_store(const ParamStore& store);

  LatentState standardize(const DiffusionConfig& cfg, const GraspLatents& raw) const;
  GraspLatents destandardize(const DiffusionConfig& cfg, const LatentState& state) const;
};

// Precomputed local-token layout: FPS centers over the latent positions, a
// fixed-size kNN group per center, and the nearest center of every point.
struct LocalGrouping {
  std::vector<int64_t> centers;             // [n_local] row indices
  std::vector<std::vector<int64_t>> groups; // [n_local][group_size]
  std::vector<int64_t> assign;              // [n_points] nearest-center slot
};

LocalGrouping make_grouping(const Tensor& local, const DiffusionConfig& cfg);

// Noise-prediction transformer over the 1 + N_l + 3 + N_c token sequence with
// per-modality timestep embeddings (t = 0 has its own learned embedding).
class DiffusionModel {
 public:
  explicit DiffusionModel(DiffusionConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }
  const DiffusionConfig& config() const { return cfg_; }

  void init(ParamStore& store, RngStream& rng) const;

  struct GraphOut {
    Var g_o, l_o, g_h, r, t, c;  // same shapes as the state inputs
  };
  // State enters as constants; pass a grouping to override the internally
  // computed one (used by the equivariance tests).
  GraphOut denoise_graph(GraphCtx& ctx, const LatentState& state, const TimestepTriple& ts,
                         const LocalGrouping* grouping = nullptr) const;

  LatentState predict_noise(const ParamStore& store, const LatentState& state,
                            const TimestepTriple& ts) const;

  // One Adam step on sum-of-roles noise-matching loss; returns the batch loss.
  double train_step(ParamStore& store, Adam& adam, const std::vector<LatentState>& batch,
                    const NoiseSchedule& sched, RngStream& stream,
                    bool mixed_pinning = false, double pin_prob = 0.15) const;

 private:
  DiffusionConfig cfg_;
};

enum class SampleMode { Grasp, Object, Joint };

using NoisePredictor =
    std::function<LatentState(const LatentState& state, const TimestepTriple& ts)>;

// Ancestral DDPM loop. Diffused modalities start from pure noise and update by
// x_{t-1} = (x_t - beta_t/sqrt(1-abar_t) eps_hat)/sqrt(alpha_t) + sigma_t z
// (z = 0 at t = 1); conditioning modalities are copied from `cond` untouched.
LatentState ancestral_sample(const NoisePredictor& predict, const NoiseSchedule& sched,
                             SampleMode mode, const LatentState& cond,
                             const DiffusionConfig& cfg, RngStream& stream);

// Convenience wrappers binding the trained model.
LatentState sample_grasp(const DiffusionModel& model, const ParamStore& store,
                         const NoiseSchedule& sched, const LatentState& object_cond,
                         RngStream& stream);
LatentState sample_object(const DiffusionModel& model, const ParamStore& store,
                          const NoiseSchedule& sched, const LatentState& hand_cond,
                          RngStream& stream);
LatentState sample_joint(const DiffusionModel& model, const ParamStore& store,
                         const NoiseSchedule& sched, RngStream& stream);

}  // namespace ugg
