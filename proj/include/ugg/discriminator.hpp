#pragma once

#include <map>
#include <vector>

#include "ugg/forge.hpp"
#include "ugg/geometry.hpp"
#include "ugg/hand.hpp"
#include "ugg/nn.hpp"
#include "ugg/optim.hpp"
#include "ugg/params.hpp"
#include "ugg/rng.hpp"

namespace ugg {

struct DiscriminatorConfig {
  int64_t d = 32;        // token width
  int64_t heads = 4;
  int64_t hidden = 64;   // attention MLP and head hidden width
  int64_t n_points = 256;  // nominal cloud size; sets the kNN group size
  int64_t n_local = 16;    // object tokens (FPS centers with kNN groups)
  int64_t k = 22;        // hand DOF

  int64_t group_size() const { return n_points / n_local; }
  void validate() const;
};

// Grasp success classifier: FPS+kNN object tokens plus four projected hand
// tokens (normalized joints, rot6d, scaled translation, per-link surface
// clearance) run through two self-attention layers; object and hand tokens
// pool separately and a small head maps the concatenation to exactly two
// logits (failure, success).
class Discriminator {
 public:
  explicit Discriminator(DiscriminatorConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }
  const DiscriminatorConfig& config() const { return cfg_; }

  void init(ParamStore& store, RngStream& rng) const;

  Var logits_graph(GraphCtx& ctx, const PointCloud& object, const HandSpec& spec,
                   const HandPose& pose) const;  // [1,2]

  // Softmax probability of the success class, strictly inside (0,1).
  double score(const ParamStore& store, const PointCloud& object, const HandSpec& spec,
               const HandPose& pose) const;

 private:
  DiscriminatorConfig cfg_;
};

struct DiscTrainMetrics {
  std::vector<double> epoch_loss;  // mean training cross-entropy per epoch
  double holdout_auc = 0.0;
  int64_t train_count = 0;
  int64_t holdout_count = 0;
};

// Cross-entropy training on validator-labeled records. The majority class is
// downsampled to balance, a stratified fifth is held out, and the held-out
// AUC is reported. Single-class data is an error.
DiscTrainMetrics train_discriminator(const Discriminator& model, ParamStore& store,
                                     const std::vector<GraspRecord>& records,
                                     const std::map<std::string, PointCloud>& objects,
                                     const HandSpec& spec, int64_t epochs, double lr,
                                     RngStream& stream);

// Mann-Whitney AUC with average ranks on ties.
double auc_score(const std::vector<double>& scores, const std::vector<bool>& labels);

// Indices of the n highest scores, descending; ties keep the original order.
std::vector<int64_t> rank_and_select(const std::vector<double>& scores, int64_t n);

}  // namespace ugg
