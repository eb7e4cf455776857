#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>

#include "ugg/params.hpp"
#include "ugg/tensor.hpp"

namespace ugg {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-tensor Adam moments. `step` is the 1-based count of updates already
// applied plus one, i.e. pass 1 on the first call.
struct AdamMoments {
  Tensor m, v;
};

void adam_update(Tensor& x, const Tensor& g, AdamMoments& mom, int64_t step,
                 const AdamConfig& cfg, const std::string& path = "");

// Adam over every trainable entry of a ParamStore, consuming store gradients.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
  void step(ParamStore& store);
  int64_t step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  int64_t step_ = 0;
  std::unordered_map<std::string, AdamMoments> slots_;
};

}  // namespace ugg
