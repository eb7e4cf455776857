#include "ugg/optim.hpp"

#include <cmath>

#include "ugg/common.hpp"

namespace ugg {

void adam_update(Tensor& x, const Tensor& g, AdamMoments& mom, int64_t step,
                 const AdamConfig& cfg, const std::string& path) {
  check(x.same_shape(g), "gradient shape mismatch for parameter '" + path + "'");
  check(g.all_finite(), "non-finite gradient for parameter '" + path + "'");
  if (mom.m.size() == 0) {
    mom.m = Tensor::zeros(x.shape());
    mom.v = Tensor::zeros(x.shape());
  }
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (int64_t i = 0; i < x.size(); ++i) {
    mom.m[i] = cfg.beta1 * mom.m[i] + (1.0 - cfg.beta1) * g[i];
    mom.v[i] = cfg.beta2 * mom.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double mhat = mom.m[i] / bc1;
    const double vhat = mom.v[i] / bc2;
    x[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

void Adam::step(ParamStore& store) {
  ++step_;
  for (size_t i = 0; i < store.num_entries(); ++i) {
    ParamStore::Entry& e = store.entry_at(i);
    if (!e.trainable) continue;
    adam_update(e.value, e.grad, slots_[e.path], step_, cfg_, e.path);
  }
}

}  // namespace ugg
