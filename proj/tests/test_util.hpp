#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "ugg/tape.hpp"
#include "ugg/tensor.hpp"

namespace ugg::testutil {

// Max mixed relative/absolute error between the analytic gradient of
// f(leaf(x0)) and central finite differences. f must build a scalar.
inline double fd_max_rel_err(const Tensor& x0,
                             const std::function<Var(Tape&, Var)>& f,
                             double h = 1e-5) {
  Tape tape;
  Var x = tape.leaf(x0);
  Var loss = f(tape, x);
  tape.backward(loss);
  Tensor analytic = tape.grad(x);

  double worst = 0.0;
  for (int64_t i = 0; i < x0.size(); ++i) {
    Tensor xp = x0, xm = x0;
    xp[i] += h;
    xm[i] -= h;
    Tape tp, tm;
    const double fp = f(tp, tp.leaf(xp)).val().item();
    const double fm = f(tm, tm.leaf(xm)).val().item();
    const double fd = (fp - fm) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-3});
    worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
  }
  return worst;
}

}  // namespace ugg::testutil
