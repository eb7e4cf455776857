#include "ugg/tta.hpp"

#include <cmath>
#include <limits>

#include "ugg/common.hpp"
#include "ugg/hand_diff.hpp"
#include "ugg/optim.hpp"
#include "ugg/params.hpp"
#include "ugg/tape.hpp"

namespace ugg {

void TtaWeights::validate() const {
  check(w_pen >= 0.0 && w_spen >= 0.0 && w_joint >= 0.0 && w_cont >= 0.0,
        "tta weights must be nonnegative");
  check(delta >= 0.0, "self-penetration margin must be nonnegative");
  check(steps >= 0, "step count must be nonnegative");
  check(lr > 0.0, "tta learning rate must be positive");
  check(surface_samples >= 2, "need at least two surface samples");
}

TtaEval tta_loss(const PointCloud& object, const HandSpec& spec, const HandPose& pose,
                 const Tensor& anchors, const TtaWeights& weights,
                 const std::vector<HandSurfacePoint>& surface) {
  weights.validate();
  if (anchors.size() > 0)
    check(anchors.rank() == 2 && anchors.shape()[1] == 3,
          "anchors must be [N_c,3], got " + shape_str(anchors.shape()));

  Tape tape;
  DiffPose dp{tape.leaf(pose.theta), tape.leaf(pose.rot6d), tape.leaf(pose.trans)};
  DiffFk fk = fk_on_tape(tape, spec, dp);

  Var pen = object.size() > 0
                ? penetration_loss_var(tape, spec, fk, object.points, weights.literal_pen_sign)
                : tape.constant(Tensor::scalar(0.0));
  Var spen = self_penetration_var(tape, spec, fk, surface, weights.delta);
  Var joint = joint_limit_loss_var(tape, spec, dp.theta);
  Var cont = contact_loss_var(tape, spec, fk, anchors);

  Var total = add(add(scale(pen, weights.w_pen), scale(spen, weights.w_spen)),
                  add(scale(joint, weights.w_joint), scale(cont, weights.w_cont)));
  tape.backward(total);

  TtaEval eval;
  eval.loss = total.val().item();
  eval.pen = pen.val().item();
  eval.spen = spen.val().item();
  eval.joint = joint.val().item();
  eval.cont = cont.val().item();
  eval.d_theta = tape.grad(dp.theta);
  eval.d_rot6d = tape.grad(dp.rot6d);
  eval.d_trans = tape.grad(dp.trans);
  return eval;
}

TtaResult optimize(const PointCloud& object, const HandSpec& spec, const HandPose& start,
                   const Tensor& anchors, const TtaWeights& weights, RngStream& stream) {
  weights.validate();
  const std::vector<HandSurfacePoint> surface =
      hand_surface_local(spec, weights.surface_samples, stream);

  ParamStore store;
  store.create("tta.theta", start.theta.shape()) = start.theta;
  store.create("tta.rot6d", start.rot6d.shape()) = start.rot6d;
  store.create("tta.trans", start.trans.shape()) = start.trans;

  AdamConfig cfg;
  cfg.lr = weights.lr;
  Adam adam(cfg);

  TtaResult res;
  res.pose = start;
  res.best_loss = std::numeric_limits<double>::infinity();

  auto current = [&]() {
    HandPose p;
    p.theta = store.get("tta.theta");
    p.rot6d = store.get("tta.rot6d");
    p.trans = store.get("tta.trans");
    return p;
  };

  for (int64_t s = 0; s <= weights.steps; ++s) {
    const HandPose pose = current();
    const TtaEval eval = tta_loss(object, spec, pose, anchors, weights, surface);
    res.trace.push_back(eval.loss);
    if (!std::isfinite(eval.loss)) break;
    if (eval.loss < res.best_loss) {
      res.best_loss = eval.loss;
      res.pose = pose;
    }
    if (s == weights.steps) break;  // final evaluation only
    // A finite loss can still carry non-finite gradients (relu masks clamp
    // diverged values); stop rather than feed them to the optimizer.
    if (!eval.d_theta.all_finite() || !eval.d_rot6d.all_finite() || !eval.d_trans.all_finite())
      break;

    store.zero_grads();
    store.grad("tta.theta") = eval.d_theta;
    store.grad("tta.rot6d") = eval.d_rot6d;
    store.grad("tta.trans") = eval.d_trans;
    adam.step(store);
  }
  return res;
}

}  // namespace ugg
