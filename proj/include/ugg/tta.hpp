#pragma once

#include <vector>

#include "ugg/geometry.hpp"
#include "ugg/hand.hpp"
#include "ugg/rng.hpp"
#include "ugg/tensor.hpp"

namespace ugg {

// Weights and knobs of the four-term test-time refinement loss.
struct TtaWeights {
  double w_pen = 10.0;    // object points inside the hand
  double w_spen = 0.01;   // hand surface self-penetration
  double w_joint = 0.01;  // joint limit excess
  double w_cont = 10.0;   // anchors off the hand surface
  double delta = 0.005;   // self-penetration margin (m)
  int64_t steps = 100;
  double lr = 1e-3;
  int64_t surface_samples = 128;
  // Penalize max(+sdf, 0) instead of max(-sdf, 0) in the penetration term:
  // the points-outside-the-hand reading, kept switchable for experiments.
  bool literal_pen_sign = false;

  void validate() const;
};

// One loss evaluation: weighted total, the raw (unweighted) terms, and the
// gradient of the total with respect to the pose parameters.
struct TtaEval {
  double loss = 0.0;
  double pen = 0.0, spen = 0.0, joint = 0.0, cont = 0.0;
  Tensor d_theta;  // [k]
  Tensor d_rot6d;  // [6]
  Tensor d_trans;  // [3]
};

// Evaluate the refinement loss at `pose`. `anchors` is [N_c,3] (may be empty,
// dropping the contact term); `surface` holds the link-local samples backing
// the self-penetration term.
TtaEval tta_loss(const PointCloud& object, const HandSpec& spec, const HandPose& pose,
                 const Tensor& anchors, const TtaWeights& weights,
                 const std::vector<HandSurfacePoint>& surface);

struct TtaResult {
  HandPose pose;              // best pose seen, never worse than the start
  double best_loss = 0.0;
  std::vector<double> trace;  // loss per evaluation: start + one per step
};

// Adam refinement of (theta, rot6d, trans) against the object cloud and the
// generated anchors. Surface samples are drawn once from `stream`; a
// non-finite loss stops the loop and the best-so-far pose is returned.
TtaResult optimize(const PointCloud& object, const HandSpec& spec, const HandPose& start,
                   const Tensor& anchors, const TtaWeights& weights, RngStream& stream);

}  // namespace ugg
