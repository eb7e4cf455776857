#pragma once

#include <vector>

#include "ugg/hand.hpp"
#include "ugg/tape.hpp"

namespace ugg {

// Differentiable counterparts of the hand queries, recorded on a tape so TTA
// and the synthesis optimizer can take gradients w.r.t. (theta, rot6d, trans).
// Conventions: rotation Vars are [3,3], translations are [3,1] columns.

struct DiffPose {
  Var theta;   // [k]
  Var rot6d;   // [6]
  Var trans;   // [3]
};

struct DiffFk {
  std::vector<Var> R;  // per link [3,3]
  std::vector<Var> t;  // per link [3,1]
};

Var rot6d_matrix_var(Tape& tape, Var r6);  // [6] -> [3,3]

DiffFk fk_on_tape(Tape& tape, const HandSpec& spec, const DiffPose& pose);

// Signed distance of P world points to the capsule union: [P,3] -> [P].
Var hand_sdf_var(Tape& tape, const HandSpec& spec, const DiffFk& fk, Var points);

// World positions of precomputed local surface samples, ordered as given: [S,3].
Var surface_points_var(Tape& tape, const DiffFk& fk, const std::vector<HandSurfacePoint>& samples);

Var joint_limit_loss_var(Tape& tape, const HandSpec& spec, Var theta);

// Sum over ordered non-adjacent sample pairs of max(delta - d(u,v), 0).
Var self_penetration_var(Tape& tape, const HandSpec& spec, const DiffFk& fk,
                         const std::vector<HandSurfacePoint>& samples, double delta);

// Sum over anchors of max(hand_sdf, 0).
Var contact_loss_var(Tape& tape, const HandSpec& spec, const DiffFk& fk, const Tensor& anchors);

// Sum over object points of max(-hand_sdf, 0); `literal_sign` flips to the
// max(+sdf, 0) reading for fidelity experiments.
Var penetration_loss_var(Tape& tape, const HandSpec& spec, const DiffFk& fk, const Tensor& points,
                         bool literal_sign = false);

}  // namespace ugg
