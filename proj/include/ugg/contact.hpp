#pragma once

#include "ugg/geometry.hpp"
#include "ugg/hand.hpp"
#include "ugg/rng.hpp"

namespace ugg {

// Contact anchors: object points within eta of the hand surface at extraction
// time. `found == false` means the candidate set was empty ("no contact").
struct ContactAnchors {
  Tensor points;  // [N_c,3], empty when !found
  bool found = false;
};

ContactAnchors extract_anchors(const PointCloud& object, const HandSpec& spec,
                               const HandPose& pose, double eta, int64_t n_c, RngStream& stream);

// Sum over anchors of max(hand_sdf, 0): zero once every anchor touches or
// enters the hand.
double contact_loss(const ContactAnchors& anchors, const HandSpec& spec, const HandPose& pose);

}  // namespace ugg
