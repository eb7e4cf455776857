#pragma once

#include <array>
#include <vector>

#include "ugg/geometry.hpp"
#include "ugg/hand.hpp"

namespace ugg {

// Contact points on the object surface with outward normals, plus the scalar
// knobs of the wrench construction.
struct ContactSet {
  Tensor points;   // [M, 3]
  Tensor normals;  // [M, 3], unit, object-outward
  double mu = 0.5;        // friction coefficient
  double lambda_w = 1.0;  // torque scale (1 / object bounding radius)
  Vec3 com = Vec3::Zero();

  int64_t size() const { return points.size() == 0 ? 0 : points.shape()[0]; }
  void validate() const;
};

struct ValidityReport {
  double max_penetration_cm = 0.0;
  double q1 = 0.0;
  std::array<bool, 6> resist{};
  bool success = false;

  bool any_resist() const;
};

// Max over object points of max(-hand_sdf, 0), reported in centimeters.
double penetration_depth_cm(const PointCloud& object, const HandSpec& spec,
                            const HandPose& pose);

// Keep object samples whose clamped hand distance is below the threshold.
ContactSet build_contacts(const PointCloud& object, const Tensor& normals, const HandSpec& spec,
                          const HandPose& pose, double threshold = 0.01);

// Friction cones discretized into cone_edges forces of unit normal component;
// each contact contributes cone_edges wrenches (f, lambda_w (p-com) x f).
std::vector<std::array<double, 6>> contact_wrenches(const ContactSet& contacts,
                                                    int64_t cone_edges);

// Phase-I simplex feasibility of {x >= 0 : A x = b} within tol.
bool linear_feasible(const std::vector<std::array<double, 6>>& cols,
                     const std::array<double, 6>& b, bool convex_combination, double tol);

// Ferrari-Canny epsilon metric: radius of the largest origin-centered ball in
// the convex hull of the contact wrenches, estimated as the min over sampled
// unit 6-D directions of the hull support, with perturbation refinement around
// the minimizer. Zero when the origin is not inside the hull.
double q1_metric(const ContactSet& contacts, int64_t cone_edges = 8,
                 int64_t directions = 4096, int64_t refine_iters = 20);

// True iff the wrench (-g, 0) lies in the nonnegative cone of the contact
// wrenches (quasi-static resistance to gravity pull along g, unit mass).
bool gravity_resist(const ContactSet& contacts, const Vec3& g, int64_t cone_edges = 8,
                    double tol = 1e-9);

const std::array<Vec3, 6>& gravity_directions();

// Full static validity: penetration in cm, contacts at 1 cm threshold with PCA
// normals, Q1, six-direction resistance, and the success flag
// (penetration < 0.5 cm and at least one direction resisted).
ValidityReport validate_grasp(const PointCloud& object, const HandSpec& spec,
                              const HandPose& pose);

}  // namespace ugg
