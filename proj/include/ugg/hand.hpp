#pragma once

#include <string>
#include <vector>

#include "ugg/geometry.hpp"
#include "ugg/rng.hpp"
#include "ugg/tensor.hpp"

namespace ugg {

// One capsule link of the articulated hand. Every non-root link carries a
// revolute joint about `axis` (applied after the fixed `pre_rot`); the root
// link is posed directly by the hand pose.
struct HandLink {
  std::string name;
  int parent = -1;
  Vec3 axis = Vec3::UnitX();     // joint axis, link frame (unit)
  Vec3 offset = Vec3::Zero();    // translation from parent frame
  Vec3 pre_rot = Vec3::Zero();   // fixed axis-angle rotation before the joint
  double radius = 0.01;          // capsule radius
  double length = 0.0;           // capsule segment length along +z (0 = sphere)
  double theta_min = 0.0, theta_max = 0.0;
};

struct HandSpec {
  std::vector<HandLink> links;

  int64_t dof() const { return static_cast<int64_t>(links.size()) - 1; }
  // Joint index of link i (i >= 1), by ordering convention.
  int64_t joint_of(int64_t link) const { return link - 1; }
  void validate() const;
  // Kinematic hop distance <= 2 (same link, parent/child, grandparent or
  // sibling): such pairs are skipped by the self-penetration term because
  // neighboring capsules overlap near their shared joints by construction.
  bool adjacent(int64_t a, int64_t b) const;
};

struct HandPose {
  Tensor theta;   // [k] radians
  Tensor rot6d;   // [6]
  Tensor trans;   // [3] meters, |t|_inf <= 0.3 workspace
};

HandPose rest_pose(const HandSpec& spec);

Mat3 rot6d_to_matrix(const Tensor& r);
Tensor matrix_to_rot6d(const Mat3& m);

struct LinkPose {
  Mat3 R;
  Vec3 t;
};

std::vector<LinkPose> forward_kinematics(const HandSpec& spec, const HandPose& pose);

// Signed distance from a world point to one posed link's capsule surface.
double capsule_sdf_world(const HandLink& link, const LinkPose& lp, const Vec3& p);

// Signed distance to the capsule union, min over links.
double hand_sdf(const HandSpec& spec, const std::vector<LinkPose>& fk, const Vec3& p);
double hand_sdf(const HandSpec& spec, const HandPose& pose, const Vec3& p);

double joint_limit_loss(const HandSpec& spec, const Tensor& theta);
Tensor normalize_joints(const HandSpec& spec, const Tensor& theta);     // -> [-1,1]^k
Tensor denormalize_joints(const HandSpec& spec, const Tensor& theta_hat);

// Area-weighted capsule surface samples in link-local frames; deterministic
// given the stream. World positions follow from the link poses.
struct HandSurfacePoint {
  int64_t link = 0;
  Vec3 local;
  Vec3 local_normal;
};
std::vector<HandSurfacePoint> hand_surface_local(const HandSpec& spec, int64_t n, RngStream& stream);
std::vector<SurfaceSample> hand_surface_world(const HandSpec& spec, const std::vector<LinkPose>& fk,
                                              const std::vector<HandSurfacePoint>& local);

// The default 23-link / 22-DOF desk hand (palm + 2 wrist joints + 5 fingers
// of 4 joints, human-hand scale).
HandSpec desk_hand();

// Versioned plain-text description: "ugghand v1" then one link per line.
void write_hand_spec(const std::string& file, const HandSpec& spec);
HandSpec read_hand_spec(const std::string& file);

}  // namespace ugg
