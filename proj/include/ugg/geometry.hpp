#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ugg/rng.hpp"
#include "ugg/tensor.hpp"

namespace ugg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Object point cloud: positions [N,3] (meters) plus an optional per-point
// feature channel [N,d_l].
struct PointCloud {
  Tensor points;
  Tensor features;  // empty when absent

  int64_t size() const { return points.size() == 0 ? 0 : points.dim(0); }
  Vec3 point(int64_t i) const {
    return {points[i * 3], points[i * 3 + 1], points[i * 3 + 2]};
  }
  void validate() const;  // N >= 1, finite, shapes consistent
};

enum class PrimKind { Sphere, Box, Capsule, Cylinder };

// Rigid-posed primitive solid. Dimension meaning per kind:
//   sphere   a = radius
//   box      (a, b, c) = half extents
//   capsule  a = radius, b = segment half length (local z)
//   cylinder a = radius, b = half height (local z)
struct Primitive {
  PrimKind kind = PrimKind::Sphere;
  double a = 0.0, b = 0.0, c = 0.0;
  Mat3 rot = Mat3::Identity();
  Vec3 pos = Vec3::Zero();

  void validate() const;  // dims > 0, rot orthonormal
  double surface_area() const;
};

double sdf(const Primitive& prim, const Vec3& p);

struct SurfaceSample {
  Vec3 point;
  Vec3 normal;
};

// n area-weighted surface samples with outward unit normals.
std::vector<SurfaceSample> surface_sample(const Primitive& prim, int64_t n, RngStream& stream);

// Union of primitives: sdf is the min over parts; samples are drawn
// area-weighted per part and rejected when they fall inside another part.
double sdf_union(const std::vector<Primitive>& prims, const Vec3& p);
std::vector<SurfaceSample> surface_sample_union(const std::vector<Primitive>& prims, int64_t n,
                                                RngStream& stream);

// Greedy max-min farthest point sampling; deterministic given start.
std::vector<int64_t> farthest_point_sample(const Tensor& points, int64_t n, int64_t start);

// k nearest cloud points per center, ties broken by lower index.
std::vector<std::vector<int64_t>> knn_group(const Tensor& points, const Tensor& centers, int64_t k);

// Per-point unit normals from local PCA over k neighbors, oriented away from
// `com`. Deterministic, so forge-time and replay-time labels agree.
Tensor estimate_normals(const Tensor& points, const Vec3& com, int64_t k = 16);

Vec3 centroid(const Tensor& points);
double bounding_radius(const Tensor& points, const Vec3& com);

// Symmetric point-set distance: mean of both nearest-neighbor averages.
double chamfer(const Tensor& a, const Tensor& b);

// ASCII PLY with float x/y/z and optionally one extra float property
// ("feature") for the local channel.
void write_ply(const std::string& file, const PointCloud& pc);
PointCloud read_ply(const std::string& file);

}  // namespace ugg
