#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "ugg/common.hpp"
#include "ugg/geometry.hpp"
#include "ugg/hand.hpp"
#include "ugg/validator.hpp"

using namespace ugg;

namespace {

// Single spherical link at the wrist origin; penetration math is closed-form.
HandSpec ball_hand(double radius) {
  HandSpec spec;
  HandLink root;
  root.name = "ball";
  root.parent = -1;
  root.radius = radius;
  root.length = 0.0;
  spec.links.push_back(root);
  return spec;
}

// Four vertical finger capsules tangent to a radius-0.03 sphere at the
// equator (90 degrees apart), plus a small palm sphere hovering above.
HandSpec cage_hand() {
  HandSpec spec;
  HandLink palm;
  palm.name = "palm";
  palm.parent = -1;
  palm.radius = 0.008;
  palm.length = 0.0;
  spec.links.push_back(palm);
  for (int k = 0; k < 4; ++k) {
    const double th = 0.5 * M_PI * k;
    HandLink f;
    f.name = "finger" + std::to_string(k);
    f.parent = 0;
    f.axis = Vec3::UnitX();
    f.offset = Vec3(0.038 * std::cos(th), 0.038 * std::sin(th), -0.105);
    f.radius = 0.008;
    f.length = 0.09;
    f.theta_min = -0.5;
    f.theta_max = 0.5;
    spec.links.push_back(f);
  }
  spec.validate();
  return spec;
}

PointCloud sphere_cloud(double radius, int64_t n, uint64_t seed) {
  Primitive prim;
  prim.kind = PrimKind::Sphere;
  prim.a = radius;
  RngStream stream(seed);
  const std::vector<SurfaceSample> samples = surface_sample(prim, n, stream);
  PointCloud cloud;
  cloud.points = Tensor::zeros({n, 3});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < 3; ++j) cloud.points.at(i, j) = samples[static_cast<size_t>(i)].point[j];
  return cloud;
}

// Six contacts at the axis intersections of a unit sphere, outward normals.
ContactSet axis_contacts(double mu) {
  ContactSet c;
  c.points = Tensor({6, 3}, {1, 0, 0, -1, 0, 0, 0, 1, 0, 0, -1, 0, 0, 0, 1, 0, 0, -1});
  c.normals = c.points;
  c.mu = mu;
  c.lambda_w = 1.0;
  c.com = Vec3::Zero();
  return c;
}

std::array<double, 6> unit6(RngStream& stream) {
  std::array<double, 6> u{};
  double n2 = 0.0;
  for (double& v : u) {
    v = stream.normal();
    n2 += v * v;
  }
  const double n = std::sqrt(n2);
  for (double& v : u) v /= n;
  return u;
}

double support_of(const std::vector<std::array<double, 6>>& ws, const std::array<double, 6>& u) {
  double best = -1e300;
  for (const auto& w : ws) {
    double d = 0.0;
    for (int j = 0; j < 6; ++j) d += w[j] * u[j];
    best = std::max(best, d);
  }
  return best;
}

std::array<double, 6> basis6(int i, double scale = 1.0) {
  std::array<double, 6> e{};
  e[static_cast<size_t>(i)] = scale;
  return e;
}

}  // namespace

TEST_CASE("contact set validation rejects malformed inputs") {
  ContactSet c;
  CHECK_NOTHROW(c.validate());  // empty is fine
  c.points = Tensor({2, 3}, {0.1, 0, 0, -0.1, 0, 0});
  c.normals = Tensor({2, 3}, {1, 0, 0, -1, 0, 0});
  CHECK_NOTHROW(c.validate());

  ContactSet bad = c;
  bad.normals.at(1, 0) = -0.5;  // no longer unit
  CHECK_THROWS(bad.validate());
  bad = c;
  bad.normals = Tensor::zeros({3, 3});
  CHECK_THROWS(bad.validate());
  bad = c;
  bad.mu = 0.0;
  CHECK_THROWS(bad.validate());
  bad = c;
  bad.lambda_w = -1.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("penetration depth is exact for a spherical link") {
  const HandSpec spec = ball_hand(0.02);
  const HandPose pose = rest_pose(spec);

  PointCloud cloud;
  cloud.points = Tensor({3, 3}, {0, 0, 0,        // centre: 2 cm deep
                                 0.015, 0, 0,    // 0.5 cm deep
                                 1, 1, 1});      // far outside
  CHECK(penetration_depth_cm(cloud, spec, pose) == doctest::Approx(2.0).epsilon(1e-9));

  cloud.points = Tensor({1, 3}, {0.5, 0, 0});
  CHECK(penetration_depth_cm(cloud, spec, pose) == 0.0);
}

TEST_CASE("build_contacts keeps points in the near-surface shell") {
  const HandSpec spec = ball_hand(0.02);
  const HandPose pose = rest_pose(spec);

  PointCloud cloud;
  cloud.points = Tensor({3, 3}, {0.025, 0, 0,    // 5 mm clearance: contact
                                 0.035, 0, 0,    // 15 mm clearance: skipped
                                 0.01, 0, 0});   // inside the capsule: contact
  Tensor normals({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});

  const ContactSet c = build_contacts(cloud, normals, spec, pose, 0.01);
  REQUIRE(c.size() == 2);
  CHECK(c.points.at(0, 0) == doctest::Approx(0.025));
  CHECK(c.points.at(1, 0) == doctest::Approx(0.01));
  CHECK(c.normals.at(0, 0) == doctest::Approx(1.0));  // row 0 normal
  CHECK(c.normals.at(1, 2) == doctest::Approx(1.0));  // row 2 normal

  CHECK_THROWS(build_contacts(cloud, Tensor::zeros({2, 3}), spec, pose, 0.01));
}

TEST_CASE("contact wrenches sit on the friction-cone boundary") {
  ContactSet c;
  c.points = Tensor({1, 3}, {0.02, -0.01, 0.05});
  c.normals = Tensor({1, 3}, {0.6, -0.8, 0.0});
  c.mu = 0.5;
  c.lambda_w = 2.0;
  c.com = Vec3(0.01, 0, 0);

  const auto ws = contact_wrenches(c, 8);
  REQUIRE(ws.size() == 8);

  const Vec3 n(0.6, -0.8, 0.0);
  const Vec3 arm = Vec3(0.02, -0.01, 0.05) - c.com;
  Vec3 fsum = Vec3::Zero();
  for (const auto& w : ws) {
    const Vec3 f(w[0], w[1], w[2]);
    const Vec3 tau(w[3], w[4], w[5]);
    // Unit pressing force along -n plus a tangential component of norm mu.
    CHECK(f.dot(n) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK((f - f.dot(n) * n).norm() == doctest::Approx(c.mu).epsilon(1e-12));
    CHECK((tau - c.lambda_w * arm.cross(f)).norm() == doctest::Approx(0.0).epsilon(1e-12));
    fsum += f;
  }
  // Cone edges are evenly spaced, so their tangential parts cancel.
  CHECK((fsum + 8.0 * n).norm() == doctest::Approx(0.0).epsilon(1e-9));

  CHECK_THROWS(contact_wrenches(c, 2));
}

TEST_CASE("linear feasibility solves small exact systems") {
  const std::vector<std::array<double, 6>> none;
  CHECK(linear_feasible(none, basis6(0, 0.0), false, 1e-9));        // 0 in empty cone
  CHECK_FALSE(linear_feasible(none, basis6(0, 0.0), true, 1e-9));   // empty hull
  CHECK_FALSE(linear_feasible(none, basis6(0, 0.7), false, 1e-9));

  const std::vector<std::array<double, 6>> single = {basis6(0)};
  CHECK(linear_feasible(single, basis6(0, 0.7), false, 1e-9));
  CHECK_FALSE(linear_feasible(single, basis6(0, -0.7), false, 1e-9));
  CHECK_FALSE(linear_feasible(single, basis6(0, 0.0), true, 1e-9));  // hull is {e0}

  const std::vector<std::array<double, 6>> pair = {basis6(0), basis6(0, -1.0), basis6(1)};
  CHECK(linear_feasible(pair, basis6(0, 0.0), true, 1e-9));  // 0.5 e0 + 0.5 (-e0)

  // Two cone generators mix to hit an interior target but cannot sum to
  // weight one, so the convex variant must say no.
  std::array<double, 6> target{};
  target[0] = 0.3;
  target[1] = 0.2;
  const std::vector<std::array<double, 6>> axes = {basis6(0), basis6(1)};
  CHECK(linear_feasible(axes, target, false, 1e-9));
  CHECK_FALSE(linear_feasible(axes, target, true, 1e-9));
}

TEST_CASE("q1 is zero without a surrounding wrench hull") {
  ContactSet empty;
  CHECK(q1_metric(empty) == 0.0);

  ContactSet single;
  single.points = Tensor({1, 3}, {1, 0, 0});
  single.normals = Tensor({1, 3}, {1, 0, 0});
  single.com = Vec3::Zero();
  // Every wrench of one contact pushes along -n, so the hull misses the origin.
  CHECK(q1_metric(single) == 0.0);
}

TEST_CASE("q1 on a symmetric sphere grasp matches a dense support oracle") {
  const ContactSet c = axis_contacts(1.0);
  const double q1 = q1_metric(c);
  REQUIRE(q1 > 0.1);

  // Independent estimate: minimum of the support function over a large
  // direction sample of the same wrench set.
  const auto ws = contact_wrenches(c, 8);
  RngStream stream(0xBEEF);
  double oracle = 1e300;
  for (int64_t k = 0; k < 1000000; ++k) oracle = std::min(oracle, support_of(ws, unit6(stream)));
  CHECK(q1 == doctest::Approx(oracle).epsilon(0.05));
}

TEST_CASE("q1 grows with extra contacts and shrinks under refinement") {
  const ContactSet base = axis_contacts(0.8);

  ContactSet more = base;
  const double inv = 1.0 / std::sqrt(3.0);
  more.points = Tensor::zeros({7, 3});
  more.normals = Tensor::zeros({7, 3});
  for (int64_t i = 0; i < 6; ++i)
    for (int64_t j = 0; j < 3; ++j) {
      more.points.at(i, j) = base.points.at(i, j);
      more.normals.at(i, j) = base.normals.at(i, j);
    }
  for (int64_t j = 0; j < 3; ++j) {
    more.points.at(6, j) = inv;
    more.normals.at(6, j) = inv;
  }

  // With no refinement both metrics scan the same direction set, so adding
  // wrenches can only raise the minimum support.
  const double q_base = q1_metric(base, 8, 2048, 0);
  const double q_more = q1_metric(more, 8, 2048, 0);
  CHECK(q_more >= q_base - 1e-12);

  const double q_refined = q1_metric(base, 8, 2048, 20);
  CHECK(q_refined <= q_base + 1e-12);
}

TEST_CASE("wrench normalization keeps q1 scale invariant") {
  ContactSet small = axis_contacts(0.6);
  small.lambda_w = 1.0 / 1.0;

  const double s = 2.5;
  ContactSet big = small;
  big.points = Tensor::zeros({6, 3});
  for (int64_t i = 0; i < 6; ++i)
    for (int64_t j = 0; j < 3; ++j) big.points.at(i, j) = s * small.points.at(i, j);
  big.lambda_w = small.lambda_w / s;

  const auto ws_small = contact_wrenches(small, 8);
  const auto ws_big = contact_wrenches(big, 8);
  REQUIRE(ws_small.size() == ws_big.size());
  for (size_t i = 0; i < ws_small.size(); ++i)
    for (int j = 0; j < 6; ++j)
      CHECK(ws_big[i][j] == doctest::Approx(ws_small[i][j]).epsilon(1e-12));
  CHECK(q1_metric(big) == doctest::Approx(q1_metric(small)).epsilon(1e-12));
}

TEST_CASE("an antipodal squeeze resists gravity in every axis direction") {
  ContactSet pair;
  pair.points = Tensor({2, 3}, {0.03, 0, 0, -0.03, 0, 0});
  pair.normals = Tensor({2, 3}, {1, 0, 0, -1, 0, 0});
  pair.mu = 0.5;
  pair.lambda_w = 1.0 / 0.03;
  pair.com = Vec3::Zero();

  // The squeeze direction is resisted by the pressing forces and the four
  // orthogonal directions by friction; torques cancel by symmetry.
  for (const Vec3& g : gravity_directions()) CHECK(gravity_resist(pair, g));

  ContactSet empty;
  CHECK_FALSE(gravity_resist(empty, Vec3(0, 0, -1)));
}

TEST_CASE("positive q1 implies resistance along all six axes") {
  const ContactSet c = axis_contacts(0.5);
  REQUIRE(q1_metric(c) > 0.0);
  for (const Vec3& g : gravity_directions()) CHECK(gravity_resist(c, g));
}

TEST_CASE("validate_grasp composes penetration, contacts, and resistance") {
  const PointCloud cloud = sphere_cloud(0.03, 256, 41);

  // Hand far away: nothing touches, nothing resists.
  {
    const HandSpec spec = cage_hand();
    HandPose pose = rest_pose(spec);
    pose.trans[0] = 10.0;
    const ValidityReport r = validate_grasp(cloud, spec, pose);
    CHECK(r.max_penetration_cm == 0.0);
    CHECK(r.q1 == 0.0);
    CHECK_FALSE(r.any_resist());
    CHECK_FALSE(r.success);
  }

  // A ball link swallowing the object: contacts everywhere but the
  // penetration veto kills the grasp.
  {
    const HandSpec spec = ball_hand(0.05);
    const HandPose pose = rest_pose(spec);
    const ValidityReport r = validate_grasp(cloud, spec, pose);
    CHECK(r.max_penetration_cm == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(r.any_resist());
    CHECK_FALSE(r.success);
  }

  // Four tangent fingers caging the equator: a working grasp.
  {
    const HandSpec spec = cage_hand();
    const HandPose pose = rest_pose(spec);
    const ValidityReport r = validate_grasp(cloud, spec, pose);
    CHECK(r.max_penetration_cm < 1e-6);
    CHECK(r.q1 > 0.0);
    for (bool b : r.resist) CHECK(b);
    CHECK(r.success);
  }

  PointCloud empty;
  CHECK_THROWS(validate_grasp(empty, ball_hand(0.02), rest_pose(ball_hand(0.02))));
}
