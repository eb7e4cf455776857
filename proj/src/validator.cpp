#include "ugg/validator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ugg/common.hpp"
#include "ugg/rng.hpp"

namespace ugg {

void ContactSet::validate() const {
  if (size() == 0) return;
  check(points.rank() == 2 && points.shape()[1] == 3,
        "contact points must be [M,3], got " + shape_str(points.shape()));
  check(normals.shape() == points.shape(), "contact normals must match points");
  for (int64_t i = 0; i < size(); ++i) {
    double n2 = 0.0;
    for (int64_t j = 0; j < 3; ++j) n2 += normals.at(i, j) * normals.at(i, j);
    check(std::abs(n2 - 1.0) < 1e-6, "contact normal " + std::to_string(i) + " is not unit");
  }
  check(mu > 0.0 && lambda_w > 0.0, "contact set needs positive mu and lambda_w");
}

bool ValidityReport::any_resist() const {
  for (bool r : resist)
    if (r) return true;
  return false;
}

double penetration_depth_cm(const PointCloud& object, const HandSpec& spec,
                            const HandPose& pose) {
  std::vector<LinkPose> fk = forward_kinematics(spec, pose);
  double worst = 0.0;
  for (int64_t i = 0; i < object.size(); ++i) {
    const double sd = hand_sdf(spec, fk, object.point(i));
    worst = std::max(worst, -sd);
  }
  return worst * 100.0;
}

ContactSet build_contacts(const PointCloud& object, const Tensor& normals, const HandSpec& spec,
                          const HandPose& pose, double threshold) {
  check(normals.shape() == object.points.shape(),
        "build_contacts: normals shape " + shape_str(normals.shape()) +
            " does not match cloud " + shape_str(object.points.shape()));
  std::vector<LinkPose> fk = forward_kinematics(spec, pose);
  std::vector<int64_t> keep;
  for (int64_t i = 0; i < object.size(); ++i) {
    const double d = std::max(hand_sdf(spec, fk, object.point(i)), 0.0);
    if (d < threshold) keep.push_back(i);
  }
  ContactSet out;
  out.points = Tensor::zeros({static_cast<int64_t>(keep.size()), 3});
  out.normals = Tensor::zeros({static_cast<int64_t>(keep.size()), 3});
  for (size_t k = 0; k < keep.size(); ++k)
    for (int64_t j = 0; j < 3; ++j) {
      out.points.at(static_cast<int64_t>(k), j) = object.points.at(keep[k], j);
      out.normals.at(static_cast<int64_t>(k), j) = normals.at(keep[k], j);
    }
  return out;
}

namespace {

void orthonormal_tangents(const Vec3& n, Vec3& t1, Vec3& t2) {
  const Vec3 ref = std::abs(n.x()) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
  t1 = n.cross(ref).normalized();
  t2 = n.cross(t1);
}

double support(const std::vector<std::array<double, 6>>& ws, const std::array<double, 6>& u,
               size_t* argmax = nullptr) {
  double best = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < ws.size(); ++i) {
    double d = 0.0;
    for (int j = 0; j < 6; ++j) d += ws[i][j] * u[j];
    if (d > best) {
      best = d;
      if (argmax) *argmax = i;
    }
  }
  return best;
}

void normalize6(std::array<double, 6>& u) {
  double n2 = 0.0;
  for (double v : u) n2 += v * v;
  const double n = std::sqrt(n2);
  if (n > 0.0)
    for (double& v : u) v /= n;
}

}  // namespace

std::vector<std::array<double, 6>> contact_wrenches(const ContactSet& contacts,
                                                    int64_t cone_edges) {
  contacts.validate();
  check(cone_edges >= 3, "need at least 3 cone edges");
  std::vector<std::array<double, 6>> ws;
  ws.reserve(static_cast<size_t>(contacts.size() * cone_edges));
  for (int64_t i = 0; i < contacts.size(); ++i) {
    const Vec3 p(contacts.points.at(i, 0), contacts.points.at(i, 1), contacts.points.at(i, 2));
    const Vec3 n(contacts.normals.at(i, 0), contacts.normals.at(i, 1),
                 contacts.normals.at(i, 2));
    Vec3 t1, t2;
    orthonormal_tangents(n, t1, t2);
    const Vec3 arm = p - contacts.com;
    for (int64_t k = 0; k < cone_edges; ++k) {
      const double phi =
          2.0 * M_PI * static_cast<double>(k) / static_cast<double>(cone_edges);
      // Unit normal force pressing into the object plus friction at the cone edge.
      const Vec3 f = -n + contacts.mu * (std::cos(phi) * t1 + std::sin(phi) * t2);
      const Vec3 tau = contacts.lambda_w * arm.cross(f);
      ws.push_back({f.x(), f.y(), f.z(), tau.x(), tau.y(), tau.z()});
    }
  }
  return ws;
}

// ---------------------------------------------------------------------------
// Phase-I simplex feasibility
// ---------------------------------------------------------------------------

bool linear_feasible(const std::vector<std::array<double, 6>>& cols,
                     const std::array<double, 6>& b, bool convex_combination, double tol) {
  const size_t m = convex_combination ? 7 : 6;  // equality rows
  const size_t n = cols.size();
  if (n == 0) {
    double norm = 0.0;
    for (double v : b) norm += std::abs(v);
    return norm <= tol && !convex_combination;
  }

  // Tableau rows 0..m-1: [A | I | rhs]; row m: phase-I objective.
  const size_t ncols = n + m + 1;
  std::vector<std::vector<double>> T(m + 1, std::vector<double>(ncols, 0.0));
  for (size_t r = 0; r < m; ++r) {
    for (size_t c = 0; c < n; ++c) T[r][c] = r < 6 ? cols[c][r] : 1.0;
    T[r][ncols - 1] = r < 6 ? b[r] : 1.0;
    if (T[r][ncols - 1] < 0.0)
      for (size_t c = 0; c < ncols; ++c) T[r][c] = -T[r][c];
    T[r][n + r] = 1.0;  // artificial column (after possible row negation)
  }
  // Objective: minimize sum of artificials; express in terms of nonbasic vars.
  for (size_t c = 0; c < ncols; ++c) {
    double s = 0.0;
    for (size_t r = 0; r < m; ++r) s += T[r][c];
    T[m][c] = (c >= n && c < n + m) ? 0.0 : -s;
  }

  std::vector<size_t> basis(m);
  for (size_t r = 0; r < m; ++r) basis[r] = n + r;

  const double eps = 1e-12;
  const size_t max_iters = 50 * (n + m);
  for (size_t iter = 0; iter < max_iters; ++iter) {
    // Bland's rule: entering variable = lowest index with negative reduced cost.
    size_t enter = ncols;
    for (size_t c = 0; c + 1 < ncols; ++c) {
      if (T[m][c] < -eps) {
        enter = c;
        break;
      }
    }
    if (enter == ncols) break;  // optimal

    size_t leave = m;
    double best_ratio = 0.0;
    for (size_t r = 0; r < m; ++r) {
      if (T[r][enter] > eps) {
        const double ratio = T[r][ncols - 1] / T[r][enter];
        if (leave == m || ratio < best_ratio - eps ||
            (ratio < best_ratio + eps && basis[r] < basis[leave])) {
          leave = r;
          best_ratio = ratio;
        }
      }
    }
    if (leave == m) break;  // unbounded (cannot happen in phase I)

    const double pivot = T[leave][enter];
    for (size_t c = 0; c < ncols; ++c) T[leave][c] /= pivot;
    for (size_t r = 0; r <= m; ++r) {
      if (r == leave) continue;
      const double f = T[r][enter];
      if (f == 0.0) continue;
      for (size_t c = 0; c < ncols; ++c) T[r][c] -= f * T[leave][c];
    }
    basis[leave] = enter;
  }

  // Phase-I optimum: -T[m][rhs] is the residual artificial mass.
  return -T[m][ncols - 1] <= tol;
}

// ---------------------------------------------------------------------------
// Q1 and gravity resistance
// ---------------------------------------------------------------------------

double q1_metric(const ContactSet& contacts, int64_t cone_edges, int64_t directions,
                 int64_t refine_iters) {
  if (contacts.size() == 0) return 0.0;
  std::vector<std::array<double, 6>> ws = contact_wrenches(contacts, cone_edges);

  // The metric is positive only if the origin lies in the hull of the wrenches.
  if (!linear_feasible(ws, {0, 0, 0, 0, 0, 0}, true, 1e-9)) return 0.0;

  RngStream stream(0x51D5EED);
  std::vector<std::pair<double, std::array<double, 6>>> draws;
  draws.reserve(static_cast<size_t>(directions));
  for (int64_t k = 0; k < directions; ++k) {
    std::array<double, 6> u;
    for (double& v : u) v = stream.normal();
    normalize6(u);
    draws.emplace_back(support(ws, u), u);
  }

  // Refine from several angularly separated low-support directions, not just
  // the single best draw: the support landscape has multiple basins and the
  // draw minimum occasionally lands in a secondary one.
  std::vector<int64_t> order(draws.size());
  std::iota(order.begin(), order.end(), int64_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](int64_t a, int64_t b) { return draws[a].first < draws[b].first; });
  constexpr int kStarts = 8;
  constexpr double kSeparation = 0.3;  // radians between start directions
  std::vector<std::array<double, 6>> starts;
  std::vector<double> start_support;
  const double sep_dot = std::cos(kSeparation);
  for (int64_t id : order) {
    if (static_cast<int>(starts.size()) >= kStarts) break;
    bool close = false;
    for (const auto& s : starts) {
      double d = 0.0;
      for (int j = 0; j < 6; ++j) d += s[j] * draws[id].second[j];
      if (d > sep_dot) {
        close = true;
        break;
      }
    }
    if (!close) {
      starts.push_back(draws[id].second);
      start_support.push_back(draws[id].first);
    }
  }

  // Polish each start with best-so-far perturbation probes at a geometrically
  // shrinking radius. Gradient steps stall on the ridges of a max-of-linear
  // support function, while this search hops the shallow local basins left
  // between the sampled directions. The probe radius is floored near the
  // angular resolution of dense direction sampling on S^5: wrench hulls are
  // anisotropic enough that the exact polyhedral minimum sits several percent
  // below any sampled estimate, so collapsing onto it would make values
  // incomparable across direction budgets.
  double best_all = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < starts.size(); ++i) {
    std::array<double, 6> best_u = starts[i];
    double best = start_support[i];
    for (int64_t it = 0; it < refine_iters; ++it) {
      const double frac =
          refine_iters > 1 ? static_cast<double>(it) / static_cast<double>(refine_iters - 1) : 1.0;
      const double sigma = 0.4 * std::pow(0.2, frac);  // 0.4 down to 0.08
      for (int p = 0; p < 32; ++p) {
        std::array<double, 6> u = best_u;
        for (double& v : u) v += sigma * stream.normal();
        normalize6(u);
        const double s = support(ws, u);
        if (s < best) {
          best = s;
          best_u = u;
        }
      }
    }
    best_all = std::min(best_all, best);
  }
  return std::max(best_all, 0.0);
}

const std::array<Vec3, 6>& gravity_directions() {
  static const std::array<Vec3, 6> dirs = {Vec3(1, 0, 0),  Vec3(-1, 0, 0), Vec3(0, 1, 0),
                                           Vec3(0, -1, 0), Vec3(0, 0, 1),  Vec3(0, 0, -1)};
  return dirs;
}

bool gravity_resist(const ContactSet& contacts, const Vec3& g, int64_t cone_edges, double tol) {
  if (contacts.size() == 0) return false;
  std::vector<std::array<double, 6>> ws = contact_wrenches(contacts, cone_edges);
  const std::array<double, 6> target = {-g.x(), -g.y(), -g.z(), 0.0, 0.0, 0.0};
  return linear_feasible(ws, target, false, tol);
}

ValidityReport validate_grasp(const PointCloud& object, const HandSpec& spec,
                              const HandPose& pose) {
  check(object.size() > 0, "validate_grasp: empty object cloud");
  ValidityReport report;
  report.max_penetration_cm = penetration_depth_cm(object, spec, pose);

  const Vec3 com = centroid(object.points);
  Tensor normals = estimate_normals(object.points, com);
  ContactSet contacts = build_contacts(object, normals, spec, pose, 0.01);
  contacts.com = com;
  contacts.mu = 0.5;
  contacts.lambda_w = 1.0 / std::max(bounding_radius(object.points, com), 1e-9);

  report.q1 = q1_metric(contacts);
  const auto& dirs = gravity_directions();
  for (size_t i = 0; i < dirs.size(); ++i) report.resist[i] = gravity_resist(contacts, dirs[i]);
  report.success = report.max_penetration_cm < 0.5 && report.any_resist();
  return report;
}

}  // namespace ugg
