#include "ugg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "ugg/common.hpp"

namespace ugg {

void PointCloud::validate() const {
  check(points.rank() == 2 && points.dim(1) == 3 && points.dim(0) >= 1,
        "point cloud wants shape [N>=1,3], got " + shape_str(points.shape()));
  check(points.all_finite(), "point cloud has non-finite coordinates");
  if (features.size() > 0) {
    check(features.rank() == 2 && features.dim(0) == points.dim(0),
          "feature channel rows must match points, got " + shape_str(features.shape()));
    check(features.all_finite(), "point features non-finite");
  }
}

void Primitive::validate() const {
  check(a > 0.0, "primitive dimension a must be positive");
  if (kind != PrimKind::Sphere) check(b > 0.0, "primitive dimension b must be positive");
  if (kind == PrimKind::Box) check(c > 0.0, "box half extent c must be positive");
  check((rot * rot.transpose() - Mat3::Identity()).norm() < 1e-9, "primitive pose rotation not orthonormal");
}

double Primitive::surface_area() const {
  switch (kind) {
    case PrimKind::Sphere: return 4.0 * M_PI * a * a;
    case PrimKind::Box: return 8.0 * (a * b + b * c + a * c);
    case PrimKind::Capsule: return 2.0 * M_PI * a * (2.0 * b) + 4.0 * M_PI * a * a;
    case PrimKind::Cylinder: return 2.0 * M_PI * a * (2.0 * b) + 2.0 * M_PI * a * a;
  }
  return 0.0;
}

double sdf(const Primitive& prim, const Vec3& p) {
  const Vec3 q = prim.rot.transpose() * (p - prim.pos);
  switch (prim.kind) {
    case PrimKind::Sphere:
      return q.norm() - prim.a;
    case PrimKind::Box: {
      const Vec3 h(prim.a, prim.b, prim.c);
      const Vec3 d = q.cwiseAbs() - h;
      const Vec3 outside = d.cwiseMax(0.0);
      const double inside = std::min(std::max({d.x(), d.y(), d.z()}), 0.0);
      return outside.norm() + inside;
    }
    case PrimKind::Capsule: {
      Vec3 v = q;
      v.z() -= std::clamp(q.z(), -prim.b, prim.b);
      return v.norm() - prim.a;
    }
    case PrimKind::Cylinder: {
      const double dr = std::hypot(q.x(), q.y()) - prim.a;
      const double dz = std::abs(q.z()) - prim.b;
      const double outside = std::hypot(std::max(dr, 0.0), std::max(dz, 0.0));
      const double inside = std::min(std::max(dr, dz), 0.0);
      return outside + inside;
    }
  }
  return 0.0;
}

namespace {

Vec3 unit_sphere_dir(RngStream& rng) {
  // Marsaglia rejection keeps the distribution exactly uniform.
  for (;;) {
    const double x = rng.uniform(-1.0, 1.0);
    const double y = rng.uniform(-1.0, 1.0);
    const double z = rng.uniform(-1.0, 1.0);
    const double n2 = x * x + y * y + z * z;
    if (n2 > 1e-12 && n2 <= 1.0) return Vec3(x, y, z) / std::sqrt(n2);
  }
}

SurfaceSample sample_local(const Primitive& prim, RngStream& rng) {
  switch (prim.kind) {
    case PrimKind::Sphere: {
      const Vec3 d = unit_sphere_dir(rng);
      return {prim.a * d, d};
    }
    case PrimKind::Box: {
      const Vec3 h(prim.a, prim.b, prim.c);
      const double areas[3] = {h.y() * h.z(), h.x() * h.z(), h.x() * h.y()};
      const double total = areas[0] + areas[1] + areas[2];
      double pick = rng.uniform(0.0, total);
      int axis = 0;
      while (axis < 2 && pick > areas[axis]) pick -= areas[axis], ++axis;
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      Vec3 p;
      p[axis] = sign * h[axis];
      const int u = (axis + 1) % 3, v = (axis + 2) % 3;
      p[u] = rng.uniform(-h[u], h[u]);
      p[v] = rng.uniform(-h[v], h[v]);
      Vec3 n = Vec3::Zero();
      n[axis] = sign;
      return {p, n};
    }
    case PrimKind::Capsule: {
      const double side = 2.0 * M_PI * prim.a * (2.0 * prim.b);
      const double caps = 4.0 * M_PI * prim.a * prim.a;
      if (rng.uniform(0.0, side + caps) < side) {
        const double phi = rng.uniform(0.0, 2.0 * M_PI);
        const double z = rng.uniform(-prim.b, prim.b);
        const Vec3 n(std::cos(phi), std::sin(phi), 0.0);
        return {Vec3(prim.a * n.x(), prim.a * n.y(), z), n};
      }
      Vec3 d = unit_sphere_dir(rng);
      const double end = d.z() >= 0.0 ? prim.b : -prim.b;
      return {Vec3(prim.a * d.x(), prim.a * d.y(), end + prim.a * d.z()), d};
    }
    case PrimKind::Cylinder: {
      const double side = 2.0 * M_PI * prim.a * (2.0 * prim.b);
      const double disks = 2.0 * M_PI * prim.a * prim.a;
      if (rng.uniform(0.0, side + disks) < side) {
        const double phi = rng.uniform(0.0, 2.0 * M_PI);
        const double z = rng.uniform(-prim.b, prim.b);
        const Vec3 n(std::cos(phi), std::sin(phi), 0.0);
        return {Vec3(prim.a * n.x(), prim.a * n.y(), z), n};
      }
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      const double r = prim.a * std::sqrt(rng.uniform());
      const double phi = rng.uniform(0.0, 2.0 * M_PI);
      return {Vec3(r * std::cos(phi), r * std::sin(phi), sign * prim.b), Vec3(0, 0, sign)};
    }
  }
  return {};
}

}  // namespace

std::vector<SurfaceSample> surface_sample(const Primitive& prim, int64_t n, RngStream& stream) {
  check(n >= 1, "surface_sample wants n >= 1");
  prim.validate();
  std::vector<SurfaceSample> out;
  out.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    SurfaceSample s = sample_local(prim, stream);
    out.push_back({prim.rot * s.point + prim.pos, prim.rot * s.normal});
  }
  return out;
}

double sdf_union(const std::vector<Primitive>& prims, const Vec3& p) {
  check(!prims.empty(), "sdf_union of zero primitives");
  double best = std::numeric_limits<double>::infinity();
  for (const Primitive& prim : prims) best = std::min(best, sdf(prim, p));
  return best;
}

std::vector<SurfaceSample> surface_sample_union(const std::vector<Primitive>& prims, int64_t n,
                                                RngStream& stream) {
  check(!prims.empty() && n >= 1, "surface_sample_union wants primitives and n >= 1");
  std::vector<double> areas;
  double total = 0.0;
  for (const Primitive& prim : prims) {
    prim.validate();
    areas.push_back(prim.surface_area());
    total += areas.back();
  }
  std::vector<SurfaceSample> out;
  out.reserve(static_cast<size_t>(n));
  int64_t guard = 0;
  while (static_cast<int64_t>(out.size()) < n) {
    check(++guard < 1000 * n, "surface_sample_union stalled (degenerate overlapping union?)");
    double pick = stream.uniform(0.0, total);
    size_t idx = 0;
    while (idx + 1 < prims.size() && pick > areas[idx]) pick -= areas[idx], ++idx;
    SurfaceSample s = sample_local(prims[idx], stream);
    const Vec3 world = prims[idx].rot * s.point + prims[idx].pos;
    bool interior = false;
    for (size_t j = 0; j < prims.size() && !interior; ++j)
      if (j != idx && sdf(prims[j], world) < -1e-9) interior = true;
    if (!interior) out.push_back({world, prims[idx].rot * s.normal});
  }
  return out;
}

std::vector<int64_t> farthest_point_sample(const Tensor& points, int64_t n, int64_t start) {
  check(points.rank() == 2 && points.dim(1) == 3, "farthest_point_sample wants [N,3]");
  const int64_t N = points.dim(0);
  check(n >= 1 && n <= N, "farthest_point_sample wants 1 <= n <= N, got n = " + std::to_string(n));
  check(start >= 0 && start < N, "farthest_point_sample start index out of range");
  std::vector<int64_t> chosen;
  chosen.reserve(static_cast<size_t>(n));
  std::vector<double> best(static_cast<size_t>(N), std::numeric_limits<double>::infinity());
  int64_t cur = start;
  for (int64_t pick = 0; pick < n; ++pick) {
    chosen.push_back(cur);
    const double cx = points[cur * 3], cy = points[cur * 3 + 1], cz = points[cur * 3 + 2];
    int64_t next = -1;
    double far2 = -1.0;
    for (int64_t i = 0; i < N; ++i) {
      const double dx = points[i * 3] - cx, dy = points[i * 3 + 1] - cy, dz = points[i * 3 + 2] - cz;
      const double d2 = dx * dx + dy * dy + dz * dz;
      if (d2 < best[static_cast<size_t>(i)]) best[static_cast<size_t>(i)] = d2;
      if (best[static_cast<size_t>(i)] > far2) {  // strict > breaks ties by lower index
        far2 = best[static_cast<size_t>(i)];
        next = i;
      }
    }
    cur = next;
  }
  return chosen;
}

std::vector<std::vector<int64_t>> knn_group(const Tensor& points, const Tensor& centers, int64_t k) {
  check(points.rank() == 2 && points.dim(1) == 3, "knn_group wants cloud [N,3]");
  check(centers.rank() == 2 && centers.dim(1) == 3, "knn_group wants centers [M,3]");
  const int64_t N = points.dim(0), M = centers.dim(0);
  check(k >= 1 && k <= N, "knn_group wants 1 <= k <= N, got k = " + std::to_string(k));
  std::vector<std::vector<int64_t>> groups(static_cast<size_t>(M));
  std::vector<std::pair<double, int64_t>> d(static_cast<size_t>(N));
  for (int64_t m = 0; m < M; ++m) {
    const double cx = centers[m * 3], cy = centers[m * 3 + 1], cz = centers[m * 3 + 2];
    for (int64_t i = 0; i < N; ++i) {
      const double dx = points[i * 3] - cx, dy = points[i * 3 + 1] - cy, dz = points[i * 3 + 2] - cz;
      d[static_cast<size_t>(i)] = {dx * dx + dy * dy + dz * dz, i};
    }
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    auto& g = groups[static_cast<size_t>(m)];
    g.reserve(static_cast<size_t>(k));
    for (int64_t i = 0; i < k; ++i) g.push_back(d[static_cast<size_t>(i)].second);
  }
  return groups;
}

Tensor estimate_normals(const Tensor& points, const Vec3& com, int64_t k) {
  const int64_t N = points.dim(0);
  k = std::min(k, N);
  const auto groups = knn_group(points, points, k);
  Tensor normals({N, 3});
  for (int64_t i = 0; i < N; ++i) {
    Vec3 mean = Vec3::Zero();
    for (int64_t j : groups[static_cast<size_t>(i)])
      mean += Vec3(points[j * 3], points[j * 3 + 1], points[j * 3 + 2]);
    mean /= static_cast<double>(k);
    Mat3 cov = Mat3::Zero();
    for (int64_t j : groups[static_cast<size_t>(i)]) {
      const Vec3 d = Vec3(points[j * 3], points[j * 3 + 1], points[j * 3 + 2]) - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    Vec3 n = eig.eigenvectors().col(0);  // smallest eigenvalue
    const Vec3 p(points[i * 3], points[i * 3 + 1], points[i * 3 + 2]);
    if (n.dot(p - com) < 0.0) n = -n;
    if (n.norm() < 1e-12) n = Vec3(0, 0, 1);
    n.normalize();
    for (int64_t c = 0; c < 3; ++c) normals[i * 3 + c] = n[c];
  }
  return normals;
}

Vec3 centroid(const Tensor& points) {
  const int64_t N = points.dim(0);
  Vec3 c = Vec3::Zero();
  for (int64_t i = 0; i < N; ++i) c += Vec3(points[i * 3], points[i * 3 + 1], points[i * 3 + 2]);
  return c / static_cast<double>(N);
}

double bounding_radius(const Tensor& points, const Vec3& com) {
  double best = 0.0;
  for (int64_t i = 0; i < points.dim(0); ++i) {
    const Vec3 p(points[i * 3], points[i * 3 + 1], points[i * 3 + 2]);
    best = std::max(best, (p - com).norm());
  }
  return best;
}

double chamfer(const Tensor& a, const Tensor& b) {
  check(a.rank() == 2 && a.dim(1) == 3 && b.rank() == 2 && b.dim(1) == 3, "chamfer wants [N,3] sets");
  auto one_way = [](const Tensor& x, const Tensor& y) {
    double acc = 0.0;
    for (int64_t i = 0; i < x.dim(0); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int64_t j = 0; j < y.dim(0); ++j) {
        const double dx = x[i * 3] - y[j * 3];
        const double dy = x[i * 3 + 1] - y[j * 3 + 1];
        const double dz = x[i * 3 + 2] - y[j * 3 + 2];
        best = std::min(best, dx * dx + dy * dy + dz * dz);
      }
      acc += std::sqrt(best);
    }
    return acc / static_cast<double>(x.dim(0));
  };
  return 0.5 * (one_way(a, b) + one_way(b, a));
}

void write_ply(const std::string& file, const PointCloud& pc) {
  pc.validate();
  const bool feat = pc.features.size() > 0;
  check(!feat || pc.features.dim(1) == 1, "PLY stores at most one feature channel");
  std::ofstream os(file);
  check(os.good(), "cannot open '" + file + "' for writing");
  const int64_t N = pc.size();
  os << "ply\nformat ascii 1.0\nelement vertex " << N
     << "\nproperty float x\nproperty float y\nproperty float z\n";
  if (feat) os << "property float feature\n";
  os << "end_header\n";
  os.precision(9);
  for (int64_t i = 0; i < N; ++i) {
    os << pc.points[i * 3] << " " << pc.points[i * 3 + 1] << " " << pc.points[i * 3 + 2];
    if (feat) os << " " << pc.features[i];
    os << "\n";
  }
  check(os.good(), "write failure on '" + file + "'");
}

PointCloud read_ply(const std::string& file) {
  std::ifstream is(file);
  check(is.good(), "cannot open PLY '" + file + "'");
  std::string line;
  check(std::getline(is, line) && line == "ply", "'" + file + "' is not a PLY file");
  int64_t n = -1;
  int props = 0;
  bool feat = false;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "end_header") break;
    if (word == "comment") continue;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      check(fmt == "ascii", "only ASCII PLY supported, '" + file + "' is " + fmt);
    } else if (word == "element") {
      std::string what;
      ls >> what >> n;
      check(what == "vertex", "unsupported PLY element '" + what + "' in '" + file + "'");
    } else if (word == "property") {
      std::string type, name;
      ls >> type >> name;
      ++props;
      if (name == "feature") feat = true;
    }
  }
  check(n >= 1, "PLY '" + file + "' has no vertices");
  check(props == (feat ? 4 : 3), "unsupported PLY property layout in '" + file + "'");
  PointCloud pc;
  pc.points = Tensor({n, 3});
  if (feat) pc.features = Tensor({n, 1});
  for (int64_t i = 0; i < n; ++i) {
    double x, y, z;
    is >> x >> y >> z;
    check(!is.fail(), "truncated PLY '" + file + "' at vertex " + std::to_string(i));
    pc.points[i * 3] = x;
    pc.points[i * 3 + 1] = y;
    pc.points[i * 3 + 2] = z;
    if (feat) {
      double f;
      is >> f;
      check(!is.fail(), "truncated PLY feature in '" + file + "' at vertex " + std::to_string(i));
      pc.features[i] = f;
    }
  }
  pc.validate();
  return pc;
}

}  // namespace ugg
