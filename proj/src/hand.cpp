#include "ugg/hand.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "ugg/common.hpp"

namespace ugg {

void HandSpec::validate() const {
  check(!links.empty(), "hand spec has no links");
  check(links[0].parent == -1, "first hand link must be the root (parent -1)");
  for (size_t i = 1; i < links.size(); ++i) {
    const HandLink& l = links[i];
    check(l.parent >= 0 && l.parent < static_cast<int>(i),
          "link '" + l.name + "' parent must precede it");
    check(l.theta_min < l.theta_max, "link '" + l.name + "' limits must satisfy min < max");
    check(std::abs(l.axis.norm() - 1.0) < 1e-9, "link '" + l.name + "' joint axis must be unit");
  }
  for (const HandLink& l : links) {
    check(l.radius > 0.0 && l.length >= 0.0, "link '" + l.name + "' capsule dims invalid");
  }
}

bool HandSpec::adjacent(int64_t a, int64_t b) const {
  if (a == b) return true;
  const auto pa = links[static_cast<size_t>(a)].parent;
  const auto pb = links[static_cast<size_t>(b)].parent;
  if (pa == b || pb == a) return true;              // parent/child
  if (pa >= 0 && pa == pb) return true;             // siblings
  if (pa >= 0 && links[static_cast<size_t>(pa)].parent == b) return true;  // grandparent
  if (pb >= 0 && links[static_cast<size_t>(pb)].parent == a) return true;
  return false;
}

HandPose rest_pose(const HandSpec& spec) {
  HandPose p;
  p.theta = Tensor::zeros({spec.dof()});
  p.rot6d = Tensor({6}, {1, 0, 0, 0, 1, 0});
  p.trans = Tensor::zeros({3});
  return p;
}

Mat3 rot6d_to_matrix(const Tensor& r) {
  check(r.size() == 6, "rot6d wants 6 floats, got " + shape_str(r.shape()));
  Vec3 a1(r[0], r[1], r[2]);
  Vec3 a2(r[3], r[4], r[5]);
  const double n1 = a1.norm();
  check(n1 > 1e-8, "degenerate rot6d: first triple near zero");
  const Vec3 b1 = a1 / n1;
  Vec3 v2 = a2 - a2.dot(b1) * b1;
  const double n2 = v2.norm();
  check(n2 > 1e-8, "degenerate rot6d: triples near parallel");
  const Vec3 b2 = v2 / n2;
  const Vec3 b3 = b1.cross(b2);
  Mat3 m;
  m.col(0) = b1;
  m.col(1) = b2;
  m.col(2) = b3;
  return m;
}

Tensor matrix_to_rot6d(const Mat3& m) {
  return Tensor({6}, {m(0, 0), m(1, 0), m(2, 0), m(0, 1), m(1, 1), m(2, 1)});
}

namespace {
Mat3 axis_angle(const Vec3& aa) {
  const double angle = aa.norm();
  if (angle < 1e-12) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, aa / angle).toRotationMatrix();
}
}  // namespace

std::vector<LinkPose> forward_kinematics(const HandSpec& spec, const HandPose& pose) {
  check(pose.theta.size() == spec.dof(),
        "pose has " + std::to_string(pose.theta.size()) + " joints, spec wants " +
            std::to_string(spec.dof()));
  std::vector<LinkPose> out(spec.links.size());
  out[0].R = rot6d_to_matrix(pose.rot6d) * axis_angle(spec.links[0].pre_rot);
  out[0].t = Vec3(pose.trans[0], pose.trans[1], pose.trans[2]);
  for (size_t i = 1; i < spec.links.size(); ++i) {
    const HandLink& l = spec.links[i];
    const LinkPose& par = out[static_cast<size_t>(l.parent)];
    const double th = pose.theta[spec.joint_of(static_cast<int64_t>(i))];
    out[i].t = par.t + par.R * l.offset;
    out[i].R = par.R * axis_angle(l.pre_rot) * Eigen::AngleAxisd(th, l.axis).toRotationMatrix();
  }
  return out;
}

double capsule_sdf_world(const HandLink& l, const LinkPose& lp, const Vec3& p) {
  const Vec3 q = lp.R.transpose() * (p - lp.t);
  Vec3 v = q;
  v.z() -= std::clamp(q.z(), 0.0, l.length);
  return v.norm() - l.radius;
}

double hand_sdf(const HandSpec& spec, const std::vector<LinkPose>& fk, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < spec.links.size(); ++i)
    best = std::min(best, capsule_sdf_world(spec.links[i], fk[i], p));
  return best;
}

double hand_sdf(const HandSpec& spec, const HandPose& pose, const Vec3& p) {
  return hand_sdf(spec, forward_kinematics(spec, pose), p);
}

double joint_limit_loss(const HandSpec& spec, const Tensor& theta) {
  check(theta.size() == spec.dof(), "joint vector length mismatch");
  double loss = 0.0;
  for (int64_t j = 0; j < theta.size(); ++j) {
    const HandLink& l = spec.links[static_cast<size_t>(j + 1)];
    loss += std::max(theta[j] - l.theta_max, 0.0) + std::max(l.theta_min - theta[j], 0.0);
  }
  return loss;
}

Tensor normalize_joints(const HandSpec& spec, const Tensor& theta) {
  check(theta.size() == spec.dof(), "joint vector length mismatch");
  Tensor out({spec.dof()});
  for (int64_t j = 0; j < theta.size(); ++j) {
    const HandLink& l = spec.links[static_cast<size_t>(j + 1)];
    out[j] = 2.0 * (theta[j] - l.theta_min) / (l.theta_max - l.theta_min) - 1.0;
  }
  return out;
}

Tensor denormalize_joints(const HandSpec& spec, const Tensor& theta_hat) {
  check(theta_hat.size() == spec.dof(), "joint vector length mismatch");
  Tensor out({spec.dof()});
  for (int64_t j = 0; j < theta_hat.size(); ++j) {
    const HandLink& l = spec.links[static_cast<size_t>(j + 1)];
    out[j] = l.theta_min + (theta_hat[j] + 1.0) * 0.5 * (l.theta_max - l.theta_min);
  }
  return out;
}

std::vector<HandSurfacePoint> hand_surface_local(const HandSpec& spec, int64_t n, RngStream& stream) {
  check(n >= 1, "hand_surface_local wants n >= 1");
  std::vector<double> areas;
  double total = 0.0;
  for (const HandLink& l : spec.links) {
    Primitive cap{PrimKind::Capsule, l.radius, std::max(l.length * 0.5, 1e-9), 0.0};
    areas.push_back(cap.surface_area());
    total += areas.back();
  }
  std::vector<HandSurfacePoint> out;
  out.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    double pick = stream.uniform(0.0, total);
    size_t link = 0;
    while (link + 1 < areas.size() && pick > areas[link]) pick -= areas[link], ++link;
    const HandLink& l = spec.links[link];
    // link capsules run z in [0, length]; Primitive capsules are centered
    Primitive cap{PrimKind::Capsule, l.radius, std::max(l.length * 0.5, 1e-9), 0.0};
    SurfaceSample s = surface_sample(cap, 1, stream)[0];
    s.point.z() += l.length * 0.5;
    out.push_back({static_cast<int64_t>(link), s.point, s.normal});
  }
  return out;
}

std::vector<SurfaceSample> hand_surface_world(const HandSpec& spec, const std::vector<LinkPose>& fk,
                                              const std::vector<HandSurfacePoint>& local) {
  (void)spec;
  std::vector<SurfaceSample> out;
  out.reserve(local.size());
  for (const HandSurfacePoint& hp : local) {
    const LinkPose& lp = fk[static_cast<size_t>(hp.link)];
    out.push_back({lp.R * hp.local + lp.t, lp.R * hp.local_normal});
  }
  return out;
}

HandSpec desk_hand() {
  HandSpec s;
  auto add = [&](const std::string& name, int parent, Vec3 axis, Vec3 offset, Vec3 pre,
                 double radius, double length, double lo, double hi) {
    HandLink l;
    l.name = name;
    l.parent = parent;
    l.axis = axis.normalized();
    l.offset = offset;
    l.pre_rot = pre;
    l.radius = radius;
    l.length = length;
    l.theta_min = lo;
    l.theta_max = hi;
    s.links.push_back(l);
  };
  const Vec3 X = Vec3::UnitX(), Y = Vec3::UnitY(), Z = Vec3::UnitZ(), O = Vec3::Zero();

  // Wrist chain: base capsule, then pitch and yaw joints; the yaw link is the
  // palm itself. Palm extends +z, palmar side faces -y.
  add("base", -1, X, O, O, 0.012, 0.015, 0, 0);
  add("wrist_p", 0, X, Vec3(0, 0, 0.015), O, 0.012, 0.012, -0.35, 0.35);
  add("palm", 1, Y, Vec3(0, 0, 0.012), O, 0.014, 0.050, -0.35, 0.35);

  // Four fingers: abduction then three flexion joints, curling toward -y.
  const double fx[4] = {0.036, 0.012, -0.012, -0.036};
  const char* fn[4] = {"index", "middle", "ring", "pinky"};
  for (int f = 0; f < 4; ++f) {
    const std::string b = fn[f];
    const int palm = 2;
    add(b + "_abd", palm, Y, Vec3(fx[f], 0, 0.068), O, 0.009, 0.010, -0.30, 0.30);
    const int abd = static_cast<int>(s.links.size()) - 1;
    add(b + "_mcp", abd, X, Vec3(0, 0, 0.010), O, 0.009, 0.032, -0.26, 1.60);
    const int mcp = static_cast<int>(s.links.size()) - 1;
    add(b + "_pip", mcp, X, Vec3(0, 0, 0.032), O, 0.0085, 0.025, 0.0, 1.75);
    const int pip = static_cast<int>(s.links.size()) - 1;
    add(b + "_dip", pip, X, Vec3(0, 0, 0.025), O, 0.008, 0.020, 0.0, 1.60);
  }

  // Thumb: rooted on the radial palm edge, pre-rotated toward +x so flexion
  // opposes the finger curl.
  add("thumb_cmc", 2, Z, Vec3(0.030, -0.006, 0.020), Vec3(0, 1.25, 0), 0.010, 0.010, -0.60, 0.60);
  const int cmc = static_cast<int>(s.links.size()) - 1;
  add("thumb_flex", cmc, X, Vec3(0, 0, 0.010), O, 0.010, 0.030, -0.20, 1.20);
  const int flex = static_cast<int>(s.links.size()) - 1;
  add("thumb_mcp", flex, X, Vec3(0, 0, 0.030), O, 0.0095, 0.026, 0.0, 1.10);
  const int tm = static_cast<int>(s.links.size()) - 1;
  add("thumb_ip", tm, X, Vec3(0, 0, 0.026), O, 0.009, 0.022, 0.0, 1.30);

  s.validate();
  check(s.dof() == 22, "desk hand must expose 22 DOF");
  return s;
}

void write_hand_spec(const std::string& file, const HandSpec& spec) {
  spec.validate();
  std::ofstream os(file);
  check(os.good(), "cannot open '" + file + "' for writing");
  os << "ugghand v1\n";
  os << "# name parent ax ay az ox oy oz rx ry rz radius length thmin thmax\n";
  os.precision(12);
  for (const HandLink& l : spec.links) {
    os << l.name << " " << l.parent << " " << l.axis.x() << " " << l.axis.y() << " " << l.axis.z()
       << " " << l.offset.x() << " " << l.offset.y() << " " << l.offset.z() << " " << l.pre_rot.x()
       << " " << l.pre_rot.y() << " " << l.pre_rot.z() << " " << l.radius << " " << l.length << " "
       << l.theta_min << " " << l.theta_max << "\n";
  }
  check(os.good(), "write failure on '" + file + "'");
}

HandSpec read_hand_spec(const std::string& file) {
  std::ifstream is(file);
  check(is.good(), "cannot open hand spec '" + file + "'");
  std::string line;
  check(std::getline(is, line) && line == "ugghand v1",
        "'" + file + "' is not a v1 hand description");
  HandSpec spec;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    HandLink l;
    ls >> l.name >> l.parent >> l.axis.x() >> l.axis.y() >> l.axis.z() >> l.offset.x() >>
        l.offset.y() >> l.offset.z() >> l.pre_rot.x() >> l.pre_rot.y() >> l.pre_rot.z() >>
        l.radius >> l.length >> l.theta_min >> l.theta_max;
    check(!ls.fail(), "malformed hand link at " + file + ":" + std::to_string(lineno));
    if (l.parent >= 0) l.axis.normalize();
    spec.links.push_back(l);
  }
  spec.validate();
  return spec;
}

}  // namespace ugg
