#include "ugg/forge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ugg/common.hpp"
#include "ugg/tta.hpp"
#include "ugg/validator.hpp"

namespace ugg {

namespace {

constexpr double kAnchorEta = 0.005;  // anchor distance threshold (5 mm)
constexpr int64_t kAnchorCount = 5;

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string fmt9(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

double jitter(RngStream& stream, double lo, double hi) {
  return lo + (hi - lo) * stream.uniform();
}

}  // namespace

const std::vector<std::string>& object_kinds() {
  static const std::vector<std::string> kinds = {"sphere",   "box",     "capsule",
                                                "cylinder", "snowman", "dumbbell"};
  return kinds;
}

const std::vector<double>& default_scales() {
  static const std::vector<double> scales = {0.06, 0.08, 0.10, 0.12, 0.15};
  return scales;
}

void ObjectSpec::validate() const {
  check(!id.empty(), "object id is empty");
  const auto& kinds = object_kinds();
  check(std::find(kinds.begin(), kinds.end(), kind) != kinds.end(),
        "unknown object kind '" + kind + "'");
  check(scale > 0.0, "object scale must be positive");
  check(!prims.empty(), "object '" + id + "' has no primitives");
  for (const Primitive& p : prims) p.validate();
}

ObjectSpec gen_object(const std::string& kind, double scale, RngStream& stream) {
  check(scale > 0.0, "gen_object wants a positive scale");
  ObjectSpec obj;
  obj.kind = kind;
  obj.scale = scale;
  obj.id = kind + "-" + fmt_g(scale);

  // The primary dimension equals `scale` exactly; secondary proportions take
  // a mild per-object jitter so one kind does not collapse to a single shape.
  if (kind == "sphere") {
    Primitive p;
    p.kind = PrimKind::Sphere;
    p.a = scale;
    obj.prims.push_back(p);
  } else if (kind == "box") {
    Primitive p;
    p.kind = PrimKind::Box;
    p.a = scale;
    p.b = 0.75 * scale * jitter(stream, 0.9, 1.1);
    p.c = 0.55 * scale * jitter(stream, 0.9, 1.1);
    obj.prims.push_back(p);
  } else if (kind == "capsule") {
    Primitive p;
    p.kind = PrimKind::Capsule;
    p.b = scale;  // segment half length
    p.a = 0.45 * scale * jitter(stream, 0.9, 1.1);
    obj.prims.push_back(p);
  } else if (kind == "cylinder") {
    Primitive p;
    p.kind = PrimKind::Cylinder;
    p.b = scale;  // half height
    p.a = 0.55 * scale * jitter(stream, 0.9, 1.1);
    obj.prims.push_back(p);
  } else if (kind == "snowman") {
    Primitive body;
    body.kind = PrimKind::Sphere;
    body.a = scale;
    Primitive head;
    head.kind = PrimKind::Sphere;
    head.a = 0.62 * scale * jitter(stream, 0.9, 1.1);
    head.pos = Vec3(0, 0, scale + 0.8 * head.a);  // heads overlap the body
    obj.prims.push_back(body);
    obj.prims.push_back(head);
  } else if (kind == "dumbbell") {
    Primitive bar;
    bar.kind = PrimKind::Capsule;
    bar.b = scale;
    bar.a = 0.32 * scale * jitter(stream, 0.9, 1.1);
    Primitive end_a, end_b;
    end_a.kind = end_b.kind = PrimKind::Sphere;
    end_a.a = end_b.a = 0.52 * scale * jitter(stream, 0.9, 1.1);
    end_a.pos = Vec3(0, 0, scale);
    end_b.pos = Vec3(0, 0, -scale);
    obj.prims.push_back(bar);
    obj.prims.push_back(end_a);
    obj.prims.push_back(end_b);
  } else {
    check(false, "unknown object kind '" + kind + "'");
  }
  obj.validate();
  return obj;
}

SampledObject sample_object(const ObjectSpec& object, int64_t n, RngStream& stream) {
  object.validate();
  check(n >= 1, "sample_object wants n >= 1");
  std::vector<SurfaceSample> samples = surface_sample_union(object.prims, n, stream);
  SampledObject out;
  out.cloud.points = Tensor::zeros({n, 3});
  out.normals = Tensor::zeros({n, 3});
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < 3; ++j) {
      out.cloud.points.at(i, j) = samples[i].point[j];
      out.normals.at(i, j) = samples[i].normal[j];
    }
  }
  return out;
}

namespace {

// Mean fingertip position of a moderately curled hand at the identity root
// pose: the point the palm naturally closes around. Computed from the spec so
// customized hand descriptions keep working.
Vec3 grasp_center(const HandSpec& spec, const Tensor& curled) {
  HandPose pose;
  pose.theta = curled;
  pose.rot6d = matrix_to_rot6d(Mat3::Identity());
  pose.trans = Tensor::zeros({3});
  std::vector<LinkPose> fk = forward_kinematics(spec, pose);
  Vec3 sum = Vec3::Zero();
  int64_t tips = 0;
  for (size_t i = 1; i < spec.links.size(); ++i) {
    // A fingertip is a link no other link uses as parent.
    bool leaf = true;
    for (const HandLink& l : spec.links)
      if (l.parent == static_cast<int>(i)) leaf = false;
    if (!leaf) continue;
    const HandLink& l = spec.links[i];
    sum += fk[i].t + fk[i].R * Vec3(0, 0, l.length);
    ++tips;
  }
  check(tips > 0, "hand spec has no fingertip links");
  return sum / static_cast<double>(tips);
}

// Moderate pre-curl applied to every flexion joint, leaving abductions at
// zero: a half-open hand that closes cleanly under the refinement loss.
Tensor pre_curl(const HandSpec& spec, RngStream* stream) {
  Tensor theta = Tensor::zeros({spec.dof()});
  for (size_t i = 1; i < spec.links.size(); ++i) {
    const HandLink& l = spec.links[i];
    const int64_t j = spec.joint_of(static_cast<int64_t>(i));
    double v = 0.0;
    if (l.theta_min >= -0.5 && l.theta_max > 0.9) v = 0.30 * l.theta_max;  // flexion joint
    if (stream != nullptr) v += 0.05 * stream->normal();
    theta[j] = std::clamp(v, l.theta_min, l.theta_max);
  }
  return theta;
}

struct ApproachInit {
  HandPose pose;
  Vec3 dir;  // unit vector from object center toward the hand
};

ApproachInit approach_init(const PointCloud& cloud, const HandSpec& spec, RngStream& stream) {
  const Vec3 com = centroid(cloud.points);
  const double r_b = bounding_radius(cloud.points, com);

  Vec3 d(stream.normal(), stream.normal(), stream.normal());
  if (d.norm() < 1e-9) d = Vec3::UnitZ();
  d.normalize();
  const double phi = stream.uniform(0.0, 2.0 * M_PI);

  // Palmar side (-y in the hand frame) looks back toward the object; fingers
  // point along a random direction perpendicular to the approach.
  Vec3 a = std::abs(d.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  Vec3 e1 = (a - a.dot(d) * d).normalized();
  Vec3 e2 = d.cross(e1);
  Vec3 z = std::cos(phi) * e1 + std::sin(phi) * e2;
  Mat3 R;
  R.col(1) = d;
  R.col(2) = z;
  R.col(0) = d.cross(z);

  ApproachInit init;
  init.dir = d;
  init.pose.theta = pre_curl(spec, &stream);
  init.pose.rot6d = matrix_to_rot6d(R);

  // Drop the natural closing point slightly inside the bounding sphere so the
  // fingers start wrapped around the near surface.
  const double engulf = std::min(0.35 * r_b, 0.035);
  const Vec3 g_world = com + d * (r_b - engulf);
  const Vec3 g_local = grasp_center(spec, init.pose.theta);
  const Vec3 t = g_world - R * g_local;
  init.pose.trans = Tensor::zeros({3});
  for (int64_t j = 0; j < 3; ++j) init.pose.trans[j] = t[j];
  return init;
}

// Well-spread provisional contact targets from the hand-facing half of the
// cloud; the refinement loss pulls the hand surface onto them.
Tensor provisional_targets(const PointCloud& cloud, const Vec3& dir, RngStream& stream) {
  const Vec3 com = centroid(cloud.points);
  const double r_b = bounding_radius(cloud.points, com);
  std::vector<int64_t> facing;
  for (int64_t i = 0; i < cloud.size(); ++i)
    if ((cloud.point(i) - com).dot(dir) > -0.2 * r_b) facing.push_back(i);
  if (static_cast<int64_t>(facing.size()) < kAnchorCount) {
    facing.resize(cloud.size());
    std::iota(facing.begin(), facing.end(), int64_t{0});
  }
  Tensor sub = Tensor::zeros({static_cast<int64_t>(facing.size()), 3});
  for (size_t i = 0; i < facing.size(); ++i)
    for (int64_t j = 0; j < 3; ++j) sub.at(static_cast<int64_t>(i), j) = cloud.points.at(facing[i], j);
  const int64_t start = static_cast<int64_t>(stream.uniform_int(facing.size()));
  std::vector<int64_t> picked = farthest_point_sample(sub, kAnchorCount, start);
  Tensor targets = Tensor::zeros({kAnchorCount, 3});
  for (int64_t i = 0; i < kAnchorCount; ++i)
    for (int64_t j = 0; j < 3; ++j) targets.at(i, j) = sub.at(picked[i], j);
  return targets;
}

// Smaller cloud for the closing optimization; validation always runs on the
// full cloud.
PointCloud objective_cloud(const PointCloud& cloud, int64_t n) {
  if (cloud.size() <= n) return cloud;
  std::vector<int64_t> idx = farthest_point_sample(cloud.points, n, 0);
  PointCloud sub;
  sub.points = Tensor::zeros({n, 3});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < 3; ++j) sub.points.at(i, j) = cloud.points.at(idx[i], j);
  return sub;
}

TtaWeights synthesis_weights() {
  TtaWeights w;
  w.steps = 60;
  w.lr = 2e-3;
  w.surface_samples = 96;
  return w;
}

}  // namespace

GraspRecord synthesize_attempt(const ObjectSpec& object, const PointCloud& cloud,
                               const HandSpec& hand, RngStream& stream) {
  object.validate();
  cloud.validate();

  ApproachInit init = approach_init(cloud, hand, stream);
  Tensor targets = provisional_targets(cloud, init.dir, stream);
  PointCloud sub = objective_cloud(cloud, 128);
  TtaResult closed = optimize(sub, hand, init.pose, targets, synthesis_weights(), stream);

  GraspRecord rec;
  rec.object_id = object.id;
  rec.scale = object.scale;
  rec.pose = closed.pose;

  ValidityReport report = validate_grasp(cloud, hand, rec.pose);
  ContactAnchors anchors = extract_anchors(cloud, hand, rec.pose, kAnchorEta, kAnchorCount, stream);
  // A usable positive needs both the validator and a contact map; success
  // without a single point within eta of the hand is a contact-band sliver
  // that cannot train the contact modality, so it is kept as a negative.
  rec.label = report.success && anchors.found;
  rec.q1 = report.q1;
  rec.penetration_cm = report.max_penetration_cm;
  rec.anchors = anchors.found ? anchors.points : Tensor::zeros({0, 3});
  return rec;
}

std::optional<GraspRecord> synthesize_grasp(const ObjectSpec& object, const PointCloud& cloud,
                                            const HandSpec& hand, RngStream& stream) {
  GraspRecord rec = synthesize_attempt(object, cloud, hand, stream);
  if (!rec.label) return std::nullopt;
  return rec;
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

void write_records(const std::string& file, const std::vector<GraspRecord>& records) {
  std::ofstream os(file);
  check(os.good(), "cannot open '" + file + "' for writing");
  os << "UGGR v1\n";
  for (const GraspRecord& r : records) {
    check(!r.object_id.empty(), "record with empty object id");
    os << r.object_id << '\t' << fmt9(r.scale) << '\t' << (r.label ? 1 : 0) << '\t' << fmt9(r.q1)
       << '\t' << fmt9(r.penetration_cm) << '\t' << fmt9(r.disc_score);
    const int64_t k = r.pose.theta.size();
    os << '\t' << k;
    for (int64_t i = 0; i < k; ++i) os << '\t' << fmt9(r.pose.theta[i]);
    check(r.pose.rot6d.size() == 6, "record rot6d must hold 6 floats");
    check(r.pose.trans.size() == 3, "record trans must hold 3 floats");
    for (int64_t i = 0; i < 6; ++i) os << '\t' << fmt9(r.pose.rot6d[i]);
    for (int64_t i = 0; i < 3; ++i) os << '\t' << fmt9(r.pose.trans[i]);
    const int64_t n_a = r.anchors.size() == 0 ? 0 : r.anchors.dim(0);
    os << '\t' << n_a;
    for (int64_t i = 0; i < n_a; ++i)
      for (int64_t j = 0; j < 3; ++j) os << '\t' << fmt9(r.anchors.at(i, j));
    os << '\n';
  }
  check(os.good(), "write failure on '" + file + "'");
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

double field_double(const std::vector<std::string>& f, size_t i, const std::string& file,
                    int lineno) {
  const char* s = f[i].c_str();
  char* end = nullptr;
  double v = std::strtod(s, &end);
  check(end != s && *end == '\0',
        "malformed record at " + file + ":" + std::to_string(lineno) + ": bad float '" + f[i] + "'");
  return v;
}

int64_t field_int(const std::vector<std::string>& f, size_t i, const std::string& file,
                  int lineno) {
  const char* s = f[i].c_str();
  char* end = nullptr;
  long long v = std::strtoll(s, &end, 10);
  check(end != s && *end == '\0' && v >= 0,
        "malformed record at " + file + ":" + std::to_string(lineno) + ": bad count '" + f[i] + "'");
  return static_cast<int64_t>(v);
}

}  // namespace

std::vector<GraspRecord> read_records(const std::string& file) {
  std::ifstream is(file, std::ios::binary);
  check(is.good(), "cannot open records '" + file + "'");
  std::stringstream buf;
  buf << is.rdbuf();
  const std::string text = buf.str();

  size_t pos = 0;
  int lineno = 0;
  std::vector<GraspRecord> records;
  bool saw_header = false;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    const bool truncated = nl == std::string::npos;
    const std::string line = text.substr(pos, truncated ? std::string::npos : nl - pos);
    ++lineno;
    // A final row without its newline is a truncation, not a format error:
    // report where the usable bytes ran out.
    const std::string trunc_msg = "truncated final record at " + file + ":" +
                                  std::to_string(lineno) + ": parsing stopped at byte " +
                                  std::to_string(text.size());
    if (lineno == 1) {
      check(!truncated, trunc_msg);
      check(line == "UGGR v1", "'" + file + "' is not a v1 records file");
      saw_header = true;
      pos = nl + 1;
      continue;
    }
    if (line.empty() || line[0] == '#') {
      check(!truncated, trunc_msg);
      pos = nl + 1;
      continue;
    }

    std::vector<std::string> f = split_tabs(line);
    auto malformed = [&](const std::string& why) {
      check(!truncated, trunc_msg);
      check(false, "malformed record at " + file + ":" + std::to_string(lineno) + ": " + why);
    };
    if (f.size() < 7) malformed("expected at least 7 fields, got " + std::to_string(f.size()));

    GraspRecord r;
    r.object_id = f[0];
    if (r.object_id.empty()) malformed("empty object id");
    r.scale = field_double(f, 1, file, lineno);
    if (f[2] != "0" && f[2] != "1") malformed("label must be 0 or 1, got '" + f[2] + "'");
    r.label = f[2] == "1";
    r.q1 = field_double(f, 3, file, lineno);
    r.penetration_cm = field_double(f, 4, file, lineno);
    r.disc_score = field_double(f, 5, file, lineno);
    const int64_t k = field_int(f, 6, file, lineno);
    if (static_cast<int64_t>(f.size()) < 17 + k)
      malformed("expected " + std::to_string(17 + k) + "+ fields for " + std::to_string(k) +
                " joints, got " + std::to_string(f.size()));
    r.pose.theta = Tensor::zeros({k});
    size_t at = 7;
    for (int64_t i = 0; i < k; ++i) r.pose.theta[i] = field_double(f, at++, file, lineno);
    r.pose.rot6d = Tensor::zeros({6});
    for (int64_t i = 0; i < 6; ++i) r.pose.rot6d[i] = field_double(f, at++, file, lineno);
    r.pose.trans = Tensor::zeros({3});
    for (int64_t i = 0; i < 3; ++i) r.pose.trans[i] = field_double(f, at++, file, lineno);
    const int64_t n_a = field_int(f, at++, file, lineno);
    if (f.size() != at + static_cast<size_t>(3 * n_a))
      malformed("expected " + std::to_string(at + static_cast<size_t>(3 * n_a)) +
                " fields for " + std::to_string(n_a) + " anchors, got " + std::to_string(f.size()));
    r.anchors = Tensor::zeros({n_a, 3});
    for (int64_t i = 0; i < n_a; ++i)
      for (int64_t j = 0; j < 3; ++j) r.anchors.at(i, j) = field_double(f, at++, file, lineno);
    records.push_back(std::move(r));
    if (truncated) break;  // unreachable: malformed() fires first on short rows
    pos = nl + 1;
  }
  check(saw_header, "'" + file + "' is not a v1 records file");
  return records;
}

void write_manifest(const std::string& file, const std::vector<ManifestEntry>& entries) {
  std::ofstream os(file);
  check(os.good(), "cannot open '" + file + "' for writing");
  os << "UGGM v1\n";
  for (const ManifestEntry& e : entries) {
    check(!e.id.empty() && !e.kind.empty() && !e.ply_path.empty(), "manifest entry incomplete");
    os << e.id << '\t' << e.kind << '\t' << fmt9(e.scale) << '\t' << e.ply_path << '\n';
  }
  check(os.good(), "write failure on '" + file + "'");
}

std::vector<ManifestEntry> read_manifest(const std::string& file) {
  std::ifstream is(file);
  check(is.good(), "cannot open manifest '" + file + "'");
  std::string line;
  check(std::getline(is, line) && line == "UGGM v1", "'" + file + "' is not a v1 manifest");
  std::vector<ManifestEntry> entries;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f = split_tabs(line);
    check(f.size() == 4, "malformed manifest entry at " + file + ":" + std::to_string(lineno) +
                             ": expected 4 fields, got " + std::to_string(f.size()));
    ManifestEntry e;
    e.id = f[0];
    e.kind = f[1];
    e.scale = field_double(f, 2, file, lineno);
    e.ply_path = f[3];
    check(!e.id.empty() && !e.kind.empty() && !e.ply_path.empty(),
          "malformed manifest entry at " + file + ":" + std::to_string(lineno));
    entries.push_back(std::move(e));
  }
  return entries;
}

// ---------------------------------------------------------------------------
// Corpus forging
// ---------------------------------------------------------------------------

void ForgeConfig::validate() const {
  check(!kinds.empty(), "forge config needs at least one object kind");
  const auto& known = object_kinds();
  for (const std::string& k : kinds)
    check(std::find(known.begin(), known.end(), k) != known.end(),
          "unknown object kind '" + k + "'");
  for (double s : scales) check(s > 0.0, "forge scales must be positive");
  check(!scales.empty(), "forge config needs at least one scale");
  check(n_points >= 16, "forge n_points must be at least 16");
  check(grasps_per_pair >= 2, "forge grasps_per_pair must be at least 2");
  check(max_attempts >= grasps_per_pair, "forge max_attempts must cover grasps_per_pair");
  check(negative_fraction >= 0.0 && negative_fraction <= 1.0,
        "forge negative_fraction must lie in [0,1]");
}

namespace {

// Cheap guaranteed negative: the hand posed at a standoff outside the object,
// so the validator sees no contacts. Anchors come out empty.
GraspRecord standoff_negative(const ObjectSpec& object, const PointCloud& cloud,
                              const HandSpec& hand, RngStream& stream) {
  const Vec3 com = centroid(cloud.points);
  const double r_b = bounding_radius(cloud.points, com);
  ApproachInit init = approach_init(cloud, hand, stream);
  Mat3 R = rot6d_to_matrix(init.pose.rot6d);
  const Vec3 g_world = com + init.dir * (r_b + 0.04 + 0.08 * stream.uniform());
  const Vec3 g_local = grasp_center(hand, init.pose.theta);
  const Vec3 t = g_world - R * g_local;
  for (int64_t j = 0; j < 3; ++j) init.pose.trans[j] = t[j];

  GraspRecord rec;
  rec.object_id = object.id;
  rec.scale = object.scale;
  rec.pose = init.pose;
  ValidityReport report = validate_grasp(cloud, hand, rec.pose);
  rec.label = false;
  rec.q1 = report.q1;
  rec.penetration_cm = report.max_penetration_cm;
  rec.anchors = Tensor::zeros({0, 3});
  return rec;
}

}  // namespace

ForgeStats forge_corpus(const std::string& dir, const ForgeConfig& cfg, uint64_t seed) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "objects");

  RngStream root(seed);
  HandSpec hand = desk_hand();
  write_hand_spec((fs::path(dir) / "hand.ugghand").string(), hand);

  std::vector<ManifestEntry> manifest;
  std::vector<GraspRecord> records;
  ForgeStats stats;

  for (const std::string& kind : cfg.kinds) {
    for (double scale : cfg.scales) {
      RngStream obj_stream = root.fork(kind + "-" + fmt_g(scale));
      ObjectSpec obj = gen_object(kind, scale, obj_stream);
      SampledObject sampled = sample_object(obj, cfg.n_points, obj_stream);
      const std::string rel = "objects/" + obj.id + ".ply";
      write_ply((fs::path(dir) / rel).string(), sampled.cloud);
      manifest.push_back({obj.id, kind, scale, rel});
      ++stats.objects;

      const int64_t want_neg =
          std::llround(cfg.negative_fraction * static_cast<double>(cfg.grasps_per_pair));
      const int64_t want_pos = cfg.grasps_per_pair - want_neg;

      // Some negatives are easy standoffs so the labels span the full
      // difficulty range; the rest are failed closing attempts.
      const int64_t easy_neg = want_neg * 2 / 5;
      std::vector<GraspRecord> pos, neg;
      for (int64_t i = 0; i < easy_neg; ++i) {
        RngStream s = obj_stream.fork("standoff-" + std::to_string(i));
        neg.push_back(standoff_negative(obj, sampled.cloud, hand, s));
      }

      int64_t attempts = 0;
      while (attempts < cfg.max_attempts &&
             (static_cast<int64_t>(pos.size()) < want_pos ||
              static_cast<int64_t>(neg.size()) < want_neg)) {
        RngStream s = obj_stream.fork("attempt-" + std::to_string(attempts));
        GraspRecord rec = synthesize_attempt(obj, sampled.cloud, hand, s);
        ++attempts;
        (rec.label ? pos : neg).push_back(std::move(rec));
      }
      stats.attempts += attempts;

      // Fill the per-object quota, padding from whichever side has surplus.
      std::vector<GraspRecord> keep;
      const int64_t take_pos = std::min<int64_t>(want_pos, static_cast<int64_t>(pos.size()));
      for (int64_t i = 0; i < take_pos; ++i) keep.push_back(std::move(pos[i]));
      for (size_t i = 0; i < neg.size() && static_cast<int64_t>(keep.size()) < cfg.grasps_per_pair;
           ++i)
        keep.push_back(std::move(neg[i]));
      for (int64_t i = take_pos;
           i < static_cast<int64_t>(pos.size()) &&
           static_cast<int64_t>(keep.size()) < cfg.grasps_per_pair;
           ++i)
        keep.push_back(std::move(pos[i]));

      for (GraspRecord& r : keep) {
        stats.records += 1;
        (r.label ? stats.positives : stats.negatives) += 1;
        records.push_back(std::move(r));
      }
    }
  }

  write_manifest((fs::path(dir) / "manifest.txt").string(), manifest);
  write_records((fs::path(dir) / "records.uggr").string(), records);
  return stats;
}

}  // namespace ugg
