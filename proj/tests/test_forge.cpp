#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ugg/forge.hpp"
#include "ugg/validator.hpp"

using namespace ugg;

namespace {

std::string slurp(const std::string& file) {
  std::ifstream is(file, std::ios::binary);
  REQUIRE(is.good());
  std::stringstream buf;
  buf << is.rdbuf();
  return buf.str();
}

GraspRecord demo_record(const std::string& id, bool label, int64_t n_anchors) {
  RngStream rng(0xDE110 + n_anchors);
  GraspRecord r;
  r.object_id = id;
  r.scale = 0.08;
  r.pose.theta = rng.uniform_tensor({22}, -0.3, 1.2);
  r.pose.rot6d = rng.uniform_tensor({6}, -1.0, 1.0);
  r.pose.trans = rng.uniform_tensor({3}, -0.2, 0.2);
  r.label = label;
  r.q1 = label ? 0.123456789 : 0.0;
  r.penetration_cm = 0.0421;
  r.disc_score = label ? 0.875 : -1.0;
  r.anchors = rng.uniform_tensor({n_anchors, 3}, -0.1, 0.1);
  return r;
}

}  // namespace

TEST_CASE("object kinds cover the catalog and gen_object respects the scale contract") {
  REQUIRE(object_kinds().size() == 6);
  REQUIRE(default_scales().size() == 5);
  CHECK(default_scales().front() == doctest::Approx(0.06));
  CHECK(default_scales().back() == doctest::Approx(0.15));

  RngStream rng(21);
  for (const std::string& kind : object_kinds()) {
    RngStream s = rng.fork(kind);
    ObjectSpec obj = gen_object(kind, 0.1, s);
    CHECK(obj.kind == kind);
    CHECK(obj.id == kind + "-0.1");
    CHECK(obj.scale == doctest::Approx(0.1));
    CHECK(!obj.prims.empty());
    obj.validate();
  }

  // The sphere's primary dimension is the radius, exactly.
  RngStream s1 = rng.fork("exact");
  ObjectSpec sph = gen_object("sphere", 0.0725, s1);
  REQUIRE(sph.prims.size() == 1);
  CHECK(sph.prims[0].a == 0.0725);

  // Identical streams give identical jittered proportions.
  RngStream a(77), b(77);
  ObjectSpec box_a = gen_object("box", 0.1, a);
  ObjectSpec box_b = gen_object("box", 0.1, b);
  CHECK(box_a.prims[0].b == box_b.prims[0].b);
  CHECK(box_a.prims[0].c == box_b.prims[0].c);
  CHECK(box_a.prims[0].b != box_a.prims[0].c);

  RngStream s2 = rng.fork("bad");
  CHECK_THROWS_AS(gen_object("torus", 0.1, s2), Error);
  CHECK_THROWS_AS(gen_object("sphere", 0.0, s2), Error);
}

TEST_CASE("sample_object lands on the union surface with outward unit normals") {
  RngStream rng(22);
  ObjectSpec obj = gen_object("snowman", 0.08, rng);
  SampledObject so = sample_object(obj, 200, rng);
  REQUIRE(so.cloud.size() == 200);
  REQUIRE(so.normals.shape() == so.cloud.points.shape());
  for (int64_t i = 0; i < 200; ++i) {
    const Vec3 p = so.cloud.point(i);
    CHECK(std::abs(sdf_union(obj.prims, p)) < 1e-7);
    const Vec3 n(so.normals.at(i, 0), so.normals.at(i, 1), so.normals.at(i, 2));
    CHECK(n.norm() == doctest::Approx(1.0).epsilon(1e-9));
    // Walking out of the surface along the normal increases the distance.
    CHECK(sdf_union(obj.prims, p + 1e-4 * n) > 0.0);
  }
}

TEST_CASE("synthesize_attempt returns a labeled, replayable record") {
  HandSpec hand = desk_hand();
  RngStream rng(23);
  ObjectSpec obj = gen_object("sphere", 0.07, rng);
  SampledObject so = sample_object(obj, 256, rng);

  int successes = 0;
  for (int i = 0; i < 10; ++i) {
    RngStream s = rng.fork(i);
    GraspRecord rec = synthesize_attempt(obj, so.cloud, hand, s);
    CHECK(rec.object_id == "sphere-0.07");
    CHECK(rec.scale == doctest::Approx(0.07));
    CHECK(rec.pose.theta.size() == hand.dof());
    CHECK(rec.pose.rot6d.size() == 6);
    CHECK(rec.pose.trans.size() == 3);
    CHECK(rec.q1 >= 0.0);
    CHECK(rec.penetration_cm >= 0.0);
    CHECK(rec.disc_score == -1.0);

    // The stored label replays from the stored pose on the same cloud.
    ValidityReport replay = validate_grasp(so.cloud, hand, rec.pose);
    if (rec.label) {
      REQUIRE(rec.anchors.dim(0) == 5);
      CHECK(replay.success);
      CHECK(rec.penetration_cm < 0.5);
      CHECK(rec.q1 == doctest::Approx(replay.q1));
      // Every anchor sits within eta of the hand surface.
      for (int64_t a = 0; a < rec.anchors.dim(0); ++a) {
        const Vec3 p(rec.anchors.at(a, 0), rec.anchors.at(a, 1), rec.anchors.at(a, 2));
        CHECK(std::max(hand_sdf(hand, rec.pose, p), 0.0) < 0.005);
      }
      ++successes;
    }
  }
  CHECK(successes >= 1);  // mid-size sphere closes reliably

  // Identical streams synthesize identical records.
  RngStream sa = rng.fork("det"), sb = rng.fork("det");
  GraspRecord ra = synthesize_attempt(obj, so.cloud, hand, sa);
  GraspRecord rb = synthesize_attempt(obj, so.cloud, hand, sb);
  CHECK(ra.label == rb.label);
  for (int64_t j = 0; j < 22; ++j) CHECK(ra.pose.theta[j] == rb.pose.theta[j]);
  for (int64_t j = 0; j < 3; ++j) CHECK(ra.pose.trans[j] == rb.pose.trans[j]);
  CHECK(ra.q1 == rb.q1);

  // synthesize_grasp is the success filter over the same procedure.
  RngStream sc = rng.fork("det");
  std::optional<GraspRecord> filtered = synthesize_grasp(obj, so.cloud, hand, sc);
  CHECK(filtered.has_value() == ra.label);
  if (filtered) CHECK(filtered->pose.trans[0] == ra.pose.trans[0]);
}

TEST_CASE("records survive a write/read round trip at nine significant digits") {
  std::vector<GraspRecord> out;
  out.push_back(demo_record("sphere-0.08", true, 5));
  out.push_back(demo_record("box-0.1", false, 0));
  out.push_back(demo_record("dumbbell-0.12", false, 5));

  const std::string file = "records_roundtrip_test.uggr";
  write_records(file, out);
  std::vector<GraspRecord> back = read_records(file);
  REQUIRE(back.size() == out.size());
  for (size_t i = 0; i < out.size(); ++i) {
    CHECK(back[i].object_id == out[i].object_id);
    CHECK(back[i].label == out[i].label);
    CHECK(back[i].scale == doctest::Approx(out[i].scale).epsilon(1e-8));
    CHECK(back[i].q1 == doctest::Approx(out[i].q1).epsilon(1e-8));
    CHECK(back[i].penetration_cm == doctest::Approx(out[i].penetration_cm).epsilon(1e-8));
    CHECK(back[i].disc_score == doctest::Approx(out[i].disc_score).epsilon(1e-8));
    REQUIRE(back[i].pose.theta.size() == 22);
    for (int64_t j = 0; j < 22; ++j)
      CHECK(back[i].pose.theta[j] == doctest::Approx(out[i].pose.theta[j]).epsilon(1e-8));
    for (int64_t j = 0; j < 6; ++j)
      CHECK(back[i].pose.rot6d[j] == doctest::Approx(out[i].pose.rot6d[j]).epsilon(1e-8));
    for (int64_t j = 0; j < 3; ++j)
      CHECK(back[i].pose.trans[j] == doctest::Approx(out[i].pose.trans[j]).epsilon(1e-8));
    REQUIRE(back[i].anchors.shape() == out[i].anchors.shape());
    for (int64_t j = 0; j < out[i].anchors.size(); ++j)
      CHECK(back[i].anchors[j] == doctest::Approx(out[i].anchors[j]).epsilon(1e-8));
  }
  std::remove(file.c_str());
}

TEST_CASE("records reader names the offending line and truncation byte") {
  const std::string file = "records_errors_test.uggr";

  {
    std::ofstream os(file);
    os << "UGGR v2\n";
  }
  CHECK_THROWS_WITH_AS(read_records(file), doctest::Contains("not a v1 records"), Error);

  // A bad float is reported with its line number.
  {
    std::ofstream os(file);
    os << "UGGR v1\n";
    write_records("records_ok_test.uggr", {demo_record("sphere-0.08", true, 5)});
    std::string good = slurp("records_ok_test.uggr");
    os << good.substr(good.find('\n') + 1);  // line 2: a good record
    os << "box-0.1\toops\t1\t0\t0\t-1\t0\t";  // line 3: bad scale
    for (int i = 0; i < 9; ++i) os << "0\t";
    os << "0\n";
  }
  CHECK_THROWS_WITH_AS(read_records(file), doctest::Contains(":3"), Error);

  // Chopping the final newline and a few bytes is a truncation with an offset.
  {
    write_records(file, {demo_record("sphere-0.08", true, 5), demo_record("box-0.1", false, 0)});
    std::string full = slurp(file);
    std::ofstream os(file, std::ios::binary);
    os << full.substr(0, full.size() - 9);
  }
  CHECK_THROWS_WITH_AS(read_records(file), doctest::Contains("truncated final record"), Error);
  CHECK_THROWS_WITH_AS(read_records(file), doctest::Contains("byte"), Error);

  // Wrong field count for the declared anchor count.
  {
    std::ofstream os(file);
    os << "UGGR v1\n";
    os << "sphere-0.08\t0.08\t1\t0.1\t0\t-1\t1\t0.5\t1\t0\t0\t0\t1\t0\t0\t0\t0\t2\t0\t0\t0\n";
  }
  CHECK_THROWS_WITH_AS(read_records(file), doctest::Contains("anchors"), Error);

  std::remove(file.c_str());
  std::remove("records_ok_test.uggr");
}

TEST_CASE("manifest round trip and malformed entries") {
  const std::string file = "manifest_test.txt";
  std::vector<ManifestEntry> out = {{"sphere-0.06", "sphere", 0.06, "objects/sphere-0.06.ply"},
                                    {"box-0.1", "box", 0.1, "objects/box-0.1.ply"}};
  write_manifest(file, out);
  std::vector<ManifestEntry> back = read_manifest(file);
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == "sphere-0.06");
  CHECK(back[1].kind == "box");
  CHECK(back[1].scale == doctest::Approx(0.1));
  CHECK(back[0].ply_path == "objects/sphere-0.06.ply");

  {
    std::ofstream os(file);
    os << "UGGM v1\nsphere-0.06\tsphere\t0.06\n";
  }
  CHECK_THROWS_WITH_AS(read_manifest(file), doctest::Contains(":2"), Error);
  {
    std::ofstream os(file);
    os << "PLY?\n";
  }
  CHECK_THROWS_WITH_AS(read_manifest(file), doctest::Contains("not a v1 manifest"), Error);
  std::remove(file.c_str());
}

TEST_CASE("forge_corpus writes a deterministic, self-consistent miniature corpus") {
  ForgeConfig cfg;
  cfg.kinds = {"sphere", "capsule"};
  cfg.scales = {0.07};
  cfg.n_points = 128;
  cfg.grasps_per_pair = 6;
  cfg.max_attempts = 24;
  cfg.negative_fraction = 0.5;
  cfg.validate();

  ForgeConfig bad = cfg;
  bad.max_attempts = 2;
  CHECK_THROWS_AS(bad.validate(), Error);

  const std::string dir = "forge_test_corpus";
  const std::string dir2 = "forge_test_corpus_rerun";
  ForgeStats stats = forge_corpus(dir, cfg, 99);

  CHECK(stats.objects == 2);
  CHECK(stats.records == 12);
  CHECK(stats.positives + stats.negatives == stats.records);
  CHECK(stats.positives >= 1);
  CHECK(stats.negatives >= 1);
  CHECK(stats.attempts >= stats.records - stats.objects * 2);  // easy standoffs excluded

  // The manifest resolves to readable clouds of the configured size.
  std::vector<ManifestEntry> manifest = read_manifest(dir + "/manifest.txt");
  REQUIRE(manifest.size() == 2);
  for (const ManifestEntry& e : manifest) {
    PointCloud cloud = read_ply(dir + "/" + e.ply_path);
    CHECK(cloud.size() == cfg.n_points);
  }

  HandSpec hand = read_hand_spec(dir + "/hand.ugghand");
  CHECK(hand.dof() == 22);

  std::vector<GraspRecord> records = read_records(dir + "/records.uggr");
  REQUIRE(static_cast<int64_t>(records.size()) == stats.records);
  int64_t pos = 0;
  for (const GraspRecord& r : records) {
    CHECK((r.object_id == "sphere-0.07" || r.object_id == "capsule-0.07"));
    if (r.label) {
      ++pos;
      REQUIRE(r.anchors.dim(0) == 5);
      // Anchors replay against the stored pose and the shipped hand file.
      for (int64_t a = 0; a < r.anchors.dim(0); ++a) {
        const Vec3 p(r.anchors.at(a, 0), r.anchors.at(a, 1), r.anchors.at(a, 2));
        CHECK(std::max(hand_sdf(hand, r.pose, p), 0.0) < 0.005 + 1e-6);
      }
    }
  }
  CHECK(pos == stats.positives);

  // Same config and seed forge byte-identical artifacts.
  ForgeStats rerun = forge_corpus(dir2, cfg, 99);
  CHECK(rerun.records == stats.records);
  CHECK(slurp(dir + "/records.uggr") == slurp(dir2 + "/records.uggr"));
  CHECK(slurp(dir + "/manifest.txt") == slurp(dir2 + "/manifest.txt"));
  CHECK(slurp(dir + "/objects/sphere-0.07.ply") == slurp(dir2 + "/objects/sphere-0.07.ply"));

  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir2);
}
