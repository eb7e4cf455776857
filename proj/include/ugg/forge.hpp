#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ugg/contact.hpp"
#include "ugg/geometry.hpp"
#include "ugg/hand.hpp"
#include "ugg/rng.hpp"

namespace ugg {

// The six procedural object kinds (1-3 primitives each).
const std::vector<std::string>& object_kinds();
const std::vector<double>& default_scales();  // {0.06, 0.08, 0.10, 0.12, 0.15}

// A rigid desk object: primitive composition plus its corpus identity.
struct ObjectSpec {
  std::string id;
  std::string kind;
  double scale = 0.0;
  std::vector<Primitive> prims;

  void validate() const;
};

// `scale` sets the primary dimension (sphere radius = scale exactly);
// secondary proportions jitter mildly per stream draw.
ObjectSpec gen_object(const std::string& kind, double scale, RngStream& stream);

struct SampledObject {
  PointCloud cloud;  // [N,3]
  Tensor normals;    // [N,3] outward unit normals from the primitives
};

SampledObject sample_object(const ObjectSpec& object, int64_t n, RngStream& stream);

// One dataset row: a labeled grasp on a manifest object.
struct GraspRecord {
  std::string object_id;
  double scale = 0.0;
  HandPose pose;
  Tensor anchors;              // [N_c,3]
  bool label = false;          // validator success at record time
  double q1 = 0.0;
  double penetration_cm = 0.0;
  double disc_score = -1.0;    // optional, -1 when absent
};

// Grasp synthesis: initialize the hand on a random approach ray, close it by
// minimizing the refinement loss against well-spread provisional targets,
// then validate. Returns a record only for validated successes.
std::optional<GraspRecord> synthesize_grasp(const ObjectSpec& object, const PointCloud& cloud,
                                            const HandSpec& hand, RngStream& stream);

// Same procedure, but the attempt's final pose comes back labeled either way,
// so corpus forging can keep validated failures as negatives.
GraspRecord synthesize_attempt(const ObjectSpec& object, const PointCloud& cloud,
                               const HandSpec& hand, RngStream& stream);

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

// "UGGR v1" line-delimited records, tab separated, floats at 9 significant
// digits. Malformed rows fail with their line number; a truncated final row
// also reports the byte offset where parsing stopped.
void write_records(const std::string& file, const std::vector<GraspRecord>& records);
std::vector<GraspRecord> read_records(const std::string& file);

struct ManifestEntry {
  std::string id;
  std::string kind;
  double scale = 0.0;
  std::string ply_path;  // relative to the manifest directory
};

// "UGGM v1" object listing: id, kind, scale, PLY path per line.
void write_manifest(const std::string& file, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::string& file);

// ---------------------------------------------------------------------------
// Corpus forging
// ---------------------------------------------------------------------------

struct ForgeConfig {
  std::vector<std::string> kinds = object_kinds();
  std::vector<double> scales = default_scales();
  int64_t n_points = 256;
  int64_t grasps_per_pair = 60;   // records per (kind, scale) object
  int64_t max_attempts = 240;     // synthesis attempts per object before fill
  double negative_fraction = 0.5; // target share of negative records

  void validate() const;
};

struct ForgeStats {
  int64_t objects = 0;
  int64_t records = 0;
  int64_t positives = 0;
  int64_t negatives = 0;
  int64_t attempts = 0;
};

// Writes dir/manifest.txt, dir/objects/*.ply, dir/records.uggr and
// dir/hand.ugghand. Pure function of (config, seed).
ForgeStats forge_corpus(const std::string& dir, const ForgeConfig& cfg, uint64_t seed);

}  // namespace ugg
