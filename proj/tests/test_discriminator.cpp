#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "ugg/discriminator.hpp"
#include "ugg/forge.hpp"

using namespace ugg;

namespace {

DiscriminatorConfig tiny_config() {
  DiscriminatorConfig cfg;
  cfg.d = 16;
  cfg.heads = 2;
  cfg.hidden = 32;
  cfg.n_points = 64;
  cfg.n_local = 8;
  return cfg;
}

PointCloud toy_cloud(int64_t n) {
  RngStream rng(0xC1A0D);
  ObjectSpec obj = gen_object("sphere", 0.07, rng);
  return sample_object(obj, n, rng).cloud;
}

HandPose random_pose(const HandSpec& spec, RngStream& rng, double tz) {
  HandPose p;
  p.theta = Tensor::zeros({spec.dof()});
  for (int64_t j = 0; j < spec.dof(); ++j) {
    const HandLink& link = spec.links[static_cast<size_t>(j + 1)];
    p.theta[j] = rng.uniform(link.theta_min, link.theta_max);
  }
  p.rot6d = rng.uniform_tensor({6}, -1.0, 1.0);
  p.trans = rng.uniform_tensor({3}, -0.05, 0.05);
  p.trans[2] += tz;
  return p;
}

// Positives sit above the object, negatives below: linearly separable in the
// translation token alone.
GraspRecord separable_record(const HandSpec& spec, RngStream& rng, bool label) {
  GraspRecord r;
  r.object_id = "sphere-0.07";
  r.scale = 0.07;
  r.pose = random_pose(spec, rng, label ? 0.12 : -0.12);
  r.label = label;
  r.anchors = Tensor::zeros({0, 3});
  return r;
}

}  // namespace

TEST_CASE("config validation rejects non-dividing shapes") {
  DiscriminatorConfig bad = tiny_config();
  bad.heads = 3;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("heads"), Error);
  bad = tiny_config();
  bad.n_local = 7;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("n_local"), Error);
  bad = tiny_config();
  bad.k = 0;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("joint"), Error);
  CHECK(tiny_config().group_size() == 8);
  CHECK_NOTHROW(DiscriminatorConfig{}.validate());
}

TEST_CASE("zeroed head is indifferent, its bias steers the score") {
  const HandSpec spec = desk_hand();
  const PointCloud cloud = toy_cloud(64);
  Discriminator disc(tiny_config());
  ParamStore store;
  RngStream rng(7);
  disc.init(store, rng);
  HandPose pose = random_pose(spec, rng, 0.0);

  Tape tape;
  GraphCtx ctx{tape, store, {}};
  Var logits = disc.logits_graph(ctx, cloud, spec, pose);
  CHECK(logits.val().shape() == Shape{1, 2});

  // Zero final layer: logits become exactly (0, 0), score exactly 1/2.
  store.get("disc.head.l1.w").fill(0.0);
  store.get("disc.head.l1.b").fill(0.0);
  CHECK(disc.score(store, cloud, spec, pose) == 0.5);

  // A pure bias of (-10, 10) saturates toward success without reaching 1.
  Tensor& b = store.get("disc.head.l1.b");
  b[0] = -10.0;
  b[1] = 10.0;
  double s = disc.score(store, cloud, spec, pose);
  CHECK(s > 1.0 - 1e-8);
  CHECK(s < 1.0);
  b[0] = 10.0;
  b[1] = -10.0;
  s = disc.score(store, cloud, spec, pose);
  CHECK(s < 1e-8);
  CHECK(s > 0.0);
}

TEST_CASE("scores stay strictly inside (0,1) under a random head") {
  const HandSpec spec = desk_hand();
  const PointCloud cloud = toy_cloud(64);
  Discriminator disc(tiny_config());
  ParamStore store;
  RngStream rng(11);
  disc.init(store, rng);
  for (int i = 0; i < 5; ++i) {
    HandPose pose = random_pose(spec, rng, rng.uniform(-0.2, 0.2));
    const double s = disc.score(store, cloud, spec, pose);
    CHECK(s > 0.0);
    CHECK(s < 1.0);
  }
}

TEST_CASE("rank_and_select is a stable descending selection") {
  const std::vector<double> scores = {0.3, 0.9, 0.9, 0.1};
  CHECK(rank_and_select(scores, 4) == std::vector<int64_t>{1, 2, 0, 3});
  CHECK(rank_and_select(scores, 1) == std::vector<int64_t>{1});
  CHECK(rank_and_select(scores, 0).empty());
  CHECK_THROWS_WITH_AS(rank_and_select(scores, 5), doctest::Contains("rank_and_select"), Error);

  // Exhaustive-sort oracle on a random batch, plus invariance under any
  // strictly increasing transform of the scores.
  RngStream rng(23);
  std::vector<double> batch(50);
  for (double& x : batch) x = rng.uniform();
  batch[7] = batch[31];  // force one tie
  std::vector<int64_t> oracle(batch.size());
  std::iota(oracle.begin(), oracle.end(), int64_t{0});
  std::sort(oracle.begin(), oracle.end(), [&](int64_t a, int64_t b) {
    return batch[a] != batch[b] ? batch[a] > batch[b] : a < b;
  });
  CHECK(rank_and_select(batch, 50) == oracle);

  std::vector<double> affine = batch, expo = batch;
  for (double& x : affine) x = 2.0 * x + 1.0;
  for (double& x : expo) x = std::exp(x);
  CHECK(rank_and_select(affine, 12) == rank_and_select(batch, 12));
  CHECK(rank_and_select(expo, 12) == rank_and_select(batch, 12));
}

TEST_CASE("auc matches hand-counted pair statistics") {
  CHECK(auc_score({0.9, 0.8, 0.7, 0.6}, {true, true, false, false}) == 1.0);
  CHECK(auc_score({0.9, 0.8, 0.7, 0.6}, {false, false, true, true}) == 0.0);
  // Pairs: .9>.1 win, .9>.8 win, .2>.1 win, .2<.8 loss -> 3/4.
  CHECK(auc_score({0.9, 0.1, 0.8, 0.2}, {true, false, false, true}) == doctest::Approx(0.75));
  // Tied pair counts half.
  CHECK(auc_score({0.7, 0.5, 0.5, 0.2}, {true, true, false, false}) == doctest::Approx(0.875));
  CHECK(auc_score({0.5, 0.5}, {true, false}) == doctest::Approx(0.5));
  CHECK_THROWS_WITH_AS(auc_score({0.5, 0.6}, {true, true}), doctest::Contains("both classes"),
                       Error);
  CHECK_THROWS_WITH_AS(auc_score({0.5}, {true, false}), doctest::Contains("one label"), Error);
}

TEST_CASE("training separates a separable toy set") {
  const HandSpec spec = desk_hand();
  std::map<std::string, PointCloud> objects;
  objects.emplace("sphere-0.07", toy_cloud(64));

  // 60 positives, 80 negatives: exercises majority downsampling too.
  RngStream data_rng(0x5E9A7A);
  std::vector<GraspRecord> records;
  for (int i = 0; i < 60; ++i) records.push_back(separable_record(spec, data_rng, true));
  for (int i = 0; i < 80; ++i) records.push_back(separable_record(spec, data_rng, false));

  auto run = [&](uint64_t seed) {
    Discriminator disc(tiny_config());
    ParamStore store;
    RngStream init_rng(seed);
    disc.init(store, init_rng);
    RngStream train_rng(seed + 1);
    return train_discriminator(disc, store, records, objects, spec, 6, 3e-3, train_rng);
  };
  DiscTrainMetrics m = run(42);
  CHECK(m.train_count == 96);    // 2 * (60 - 12)
  CHECK(m.holdout_count == 24);  // 2 * 12
  CHECK(m.epoch_loss.size() == 6);
  CHECK(m.epoch_loss.back() < m.epoch_loss.front());
  CHECK(m.holdout_auc >= 0.95);

  // Same seeds, same data: training is a pure function of its streams.
  DiscTrainMetrics m2 = run(42);
  CHECK(m2.holdout_auc == m.holdout_auc);
  CHECK(m2.epoch_loss == m.epoch_loss);
}

TEST_CASE("degenerate training inputs are rejected") {
  const HandSpec spec = desk_hand();
  std::map<std::string, PointCloud> objects;
  objects.emplace("sphere-0.07", toy_cloud(64));
  Discriminator disc(tiny_config());
  ParamStore store;
  RngStream rng(3);
  disc.init(store, rng);

  RngStream data_rng(9);
  std::vector<GraspRecord> uni;
  for (int i = 0; i < 10; ++i) uni.push_back(separable_record(spec, data_rng, true));
  CHECK_THROWS_WITH_AS(train_discriminator(disc, store, uni, objects, spec, 1, 1e-3, rng),
                       doctest::Contains("both labels"), Error);

  std::vector<GraspRecord> dangling = {separable_record(spec, data_rng, true),
                                       separable_record(spec, data_rng, false)};
  dangling[0].object_id = "missing-object";
  CHECK_THROWS_WITH_AS(train_discriminator(disc, store, dangling, objects, spec, 1, 1e-3, rng),
                       doctest::Contains("unknown object"), Error);
}

TEST_CASE("label-shuffled training hovers near chance") {
  const HandSpec spec = desk_hand();
  std::map<std::string, PointCloud> objects;
  objects.emplace("sphere-0.07", toy_cloud(64));

  // Labels drawn independently of the pose: nothing to learn.
  RngStream data_rng(0x0FF5E7);
  std::vector<GraspRecord> records;
  for (int i = 0; i < 160; ++i) {
    const bool label = i % 2 == 0;
    GraspRecord r = separable_record(spec, data_rng, data_rng.uniform() < 0.5);
    r.label = label;
    records.push_back(r);
  }

  Discriminator disc(tiny_config());
  ParamStore store;
  RngStream init_rng(5);
  disc.init(store, init_rng);
  RngStream train_rng(6);
  DiscTrainMetrics m = train_discriminator(disc, store, records, objects, spec, 4, 3e-3, train_rng);
  CHECK(m.holdout_auc > 0.30);
  CHECK(m.holdout_auc < 0.70);
  // Cross-entropy cannot dip much below ln 2 on coin-flip labels.
  CHECK(m.epoch_loss.back() > 0.45);
}
