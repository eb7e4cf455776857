#include "ugg/discriminator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ugg/common.hpp"

namespace ugg {

void DiscriminatorConfig::validate() const {
  check(d > 0 && heads > 0 && d % heads == 0, "discriminator width must divide by heads");
  check(hidden > 0, "discriminator hidden width must be positive");
  check(n_points > 0 && n_local > 0 && n_points % n_local == 0,
        "discriminator n_points must divide into n_local groups");
  check(k > 0, "discriminator joint count must be positive");
}

namespace {

struct DiscLayers {
  Dense in_obj, in_th, in_r, in_t, in_geo;
  TransformerBlock block0, block1;
  Mlp head;

  explicit DiscLayers(const DiscriminatorConfig& c)
      : in_obj("disc.in_obj", c.group_size() * 3 + 5, c.d),
        in_th("disc.in_th", c.k, c.d),
        in_r("disc.in_r", 6, c.d),
        in_t("disc.in_t", 3, c.d),
        in_geo("disc.in_geo", 2 * (c.k + 1), c.d),
        block0("disc.block0", c.d, c.heads, c.hidden),
        block1("disc.block1", c.d, c.heads, c.hidden),
        head("disc.head", {2 * c.d, c.hidden, 2}, Act::ReLU, false) {}
};

Tensor as_row(const Tensor& v) { return Tensor({1, v.size()}, v.raw()); }

}  // namespace

void Discriminator::init(ParamStore& store, RngStream& rng) const {
  DiscLayers L(cfg_);
  L.in_obj.init(store, rng);
  L.in_th.init(store, rng);
  L.in_r.init(store, rng);
  L.in_t.init(store, rng);
  L.in_geo.init(store, rng);
  L.block0.init(store, rng);
  L.block1.init(store, rng);
  L.head.init(store, rng);
}

Var Discriminator::logits_graph(GraphCtx& ctx, const PointCloud& object, const HandSpec& spec,
                                const HandPose& pose) const {
  object.validate();
  check(object.size() >= std::max(cfg_.n_local, cfg_.group_size()),
        "discriminator needs at least " +
            std::to_string(std::max(cfg_.n_local, cfg_.group_size())) +
            " object points, got " + std::to_string(object.size()));
  check(spec.dof() == cfg_.k, "hand DOF does not match discriminator config");
  DiscLayers L(cfg_);
  std::vector<LinkPose> fk = forward_kinematics(spec, pose);

  // Object tokens: flattened kNN group positions, the FPS center, and the
  // center's clearance to the hand so the net sees which regions are touched.
  std::vector<int64_t> centers = farthest_point_sample(object.points, cfg_.n_local, 0);
  Tensor center_pos = Tensor::zeros({cfg_.n_local, 3});
  Tensor center_clear = Tensor::zeros({cfg_.n_local, 2});
  for (int64_t i = 0; i < cfg_.n_local; ++i) {
    for (int64_t j = 0; j < 3; ++j) center_pos.at(i, j) = object.points.at(centers[i], j);
    const double sd = hand_sdf(spec, fk, object.point(centers[i]));
    center_clear.at(i, 0) = std::clamp(sd / 0.01, -3.0, 10.0);
    center_clear.at(i, 1) = std::clamp(sd / 0.002, -5.0, 5.0);
  }
  std::vector<std::vector<int64_t>> groups = knn_group(object.points, center_pos, cfg_.group_size());
  std::vector<int64_t> flat;
  flat.reserve(static_cast<size_t>(cfg_.n_points));
  for (const auto& grp : groups) flat.insert(flat.end(), grp.begin(), grp.end());

  Var pts = ctx.c(object.points);  // [N,3]
  Var grouped = reshape(gather_rows(pts, flat), {cfg_.n_local, cfg_.group_size() * 3});
  Var tok_obj =
      L.in_obj(ctx, concat({grouped, ctx.c(center_pos), ctx.c(center_clear)}, 1));  // [n_local,d]

  // Hand tokens: limit-normalized joints, rotation, workspace-scaled position.
  Tensor theta_hat = normalize_joints(spec, pose.theta);
  Tensor t_scaled = pose.trans;
  for (int64_t i = 0; i < 3; ++i) t_scaled[i] /= 0.3;
  Var tok_th = L.in_th(ctx, ctx.c(as_row(theta_hat)));
  Var tok_r = L.in_r(ctx, ctx.c(as_row(pose.rot6d)));
  Var tok_t = L.in_t(ctx, ctx.c(as_row(t_scaled)));

  // Clearance token: per-link signed distance to the cloud at a coarse and a
  // fine (contact-band) scale. Success labels hinge on which links touch the
  // surface and how deep the hand sinks, so this is handed to the net
  // directly instead of asking two attention layers to rediscover capsule
  // geometry from coordinates.
  const int64_t n_links = static_cast<int64_t>(spec.links.size());
  Tensor geo = Tensor::zeros({1, 2 * n_links});
  for (int64_t li = 0; li < n_links; ++li) {
    double best = std::numeric_limits<double>::infinity();
    for (int64_t i = 0; i < object.size(); ++i)
      best = std::min(best, capsule_sdf_world(spec.links[li], fk[li], object.point(i)));
    geo[li] = std::clamp(best / 0.01, -3.0, 10.0);
    geo[n_links + li] = std::clamp(best / 0.002, -5.0, 5.0);
  }
  Var tok_geo = L.in_geo(ctx, ctx.c(geo));

  const int64_t ntok = cfg_.n_local + 4;
  Var seq = concat({tok_obj, tok_th, tok_r, tok_t, tok_geo}, 0);  // [ntok,d]
  Var hidden = reshape(L.block1(ctx, L.block0(ctx, reshape(seq, {1, ntok, cfg_.d}))),
                       {ntok, cfg_.d});

  // Separate mean pools over object and hand tokens, then the 2-logit head.
  Var pool_obj = mean_axis(slice(hidden, 0, 0, cfg_.n_local), 0, true);  // [1,d]
  Var pool_hand = mean_axis(slice(hidden, 0, cfg_.n_local, 4), 0, true);  // [1,d]
  return L.head(ctx, concat({pool_obj, pool_hand}, 1));  // [1,2]
}

double Discriminator::score(const ParamStore& store, const PointCloud& object,
                            const HandSpec& spec, const HandPose& pose) const {
  Tape tape;
  GraphCtx ctx{tape, const_cast<ParamStore&>(store), {}};
  Var logits = logits_graph(ctx, object, spec, pose);
  Tensor prob = softmax_lastdim(logits).val();
  return prob[1];
}

double auc_score(const std::vector<double>& scores, const std::vector<bool>& labels) {
  check(scores.size() == labels.size(), "auc wants one label per score");
  const int64_t n = static_cast<int64_t>(scores.size());
  std::vector<int64_t> order(n);
  std::iota(order.begin(), order.end(), int64_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](int64_t a, int64_t b) { return scores[a] < scores[b]; });

  // Average ranks across ties, then the Mann-Whitney statistic.
  std::vector<double> rank(n, 0.0);
  int64_t i = 0;
  while (i < n) {
    int64_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (int64_t u = i; u <= j; ++u) rank[order[u]] = avg;
    i = j + 1;
  }
  double pos_ranks = 0.0;
  int64_t n_pos = 0;
  for (int64_t u = 0; u < n; ++u)
    if (labels[u]) {
      pos_ranks += rank[u];
      ++n_pos;
    }
  const int64_t n_neg = n - n_pos;
  check(n_pos > 0 && n_neg > 0, "auc needs both classes");
  return (pos_ranks - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1)) /
         (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<int64_t> rank_and_select(const std::vector<double>& scores, int64_t n) {
  const int64_t m = static_cast<int64_t>(scores.size());
  check(n >= 0 && n <= m,
        "rank_and_select wants n <= " + std::to_string(m) + ", got " + std::to_string(n));
  std::vector<int64_t> order(m);
  std::iota(order.begin(), order.end(), int64_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](int64_t a, int64_t b) { return scores[a] > scores[b]; });
  order.resize(static_cast<size_t>(n));
  return order;
}

DiscTrainMetrics train_discriminator(const Discriminator& model, ParamStore& store,
                                     const std::vector<GraspRecord>& records,
                                     const std::map<std::string, PointCloud>& objects,
                                     const HandSpec& spec, int64_t epochs, double lr,
                                     RngStream& stream) {
  check(epochs >= 1, "train_discriminator wants epochs >= 1");
  std::vector<int64_t> by_class[2];
  for (size_t i = 0; i < records.size(); ++i) {
    check(objects.count(records[i].object_id) > 0,
          "record references unknown object '" + records[i].object_id + "'");
    by_class[records[i].label ? 1 : 0].push_back(static_cast<int64_t>(i));
  }
  check(!by_class[0].empty() && !by_class[1].empty(), "training data must contain both labels");

  // Balance by downsampling the majority class, then hold out a stratified
  // fifth of each class for the AUC report.
  const int64_t per_class = std::min<int64_t>(by_class[0].size(), by_class[1].size());
  for (auto& v : by_class) {
    std::vector<int64_t> perm = stream.permutation(static_cast<int64_t>(v.size()));
    std::vector<int64_t> out;
    out.reserve(static_cast<size_t>(per_class));
    for (int64_t i = 0; i < per_class; ++i) out.push_back(v[perm[i]]);
    v = std::move(out);
  }
  const int64_t hold = std::max<int64_t>(1, per_class / 5);
  check(per_class > hold, "too few records per class to split off a holdout");
  std::vector<int64_t> train_idx, hold_idx;
  for (int64_t i = 0; i < per_class; ++i) {
    (i < hold ? hold_idx : train_idx).push_back(by_class[1][i]);
    (i < hold ? hold_idx : train_idx).push_back(by_class[0][i]);
  }

  DiscTrainMetrics metrics;
  metrics.train_count = static_cast<int64_t>(train_idx.size());
  metrics.holdout_count = static_cast<int64_t>(hold_idx.size());

  // Plain Adam over shuffled minibatches; the kept parameters are the average
  // of the epoch-end snapshots from the second half of training, which
  // flattens the late overfitting wobble on corpora this small.
  Adam adam(AdamConfig{lr, 0.9, 0.999, 1e-8});
  const int64_t batch = 16;
  ParamStore averaged;
  int64_t averaged_n = 0;
  for (int64_t e = 0; e < epochs; ++e) {
    std::vector<int64_t> perm = stream.permutation(metrics.train_count);
    double epoch_loss = 0.0;
    for (int64_t b = 0; b < metrics.train_count; b += batch) {
      const int64_t bs = std::min<int64_t>(batch, metrics.train_count - b);
      store.zero_grads();
      for (int64_t s = 0; s < bs; ++s) {
        const GraspRecord& rec = records[static_cast<size_t>(train_idx[perm[b + s]])];
        Tape tape;
        GraphCtx ctx{tape, store, {}};
        Var logits = model.logits_graph(ctx, objects.at(rec.object_id), spec, rec.pose);
        Tensor onehot = Tensor::zeros({1, 2});
        onehot[rec.label ? 1 : 0] = 1.0;
        Var nll = neg(sum_all(mul(log_softmax_lastdim(logits), ctx.c(onehot))));
        Var loss = scale(nll, 1.0 / static_cast<double>(bs));
        tape.backward(loss);
        ctx.harvest_grads();
        epoch_loss += nll.val().item();
      }
      adam.step(store);
    }
    metrics.epoch_loss.push_back(epoch_loss / static_cast<double>(metrics.train_count));
    if (e >= epochs / 2) {
      if (averaged_n == 0) averaged = store;
      else
        for (size_t i = 0; i < store.num_entries(); ++i) {
          const Tensor& v = store.entry_at(i).value;
          Tensor& acc = averaged.entry_at(i).value;
          for (int64_t j = 0; j < v.size(); ++j) acc[j] += v[j];
        }
      ++averaged_n;
    }
  }
  for (size_t i = 0; i < averaged.num_entries(); ++i) {
    Tensor& acc = averaged.entry_at(i).value;
    for (int64_t j = 0; j < acc.size(); ++j) acc[j] /= static_cast<double>(averaged_n);
  }
  for (size_t i = 0; i < store.num_entries(); ++i)
    store.entry_at(i).value = averaged.entry_at(i).value;

  std::vector<double> hold_scores;
  std::vector<bool> hold_labels;
  for (int64_t idx : hold_idx) {
    const GraspRecord& rec = records[static_cast<size_t>(idx)];
    hold_scores.push_back(model.score(store, objects.at(rec.object_id), spec, rec.pose));
    hold_labels.push_back(rec.label);
  }
  metrics.holdout_auc = auc_score(hold_scores, hold_labels);
  return metrics;
}

}  // namespace ugg
