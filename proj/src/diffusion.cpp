#include "ugg/diffusion.hpp"

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "ugg/common.hpp"
#include "ugg/geometry.hpp"

namespace ugg {

namespace {

double sched_at(const std::vector<double>& v, int64_t t, const char* what) {
  check(t >= 1 && t <= static_cast<int64_t>(v.size()),
        std::string(what) + ": timestep " + std::to_string(t) + " outside [1, " +
            std::to_string(v.size()) + "]");
  return v[static_cast<size_t>(t - 1)];
}

// Modality tags in fixed role order.
enum Modality { kO = 0, kH = 1, kC = 2 };

struct RoleRef {
  Tensor LatentState::*field;
  Modality modality;
};

constexpr std::array<RoleRef, 6> kRoles = {{
    {&LatentState::g_o, kO},
    {&LatentState::l_o, kO},
    {&LatentState::g_h, kH},
    {&LatentState::r, kH},
    {&LatentState::t, kH},
    {&LatentState::c, kC},
}};

int64_t modality_t(const TimestepTriple& ts, Modality m) {
  switch (m) {
    case kO: return ts.t_o;
    case kH: return ts.t_h;
    default: return ts.t_c;
  }
}

Tensor as_row(const Tensor& v) { return Tensor(Shape{1, v.size()}, v.raw()); }

}  // namespace

double NoiseSchedule::beta_at(int64_t t) const { return sched_at(beta, t, "beta"); }
double NoiseSchedule::alpha_at(int64_t t) const { return sched_at(alpha, t, "alpha"); }
double NoiseSchedule::alpha_bar_at(int64_t t) const { return sched_at(alpha_bar, t, "alpha_bar"); }
double NoiseSchedule::sigma_at(int64_t t) const { return sched_at(sigma, t, "sigma"); }

NoiseSchedule make_schedule(int64_t T, double beta1, double betaT) {
  check(T >= 1, "schedule needs T >= 1");
  check(0.0 < beta1 && beta1 < betaT && betaT < 1.0,
        "schedule needs 0 < beta1 < betaT < 1");
  NoiseSchedule s;
  s.T = T;
  const double r1 = std::sqrt(beta1), rT = std::sqrt(betaT);
  double prod = 1.0;
  for (int64_t t = 1; t <= T; ++t) {
    const double frac = T > 1 ? static_cast<double>(t - 1) / static_cast<double>(T - 1) : 0.0;
    const double root = r1 + frac * (rT - r1);
    const double b = root * root;
    s.beta.push_back(b);
    s.alpha.push_back(1.0 - b);
    prod *= 1.0 - b;
    s.alpha_bar.push_back(prod);
    s.sigma.push_back(std::sqrt(b));
  }
  return s;
}

Tensor q_sample(const Tensor& x0, int64_t t, const Tensor& eps, const NoiseSchedule& sched) {
  if (t == 0) return x0;
  check(x0.shape() == eps.shape(), "q_sample: x0 shape " + shape_str(x0.shape()) +
                                       " does not match eps " + shape_str(eps.shape()));
  const double ab = sched.alpha_bar_at(t);
  const double ca = std::sqrt(ab), ce = std::sqrt(1.0 - ab);
  Tensor out = x0;
  for (int64_t i = 0; i < out.size(); ++i) out[i] = ca * x0[i] + ce * eps[i];
  return out;
}

void TimestepTriple::validate(int64_t T) const {
  for (int64_t v : {t_o, t_h, t_c})
    check(v >= 0 && v <= T,
          "timestep " + std::to_string(v) + " outside [0, " + std::to_string(T) + "]");
}

void DiffusionConfig::validate() const {
  check(d >= 2 && d % 2 == 0, "token width must be even and >= 2");
  check(depth >= 2 && depth % 2 == 0, "trunk depth must be even and >= 2");
  check(d % heads == 0, "token width must divide evenly into heads");
  check(n_local >= 1 && n_points % n_local == 0,
        "n_points must be a multiple of n_local");
  check(n_contact >= 1, "need at least one contact token");
}

LatentState LatentState::zeros(const DiffusionConfig& cfg) {
  LatentState s;
  s.g_o = Tensor::zeros({cfg.d_g});
  s.l_o = Tensor::zeros({cfg.n_points, 3 + cfg.d_l});
  s.g_h = Tensor::zeros({cfg.d_h});
  s.r = Tensor::zeros({6});
  s.t = Tensor::zeros({3});
  s.c = Tensor::zeros({cfg.n_contact, 3});
  return s;
}

LatentState LatentState::gaussian(const DiffusionConfig& cfg, RngStream& stream) {
  LatentState s = zeros(cfg);
  for (const RoleRef& role : kRoles) {
    Tensor& x = s.*role.field;
    x = stream.gaussian(x.shape());
  }
  return s;
}

void LatentState::validate(const DiffusionConfig& cfg) const {
  const LatentState ref = zeros(cfg);
  for (const RoleRef& role : kRoles) {
    const Tensor& got = this->*role.field;
    const Tensor& want = ref.*role.field;
    check(got.shape() == want.shape(), "latent state role shape " + shape_str(got.shape()) +
                                           " does not match config " + shape_str(want.shape()));
  }
}

int64_t LatentState::total_dim() const {
  int64_t n = 0;
  for (const RoleRef& role : kRoles) n += (this->*role.field).size();
  return n;
}

// ---------------------------------------------------------------------------
// Standardizer
// ---------------------------------------------------------------------------

namespace {

void fit_channels(const std::vector<const Tensor*>& rows, int64_t width, Tensor& mean,
                  Tensor& stddev) {
  mean = Tensor::zeros({width});
  stddev = Tensor::zeros({width});
  int64_t count = 0;
  for (const Tensor* t : rows) count += t->size() / width;
  check(count > 0, "standardizer fit: empty data");
  for (const Tensor* t : rows)
    for (int64_t i = 0; i < t->size(); ++i) mean[i % width] += (*t)[i];
  for (int64_t j = 0; j < width; ++j) mean[j] /= static_cast<double>(count);
  for (const Tensor* t : rows)
    for (int64_t i = 0; i < t->size(); ++i) {
      const double d = (*t)[i] - mean[i % width];
      stddev[i % width] += d * d;
    }
  for (int64_t j = 0; j < width; ++j)
    stddev[j] = std::max(std::sqrt(stddev[j] / static_cast<double>(count)), 1e-6);
}

void scale_into(Tensor& x, double k) {
  for (int64_t i = 0; i < x.size(); ++i) x[i] *= k;
}

}  // namespace

Standardizer Standardizer::identity(const DiffusionConfig& cfg) {
  Standardizer s;
  s.go_mean = Tensor::zeros({cfg.d_g});
  s.go_std = Tensor::full({cfg.d_g}, 1.0);
  s.feat_mean = Tensor::zeros({cfg.d_l});
  s.feat_std = Tensor::full({cfg.d_l}, 1.0);
  s.gh_mean = Tensor::zeros({cfg.d_h});
  s.gh_std = Tensor::full({cfg.d_h}, 1.0);
  return s;
}

Standardizer Standardizer::fit(const DiffusionConfig& cfg, const std::vector<GraspLatents>& data) {
  check(!data.empty(), "standardizer fit: empty dataset");
  Standardizer s = identity(cfg);
  std::vector<const Tensor*> go, gh;
  std::vector<Tensor> feats;
  for (const GraspLatents& g : data) {
    go.push_back(&g.g_o);
    gh.push_back(&g.g_h);
    // Feature channels are the trailing d_l columns of l_o.
    Tensor f = Tensor::zeros({g.l_o.shape()[0], cfg.d_l});
    for (int64_t i = 0; i < f.shape()[0]; ++i)
      for (int64_t j = 0; j < cfg.d_l; ++j) f.at(i, j) = g.l_o.at(i, 3 + j);
    feats.push_back(std::move(f));
  }
  std::vector<const Tensor*> fptr;
  for (const Tensor& f : feats) fptr.push_back(&f);
  fit_channels(go, cfg.d_g, s.go_mean, s.go_std);
  fit_channels(gh, cfg.d_h, s.gh_mean, s.gh_std);
  fit_channels(fptr, cfg.d_l, s.feat_mean, s.feat_std);
  return s;
}

void Standardizer::put(ParamStore& store) const {
  auto write = [&](const std::string& path, const Tensor& v) {
    if (!store.has(path)) store.create(path, v.shape(), false);
    store.get(path) = v;
  };
  write("std.go_mean", go_mean);
  write("std.go_std", go_std);
  write("std.feat_mean", feat_mean);
  write("std.feat_std", feat_std);
  write("std.gh_mean", gh_mean);
  write("std.gh_std", gh_std);
  store.meta()["std.pos_scale"] = std::to_string(pos_scale);
}

Standardizer Standardizer::from_store(const ParamStore& store) {
  Standardizer s;
  for (const char* p : {"std.go_mean", "std.go_std", "std.feat_mean", "std.feat_std",
                        "std.gh_mean", "std.gh_std"})
    check(store.has(p), std::string("checkpoint is missing standardizer entry '") + p + "'");
  s.go_mean = store.get("std.go_mean");
  s.go_std = store.get("std.go_std");
  s.feat_mean = store.get("std.feat_mean");
  s.feat_std = store.get("std.feat_std");
  s.gh_mean = store.get("std.gh_mean");
  s.gh_std = store.get("std.gh_std");
  auto it = store.meta().find("std.pos_scale");
  if (it != store.meta().end()) s.pos_scale = std::stod(it->second);
  return s;
}

LatentState Standardizer::standardize(const DiffusionConfig& cfg, const GraspLatents& raw) const {
  LatentState s;
  s.g_o = raw.g_o;
  for (int64_t i = 0; i < cfg.d_g; ++i) s.g_o[i] = (raw.g_o[i] - go_mean[i]) / go_std[i];
  s.l_o = raw.l_o;
  for (int64_t i = 0; i < s.l_o.shape()[0]; ++i) {
    for (int64_t j = 0; j < 3; ++j) s.l_o.at(i, j) = raw.l_o.at(i, j) / pos_scale;
    for (int64_t j = 0; j < cfg.d_l; ++j)
      s.l_o.at(i, 3 + j) = (raw.l_o.at(i, 3 + j) - feat_mean[j]) / feat_std[j];
  }
  s.g_h = raw.g_h;
  for (int64_t i = 0; i < cfg.d_h; ++i) s.g_h[i] = (raw.g_h[i] - gh_mean[i]) / gh_std[i];
  s.r = raw.r;
  s.t = raw.t;
  scale_into(s.t, 1.0 / pos_scale);
  s.c = raw.anchors;
  scale_into(s.c, 1.0 / pos_scale);
  s.validate(cfg);
  return s;
}

GraspLatents Standardizer::destandardize(const DiffusionConfig& cfg,
                                         const LatentState& state) const {
  state.validate(cfg);
  GraspLatents raw;
  raw.g_o = state.g_o;
  for (int64_t i = 0; i < cfg.d_g; ++i) raw.g_o[i] = state.g_o[i] * go_std[i] + go_mean[i];
  raw.l_o = state.l_o;
  for (int64_t i = 0; i < raw.l_o.shape()[0]; ++i) {
    for (int64_t j = 0; j < 3; ++j) raw.l_o.at(i, j) = state.l_o.at(i, j) * pos_scale;
    for (int64_t j = 0; j < cfg.d_l; ++j)
      raw.l_o.at(i, 3 + j) = state.l_o.at(i, 3 + j) * feat_std[j] + feat_mean[j];
  }
  raw.g_h = state.g_h;
  for (int64_t i = 0; i < cfg.d_h; ++i) raw.g_h[i] = state.g_h[i] * gh_std[i] + gh_mean[i];
  raw.r = state.r;
  raw.t = state.t;
  scale_into(raw.t, pos_scale);
  raw.anchors = state.c;
  scale_into(raw.anchors, pos_scale);
  return raw;
}

// ---------------------------------------------------------------------------
// Denoiser
// ---------------------------------------------------------------------------

LocalGrouping make_grouping(const Tensor& local, const DiffusionConfig& cfg) {
  check(local.rank() == 2 && local.shape()[0] == cfg.n_points,
        "grouping: latent points have shape " + shape_str(local.shape()));
  Tensor pos = Tensor::zeros({cfg.n_points, 3});
  for (int64_t i = 0; i < cfg.n_points; ++i)
    for (int64_t j = 0; j < 3; ++j) pos.at(i, j) = local.at(i, j);

  LocalGrouping g;
  g.centers = farthest_point_sample(pos, cfg.n_local, 0);
  Tensor centers = Tensor::zeros({cfg.n_local, 3});
  for (int64_t i = 0; i < cfg.n_local; ++i)
    for (int64_t j = 0; j < 3; ++j) centers.at(i, j) = pos.at(g.centers[i], j);
  g.groups = knn_group(pos, centers, cfg.group_size());

  g.assign.resize(static_cast<size_t>(cfg.n_points));
  for (int64_t i = 0; i < cfg.n_points; ++i) {
    double best = 0.0;
    int64_t arg = -1;
    for (int64_t s = 0; s < cfg.n_local; ++s) {
      double d2 = 0.0;
      for (int64_t j = 0; j < 3; ++j) {
        const double d = pos.at(i, j) - centers.at(s, j);
        d2 += d * d;
      }
      if (arg < 0 || d2 < best) {
        best = d2;
        arg = s;
      }
    }
    g.assign[static_cast<size_t>(i)] = arg;
  }
  return g;
}

namespace {

struct DenLayers {
  const DiffusionConfig& cfg;
  Dense in_g, in_l, in_gh, in_r, in_t, in_c;
  Dense out_g, out_gh, out_r, out_t, out_c;
  Mlp out_l;
  UVitTrunk trunk;

  explicit DenLayers(const DiffusionConfig& c)
      : cfg(c),
        in_g("den.in_g", c.d_g, c.d),
        in_l("den.in_l", c.group_size() * (3 + c.d_l) + 3, c.d),
        in_gh("den.in_gh", c.d_h, c.d),
        in_r("den.in_r", 6, c.d),
        in_t("den.in_t", 3, c.d),
        in_c("den.in_c", 3, c.d),
        out_g("den.out_g", c.d, c.d_g),
        out_gh("den.out_gh", c.d, c.d_h),
        out_r("den.out_r", c.d, 6),
        out_t("den.out_t", c.d, 3),
        out_c("den.out_c", c.d, 3),
        out_l("den.out_l", {(3 + c.d_l) + c.d + 3, c.d, 3 + c.d_l}, Act::ReLU, false),
        trunk("den.trunk", c.d, c.depth, c.heads, c.hidden) {}
};

const char* modality_name(Modality m) { return m == kO ? "o" : (m == kH ? "h" : "c"); }

// Per-modality timestep embedding: a learned vector for the clean index t = 0,
// else a linear projection of the sinusoidal embedding.
Var temb_for(GraphCtx& ctx, const DiffusionConfig& cfg, Modality m, int64_t t) {
  const std::string tag = modality_name(m);
  if (t == 0) return ctx.p("den.temb0." + tag);
  Dense proj("den.temb_proj." + tag, cfg.d, cfg.d);
  Tensor emb = as_row(timestep_embedding(t, cfg.d));
  return proj(ctx, ctx.c(emb));
}

}  // namespace

void DiffusionModel::init(ParamStore& store, RngStream& rng) const {
  DenLayers L(cfg_);
  L.in_g.init(store, rng);
  L.in_l.init(store, rng);
  L.in_gh.init(store, rng);
  L.in_r.init(store, rng);
  L.in_t.init(store, rng);
  L.in_c.init(store, rng);
  L.trunk.init(store, rng);
  L.out_g.init(store, rng);
  L.out_l.init(store, rng);
  L.out_gh.init(store, rng);
  L.out_r.init(store, rng);
  L.out_t.init(store, rng);
  L.out_c.init(store, rng);
  for (Modality m : {kO, kH, kC}) {
    const std::string tag = modality_name(m);
    Dense("den.temb_proj." + tag, cfg_.d, cfg_.d).init(store, rng);
    Tensor& t0 = store.create("den.temb0." + tag, {1, cfg_.d});
    RngStream r0 = rng.fork("den.temb0." + tag);
    Tensor init = r0.gaussian({1, cfg_.d});
    for (int64_t i = 0; i < init.size(); ++i) t0[i] = 0.02 * init[i];
  }
}

DiffusionModel::GraphOut DiffusionModel::denoise_graph(GraphCtx& ctx, const LatentState& state,
                                                       const TimestepTriple& ts,
                                                       const LocalGrouping* grouping) const {
  state.validate(cfg_);
  check(ts.t_o >= 0 && ts.t_h >= 0 && ts.t_c >= 0, "timesteps must be nonnegative");
  DenLayers L(cfg_);

  LocalGrouping own;
  if (!grouping) {
    own = make_grouping(state.l_o, cfg_);
    grouping = &own;
  }
  check(static_cast<int64_t>(grouping->centers.size()) == cfg_.n_local &&
            static_cast<int64_t>(grouping->assign.size()) == cfg_.n_points,
        "grouping does not match config");

  Var temb_o = temb_for(ctx, cfg_, kO, ts.t_o);
  Var temb_h = temb_for(ctx, cfg_, kH, ts.t_h);
  Var temb_c = temb_for(ctx, cfg_, kC, ts.t_c);

  Var l_o = ctx.c(state.l_o);  // [N, 3+d_l]
  Var tok_g = add(L.in_g(ctx, ctx.c(as_row(state.g_o))), temb_o);  // [1,d]

  // Local tokens: flattened kNN group content plus the FPS center coordinate.
  std::vector<int64_t> flat;
  flat.reserve(static_cast<size_t>(cfg_.n_points));
  for (const auto& grp : grouping->groups) {
    check(static_cast<int64_t>(grp.size()) == cfg_.group_size(), "group size mismatch");
    flat.insert(flat.end(), grp.begin(), grp.end());
  }
  Var grouped = reshape(gather_rows(l_o, flat),
                        {cfg_.n_local, cfg_.group_size() * (3 + cfg_.d_l)});
  Var center_rows = gather_rows(l_o, grouping->centers);  // [n_local, 3+d_l]
  Var center_pos = slice(center_rows, 1, 0, 3);
  Var tok_l = add(L.in_l(ctx, concat({grouped, center_pos}, 1)), temb_o);  // [n_local,d]

  Var tok_gh = add(L.in_gh(ctx, ctx.c(as_row(state.g_h))), temb_h);
  Var tok_r = add(L.in_r(ctx, ctx.c(as_row(state.r))), temb_h);
  Var tok_t = add(L.in_t(ctx, ctx.c(as_row(state.t))), temb_h);
  Var tok_c = add(L.in_c(ctx, ctx.c(state.c)), temb_c);  // [n_contact,d]

  const int64_t ntok = cfg_.n_tokens();
  Var seq = concat({tok_g, tok_l, tok_gh, tok_r, tok_t, tok_c}, 0);  // [ntok, d]
  Var hidden = reshape(L.trunk(ctx, reshape(seq, {1, ntok, cfg_.d})), {ntok, cfg_.d});

  Var h_g = slice(hidden, 0, 0, 1);
  Var h_l = slice(hidden, 0, 1, cfg_.n_local);
  Var h_gh = slice(hidden, 0, 1 + cfg_.n_local, 1);
  Var h_r = slice(hidden, 0, 2 + cfg_.n_local, 1);
  Var h_t = slice(hidden, 0, 3 + cfg_.n_local, 1);
  Var h_c = slice(hidden, 0, 4 + cfg_.n_local, cfg_.n_contact);

  // Per-point local head: each point reads its nearest center's token.
  Var point_tok = gather_rows(h_l, grouping->assign);          // [N, d]
  Var point_center = gather_rows(center_pos, grouping->assign);  // [N, 3]
  Var rel = sub(slice(l_o, 1, 0, 3), point_center);
  Var head_in = concat({l_o, point_tok, rel}, 1);

  GraphOut out;
  out.g_o = reshape(L.out_g(ctx, h_g), {cfg_.d_g});
  out.l_o = L.out_l(ctx, head_in);  // [N, 3+d_l]
  out.g_h = reshape(L.out_gh(ctx, h_gh), {cfg_.d_h});
  out.r = reshape(L.out_r(ctx, h_r), {6});
  out.t = reshape(L.out_t(ctx, h_t), {3});
  out.c = L.out_c(ctx, h_c);  // [n_contact, 3]
  return out;
}

LatentState DiffusionModel::predict_noise(const ParamStore& store, const LatentState& state,
                                          const TimestepTriple& ts) const {
  Tape tape(false);
  GraphCtx ctx{tape, const_cast<ParamStore&>(store), {}};
  GraphOut g = denoise_graph(ctx, state, ts);
  LatentState out;
  out.g_o = g.g_o.val();
  out.l_o = g.l_o.val();
  out.g_h = g.g_h.val();
  out.r = g.r.val();
  out.t = g.t.val();
  out.c = g.c.val();
  return out;
}

double DiffusionModel::train_step(ParamStore& store, Adam& adam,
                                  const std::vector<LatentState>& batch,
                                  const NoiseSchedule& sched, RngStream& stream,
                                  bool mixed_pinning, double pin_prob) const {
  check(!batch.empty(), "diffusion train step: empty batch");
  Tape tape;
  GraphCtx ctx{tape, store, {}};
  Var sum = ctx.c(Tensor::scalar(0.0));
  for (const LatentState& item : batch) {
    item.validate(cfg_);
    TimestepTriple ts;
    ts.t_o = 1 + stream.uniform_int(sched.T);
    ts.t_h = 1 + stream.uniform_int(sched.T);
    ts.t_c = 1 + stream.uniform_int(sched.T);
    if (mixed_pinning) {
      const double u = stream.uniform();
      if (u < pin_prob) ts.t_o = 0;
      else if (u < 2.0 * pin_prob) ts.t_h = 0;
    }

    LatentState noised = item;
    LatentState eps = LatentState::zeros(cfg_);
    for (const RoleRef& role : kRoles) {
      const int64_t t = modality_t(ts, role.modality);
      if (t == 0) continue;
      Tensor& e = eps.*role.field;
      e = stream.gaussian((item.*role.field).shape());
      noised.*role.field = q_sample(item.*role.field, t, e, sched);
    }

    GraphOut pred = denoise_graph(ctx, noised, ts);
    const std::array<Var GraphOut::*, 6> outs = {&GraphOut::g_o, &GraphOut::l_o, &GraphOut::g_h,
                                                 &GraphOut::r, &GraphOut::t, &GraphOut::c};
    for (size_t i = 0; i < kRoles.size(); ++i) {
      if (modality_t(ts, kRoles[i].modality) == 0) continue;
      Var diff = sub(pred.*outs[i], ctx.c(eps.*kRoles[i].field));
      sum = add(sum, sum_all(square(diff)));
    }
  }
  Var loss = scale(sum, 1.0 / static_cast<double>(batch.size()));
  const double lval = loss.val().item();
  check(std::isfinite(lval), "diffusion training produced a non-finite loss");
  store.zero_grads();
  tape.backward(loss);
  ctx.harvest_grads();
  adam.step(store);
  return lval;
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

namespace {

bool role_diffused(SampleMode mode, Modality m) {
  switch (mode) {
    case SampleMode::Grasp: return m != kO;
    case SampleMode::Object: return m != kH;
    case SampleMode::Joint: return true;
  }
  return true;
}

}  // namespace

LatentState ancestral_sample(const NoisePredictor& predict, const NoiseSchedule& sched,
                             SampleMode mode, const LatentState& cond,
                             const DiffusionConfig& cfg, RngStream& stream) {
  cond.validate(cfg);
  LatentState state = cond;
  for (const RoleRef& role : kRoles) {
    if (role_diffused(mode, role.modality))
      state.*role.field = stream.gaussian((cond.*role.field).shape());
  }

  for (int64_t t = sched.T; t >= 1; --t) {
    TimestepTriple ts;
    ts.t_o = role_diffused(mode, kO) ? t : 0;
    ts.t_h = role_diffused(mode, kH) ? t : 0;
    ts.t_c = role_diffused(mode, kC) ? t : 0;

    LatentState eps_hat = predict(state, ts);
    const double b = sched.beta_at(t);
    const double inv_sa = 1.0 / std::sqrt(sched.alpha_at(t));
    const double coef = b / std::sqrt(1.0 - sched.alpha_bar_at(t));
    const double sig = sched.sigma_at(t);

    for (const RoleRef& role : kRoles) {
      if (!role_diffused(mode, role.modality)) continue;
      Tensor& x = state.*role.field;
      const Tensor& e = eps_hat.*role.field;
      check(e.shape() == x.shape(), "noise prediction shape mismatch");
      Tensor z;
      if (t > 1) z = stream.gaussian(x.shape());
      for (int64_t i = 0; i < x.size(); ++i) {
        double v = (x[i] - coef * e[i]) * inv_sa;
        if (t > 1) v += sig * z[i];
        x[i] = v;
      }
    }
  }
  return state;
}

namespace {

LatentState model_sample(const DiffusionModel& model, const ParamStore& store,
                         const NoiseSchedule& sched, SampleMode mode, const LatentState& cond,
                         RngStream& stream) {
  NoisePredictor fn = [&](const LatentState& s, const TimestepTriple& ts) {
    return model.predict_noise(store, s, ts);
  };
  return ancestral_sample(fn, sched, mode, cond, model.config(), stream);
}

}  // namespace

LatentState sample_grasp(const DiffusionModel& model, const ParamStore& store,
                         const NoiseSchedule& sched, const LatentState& object_cond,
                         RngStream& stream) {
  return model_sample(model, store, sched, SampleMode::Grasp, object_cond, stream);
}

LatentState sample_object(const DiffusionModel& model, const ParamStore& store,
                          const NoiseSchedule& sched, const LatentState& hand_cond,
                          RngStream& stream) {
  return model_sample(model, store, sched, SampleMode::Object, hand_cond, stream);
}

LatentState sample_joint(const DiffusionModel& model, const ParamStore& store,
                         const NoiseSchedule& sched, RngStream& stream) {
  return model_sample(model, store, sched, SampleMode::Joint, LatentState::zeros(model.config()),
                      stream);
}

}  // namespace ugg
