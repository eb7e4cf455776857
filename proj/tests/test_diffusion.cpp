#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "ugg/diffusion.hpp"
#include "ugg/common.hpp"

using namespace ugg;

namespace {

// Small configuration used where the full desk model would be wasteful.
DiffusionConfig tiny_config() {
  DiffusionConfig cfg;
  cfg.d = 32;
  cfg.depth = 2;
  cfg.heads = 4;
  cfg.hidden = 64;
  cfg.n_points = 32;
  cfg.n_local = 4;
  cfg.n_contact = 3;
  cfg.d_g = 4;
  cfg.d_l = 1;
  cfg.d_h = 8;
  return cfg;
}

std::array<Tensor*, 6> role_fields(LatentState& s) {
  return {&s.g_o, &s.l_o, &s.g_h, &s.r, &s.t, &s.c};
}

std::array<const Tensor*, 6> role_fields(const LatentState& s) {
  return {&s.g_o, &s.l_o, &s.g_h, &s.r, &s.t, &s.c};
}

bool states_equal(const LatentState& a, const LatentState& b) {
  auto fa = role_fields(a), fb = role_fields(b);
  for (size_t i = 0; i < fa.size(); ++i) {
    if (!(fa[i]->shape() == fb[i]->shape())) return false;
    for (int64_t j = 0; j < fa[i]->size(); ++j)
      if ((*fa[i])[j] != (*fb[i])[j]) return false;
  }
  return true;
}

double state_max_abs_diff(const LatentState& a, const LatentState& b) {
  auto fa = role_fields(a), fb = role_fields(b);
  double worst = 0.0;
  for (size_t i = 0; i < fa.size(); ++i)
    for (int64_t j = 0; j < fa[i]->size(); ++j)
      worst = std::max(worst, std::abs((*fa[i])[j] - (*fb[i])[j]));
  return worst;
}

}  // namespace

TEST_CASE("noise schedule hits the published endpoints and stays monotone") {
  NoiseSchedule s = make_schedule(200, 0.001, 0.02);
  CHECK(s.beta_at(1) == doctest::Approx(0.001).epsilon(1e-12));
  CHECK(s.beta_at(200) == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(s.alpha_bar_at(1) == doctest::Approx(1.0 - 0.001).epsilon(1e-12));

  for (int64_t t = 2; t <= 200; ++t) {
    CHECK(s.beta_at(t) > s.beta_at(t - 1));
    CHECK(s.alpha_bar_at(t) < s.alpha_bar_at(t - 1));
    CHECK(s.beta_at(t) < 1.0);
  }
  // Quadratic-in-sqrt interpolation, checked directly at an interior step.
  const double r1 = std::sqrt(0.001), rT = std::sqrt(0.02);
  const double root = r1 + (77.0 - 1.0) / 199.0 * (rT - r1);
  CHECK(s.beta_at(77) == doctest::Approx(root * root).epsilon(1e-12));
  // Sampler variance choice sigma_t^2 = beta_t.
  CHECK(s.sigma_at(50) == doctest::Approx(std::sqrt(s.beta_at(50))).epsilon(1e-12));

  CHECK_THROWS_AS(make_schedule(0, 0.001, 0.02), Error);
  CHECK_THROWS_AS(make_schedule(10, 0.02, 0.001), Error);
  CHECK_THROWS_AS(make_schedule(10, 0.0, 0.5), Error);
}

TEST_CASE("q_sample follows the affine forward kernel") {
  NoiseSchedule s = make_schedule(200, 0.001, 0.02);
  Tensor x0({4}, {0.5, -1.0, 2.0, 0.0});
  Tensor zero = Tensor::zeros({4});

  Tensor xt = q_sample(x0, 120, zero, s);
  const double ca = std::sqrt(s.alpha_bar_at(120));
  for (int64_t i = 0; i < 4; ++i) CHECK(xt[i] == doctest::Approx(ca * x0[i]).epsilon(1e-12));

  // t = 0 is the conditioning convention: unchanged data.
  Tensor same = q_sample(x0, 0, zero, s);
  for (int64_t i = 0; i < 4; ++i) CHECK(same[i] == x0[i]);

  // Monte-Carlo variance matches 1 - alpha_bar within 2%.
  const int64_t t = 100;
  const int64_t draws = 100000;
  RngStream stream(99);
  double sum = 0.0, sumsq = 0.0;
  for (int64_t k = 0; k < draws; ++k) {
    Tensor eps = stream.gaussian({4});
    Tensor x = q_sample(x0, t, eps, s);
    for (int64_t i = 0; i < 4; ++i) {
      const double centered = x[i] - std::sqrt(s.alpha_bar_at(t)) * x0[i];
      sum += centered;
      sumsq += centered * centered;
    }
  }
  const double n = static_cast<double>(4 * draws);
  const double var = sumsq / n - (sum / n) * (sum / n);
  CHECK(var == doctest::Approx(1.0 - s.alpha_bar_at(t)).epsilon(0.02));
}

TEST_CASE("posterior update with the true noise recovers the schedule interpolation") {
  // Substituting eps_hat = eps into x_{t-1} = (x_t - beta/sqrt(1-abar) eps)/sqrt(alpha)
  // must yield sqrt(abar_{t-1}) x0 + sqrt(alpha)(1-abar_{t-1})/sqrt(1-abar) eps.
  NoiseSchedule s = make_schedule(200, 0.001, 0.02);
  for (int64_t t : {2L, 50L, 123L, 200L}) {
    const double a = s.alpha_at(t), ab = s.alpha_bar_at(t), b = s.beta_at(t);
    const double ab_prev = s.alpha_bar_at(t - 1);
    const double coef_x0 = std::sqrt(ab) / std::sqrt(a);
    CHECK(coef_x0 == doctest::Approx(std::sqrt(ab_prev)).epsilon(1e-12));
    const double coef_eps = (std::sqrt(1.0 - ab) - b / std::sqrt(1.0 - ab)) / std::sqrt(a);
    const double expected = std::sqrt(a) * (1.0 - ab_prev) / std::sqrt(1.0 - ab);
    CHECK(coef_eps == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("timestep triples validate their range") {
  TimestepTriple ok{3, 0, 7};
  ok.validate(10);
  TimestepTriple bad{3, 11, 7};
  CHECK_THROWS_AS(bad.validate(10), Error);
}

TEST_CASE("local grouping partitions all points deterministically") {
  DiffusionConfig cfg = tiny_config();
  RngStream stream(5);
  Tensor local = stream.gaussian({cfg.n_points, 3 + cfg.d_l});

  LocalGrouping g1 = make_grouping(local, cfg);
  LocalGrouping g2 = make_grouping(local, cfg);
  CHECK(g1.centers == g2.centers);
  CHECK(g1.assign == g2.assign);

  REQUIRE(static_cast<int64_t>(g1.centers.size()) == cfg.n_local);
  REQUIRE(static_cast<int64_t>(g1.groups.size()) == cfg.n_local);
  for (const auto& grp : g1.groups)
    CHECK(static_cast<int64_t>(grp.size()) == cfg.group_size());

  // Every point is assigned to its true nearest center.
  for (int64_t p = 0; p < cfg.n_points; ++p) {
    double best = 1e300;
    int64_t arg = -1;
    for (int64_t c = 0; c < cfg.n_local; ++c) {
      double d2 = 0.0;
      for (int64_t j = 0; j < 3; ++j) {
        const double d = local.at(p, j) - local.at(g1.centers[c], j);
        d2 += d * d;
      }
      if (d2 < best) {
        best = d2;
        arg = c;
      }
    }
    CHECK(g1.assign[static_cast<size_t>(p)] == arg);
  }
}

TEST_CASE("denoiser output shapes mirror the state and zero heads emit zero noise") {
  DiffusionConfig cfg = tiny_config();
  DiffusionModel model(cfg);
  ParamStore store;
  RngStream init(3);
  model.init(store, init);

  RngStream stream(8);
  LatentState state = LatentState::gaussian(cfg, stream);
  LatentState eps = model.predict_noise(store, state, {5, 9, 2});
  CHECK(eps.g_o.shape() == Shape({cfg.d_g}));
  CHECK(eps.l_o.shape() == Shape({cfg.n_points, 3 + cfg.d_l}));
  CHECK(eps.g_h.shape() == Shape({cfg.d_h}));
  CHECK(eps.r.shape() == Shape({6}));
  CHECK(eps.t.shape() == Shape({3}));
  CHECK(eps.c.shape() == Shape({cfg.n_contact, 3}));
  bool any_nonzero = false;
  for (const Tensor* f : role_fields(eps))
    for (int64_t i = 0; i < f->size(); ++i) any_nonzero |= (*f)[i] != 0.0;
  CHECK(any_nonzero);

  // Zeroing the output projections silences every prediction exactly.
  for (const std::string& path : store.paths()) {
    if (path.rfind("den.out_g", 0) == 0 || path.rfind("den.out_r", 0) == 0 ||
        path.rfind("den.out_t", 0) == 0 || path.rfind("den.out_c", 0) == 0 ||
        path.rfind("den.out_gh", 0) == 0 || path.rfind("den.out_l.l1", 0) == 0)
      store.get(path).fill(0.0);
  }
  LatentState silent = model.predict_noise(store, state, {5, 9, 2});
  for (const Tensor* f : role_fields(silent))
    for (int64_t i = 0; i < f->size(); ++i) CHECK((*f)[i] == 0.0);

  // Layout mismatches are rejected.
  LatentState wrong = state;
  wrong.l_o = Tensor::zeros({cfg.n_points + 1, 3 + cfg.d_l});
  CHECK_THROWS_AS(model.predict_noise(store, wrong, {5, 9, 2}), Error);
}

TEST_CASE("permuting local tokens and un-permuting leaves predictions unchanged") {
  DiffusionConfig cfg = tiny_config();
  DiffusionModel model(cfg);
  ParamStore store;
  RngStream init(17);
  model.init(store, init);

  RngStream stream(21);
  LatentState state = LatentState::gaussian(cfg, stream);
  LocalGrouping base = make_grouping(state.l_o, cfg);

  std::vector<int64_t> perm = {2, 0, 3, 1};
  LocalGrouping permuted;
  permuted.centers.resize(base.centers.size());
  permuted.groups.resize(base.groups.size());
  std::vector<int64_t> inverse(perm.size());
  for (size_t i = 0; i < perm.size(); ++i) {
    permuted.centers[i] = base.centers[static_cast<size_t>(perm[i])];
    permuted.groups[i] = base.groups[static_cast<size_t>(perm[i])];
    inverse[static_cast<size_t>(perm[i])] = static_cast<int64_t>(i);
  }
  permuted.assign.resize(base.assign.size());
  for (size_t p = 0; p < base.assign.size(); ++p)
    permuted.assign[p] = inverse[static_cast<size_t>(base.assign[p])];

  auto run = [&](const LocalGrouping& g) {
    Tape tape(false);
    GraphCtx ctx{tape, store, {}};
    DiffusionModel::GraphOut out = model.denoise_graph(ctx, state, {4, 4, 4}, &g);
    LatentState eps;
    eps.g_o = out.g_o.val();
    eps.l_o = out.l_o.val();
    eps.g_h = out.g_h.val();
    eps.r = out.r.val();
    eps.t = out.t.val();
    eps.c = out.c.val();
    return eps;
  };
  CHECK(state_max_abs_diff(run(base), run(permuted)) < 1e-9);
}

TEST_CASE("timestep draws in training are uniform over {1..T}") {
  // Same draw the train step uses per modality: 1 + uniform_int(T).
  const int64_t T = 200, draws = 10000;
  RngStream stream(4242);
  std::vector<int64_t> counts(static_cast<size_t>(T), 0);
  for (int64_t i = 0; i < draws; ++i) ++counts[static_cast<size_t>(stream.uniform_int(T))];
  const double expected = static_cast<double>(draws) / static_cast<double>(T);
  double chi2 = 0.0;
  for (int64_t c : counts) {
    const double d = static_cast<double>(c) - expected;
    chi2 += d * d / expected;
  }
  // 99th percentile of chi-square with 199 dof is ~248.4.
  CHECK(chi2 < 248.4);
}

TEST_CASE("train_step loss matches the zero-predictor expectation and then learns") {
  DiffusionConfig cfg = tiny_config();
  DiffusionModel model(cfg);
  NoiseSchedule sched = make_schedule(50, 0.001, 0.02);

  // The objective itself: a stub prediction equal to the true noise has zero loss.
  {
    Tape tape;
    ParamStore none;
    GraphCtx ctx{tape, none, {}};
    RngStream s(1);
    Tensor eps = s.gaussian({5, 4});
    Var stub = ctx.c(eps);
    CHECK(sum_all(square(sub(stub, ctx.c(eps)))).val().item() == 0.0);
  }

  ParamStore store;
  RngStream init(3);
  model.init(store, init);
  for (const std::string& path : store.paths()) {
    if (path.rfind("den.out_g", 0) == 0 || path.rfind("den.out_r", 0) == 0 ||
        path.rfind("den.out_t", 0) == 0 || path.rfind("den.out_c", 0) == 0 ||
        path.rfind("den.out_gh", 0) == 0 || path.rfind("den.out_l.l1", 0) == 0)
      store.get(path).fill(0.0);
  }

  RngStream data(7);
  std::vector<LatentState> batch;
  for (int i = 0; i < 24; ++i) batch.push_back(LatentState::gaussian(cfg, data));
  const double dim = static_cast<double>(batch[0].total_dim());

  Adam adam;
  RngStream noise(11);
  const double loss0 = model.train_step(store, adam, batch, sched, noise);
  CHECK(loss0 == doctest::Approx(dim).epsilon(0.05));

  // A fixed 8-item batch trains down from the zero-predictor plateau.
  std::vector<LatentState> fixed(batch.begin(), batch.begin() + 8);
  Adam opt({1e-3});
  RngStream tstream(13);
  std::vector<double> losses;
  for (int step = 0; step < 300; ++step)
    losses.push_back(model.train_step(store, opt, fixed, sched, tstream));
  auto mean_of = [&](size_t lo, size_t hi) {
    return std::accumulate(losses.begin() + lo, losses.begin() + hi, 0.0) /
           static_cast<double>(hi - lo);
  };
  const double head = mean_of(0, 30), tail = mean_of(losses.size() - 30, losses.size());
  CHECK(tail < head);
  CHECK(tail / head < 0.9);

  // Mixed pinning keeps the step well-defined.
  RngStream pstream(17);
  const double pinned = model.train_step(store, opt, fixed, sched, pstream, true, 0.5);
  CHECK(std::isfinite(pinned));
}

TEST_CASE("samplers are deterministic and never touch conditioning latents") {
  DiffusionConfig cfg = tiny_config();
  DiffusionModel model(cfg);
  ParamStore store;
  RngStream init(23);
  model.init(store, init);
  NoiseSchedule sched = make_schedule(20, 0.001, 0.02);

  RngStream cstream(31);
  LatentState cond = LatentState::gaussian(cfg, cstream);

  RngStream a(77), b(77), c(78);
  LatentState ga = sample_grasp(model, store, sched, cond, a);
  LatentState gb = sample_grasp(model, store, sched, cond, b);
  LatentState gc = sample_grasp(model, store, sched, cond, c);
  CHECK(states_equal(ga, gb));
  CHECK(!states_equal(ga, gc));

  // Object modality is bit-identical to the conditioning input.
  for (int64_t i = 0; i < cond.g_o.size(); ++i) CHECK(ga.g_o[i] == cond.g_o[i]);
  for (int64_t i = 0; i < cond.l_o.size(); ++i) CHECK(ga.l_o[i] == cond.l_o[i]);

  RngStream d(91);
  LatentState ob = sample_object(model, store, sched, cond, d);
  for (int64_t i = 0; i < cond.g_h.size(); ++i) CHECK(ob.g_h[i] == cond.g_h[i]);
  for (int64_t i = 0; i < cond.r.size(); ++i) CHECK(ob.r[i] == cond.r[i]);
  for (int64_t i = 0; i < cond.t.size(); ++i) CHECK(ob.t[i] == cond.t[i]);

  RngStream e(101), f(101);
  CHECK(states_equal(sample_joint(model, store, sched, e), sample_joint(model, store, sched, f)));
}

TEST_CASE("single-step sampling equals the closed-form posterior mean update") {
  DiffusionConfig cfg = tiny_config();
  DiffusionModel model(cfg);
  ParamStore store;
  RngStream init(41);
  model.init(store, init);
  NoiseSchedule sched = make_schedule(1, 0.001, 0.02);

  RngStream cstream(5);
  LatentState cond = LatentState::gaussian(cfg, cstream);

  RngStream s1(314);
  LatentState got = sample_grasp(model, store, sched, cond, s1);

  // Replay: same initial noise, one posterior-mean application, z = 0 at t=1.
  RngStream s2(314);
  LatentState manual = cond;
  manual.g_h = s2.gaussian(cond.g_h.shape());
  manual.r = s2.gaussian(cond.r.shape());
  manual.t = s2.gaussian(cond.t.shape());
  manual.c = s2.gaussian(cond.c.shape());
  LatentState eps = model.predict_noise(store, manual, {0, 1, 1});
  const double coef = sched.beta_at(1) / std::sqrt(1.0 - sched.alpha_bar_at(1));
  const double inv_sa = 1.0 / std::sqrt(sched.alpha_at(1));
  auto apply = [&](Tensor& x, const Tensor& e) {
    for (int64_t i = 0; i < x.size(); ++i) x[i] = (x[i] - coef * e[i]) * inv_sa;
  };
  apply(manual.g_h, eps.g_h);
  apply(manual.r, eps.r);
  apply(manual.t, eps.t);
  apply(manual.c, eps.c);
  CHECK(state_max_abs_diff(got, manual) < 1e-13);
}

TEST_CASE("analytic Gaussian denoiser drives samples to the data distribution") {
  // For x0 ~ N(mu0, sig0^2) iid per coordinate, the optimal noise prediction is
  // E[eps | x_t] = sqrt(1-abar) (x_t - sqrt(abar) mu0) / (abar sig0^2 + 1 - abar).
  // The sampler is then an affine Gaussian recursion whose exact moments we can
  // propagate and compare against the Monte-Carlo sample.
  DiffusionConfig cfg;
  cfg.n_points = 8;
  cfg.n_local = 2;
  cfg.n_contact = 2;
  cfg.d_g = 2;
  cfg.d_h = 2;
  DiffusionModel probe(cfg);  // validates the config

  const double mu0 = 0.7, sig0 = 1.0;
  NoiseSchedule sched = make_schedule(500, 0.001, 0.05);

  NoisePredictor oracle = [&](const LatentState& s, const TimestepTriple& ts) {
    const int64_t t = ts.t_o;
    const double ab = sched.alpha_bar_at(t);
    const double denom = ab * sig0 * sig0 + 1.0 - ab;
    const double k = std::sqrt(1.0 - ab) / denom;
    LatentState out = s;
    for (Tensor* f : role_fields(out))
      for (int64_t i = 0; i < f->size(); ++i) (*f)[i] = k * ((*f)[i] - std::sqrt(ab) * mu0);
    return out;
  };

  // Exact moment propagation of the same affine recursion.
  double m = 0.0, v = 1.0;
  for (int64_t t = sched.T; t >= 1; --t) {
    const double ab = sched.alpha_bar_at(t);
    const double denom = ab * sig0 * sig0 + 1.0 - ab;
    const double coef = sched.beta_at(t) / std::sqrt(1.0 - ab);
    const double inv_sa = 1.0 / std::sqrt(sched.alpha_at(t));
    const double A = inv_sa * (1.0 - coef * std::sqrt(1.0 - ab) / denom);
    const double B = inv_sa * coef * std::sqrt(1.0 - ab) * std::sqrt(ab) * mu0 / denom;
    m = A * m + B;
    v = A * A * v + (t > 1 ? sched.beta_at(t) : 0.0);
  }
  // The schedule is strong enough that the fixed point sits on the data law.
  CHECK(std::abs(m - mu0) < 0.02);
  CHECK(std::abs(v - sig0 * sig0) < 0.05);

  const int chains = 1000;
  double sum = 0.0, sumsq = 0.0;
  int64_t count = 0;
  for (int k = 0; k < chains; ++k) {
    RngStream stream(9000 + k);
    LatentState out = ancestral_sample(oracle, sched, SampleMode::Joint,
                                       LatentState::zeros(cfg), cfg, stream);
    for (const Tensor* f : role_fields(out))
      for (int64_t i = 0; i < f->size(); ++i) {
        sum += (*f)[i];
        sumsq += (*f)[i] * (*f)[i];
        ++count;
      }
  }
  const double n = static_cast<double>(count);
  const double mc_mean = sum / n;
  const double mc_var = sumsq / n - mc_mean * mc_mean;
  CHECK(std::abs(mc_mean - m) < 0.02);
  CHECK(std::abs(mc_var - v) < 0.05);
}

TEST_CASE("standardizer centers the dataset and round-trips through a checkpoint store") {
  DiffusionConfig cfg = tiny_config();
  RngStream stream(61);
  std::vector<GraspLatents> data;
  for (int i = 0; i < 40; ++i) {
    GraspLatents g;
    g.g_o = stream.gaussian({cfg.d_g});
    for (int64_t j = 0; j < cfg.d_g; ++j) g.g_o[j] = 3.0 * g.g_o[j] + 5.0;
    g.l_o = stream.gaussian({cfg.n_points, 3 + cfg.d_l});
    for (int64_t p = 0; p < cfg.n_points; ++p)
      for (int64_t j = 0; j < 3; ++j) g.l_o.at(p, j) *= 0.05;
    g.g_h = stream.gaussian({cfg.d_h});
    g.r = stream.gaussian({6});
    g.t = stream.uniform_tensor({3}, -0.2, 0.2);
    g.anchors = stream.uniform_tensor({cfg.n_contact, 3}, -0.1, 0.1);
    data.push_back(g);
  }

  Standardizer st = Standardizer::fit(cfg, data);
  CHECK(st.pos_scale == doctest::Approx(0.3));

  // Standardized codes have near-zero mean and unit variance per channel.
  double mean0 = 0.0, var0 = 0.0;
  for (const GraspLatents& g : data) {
    LatentState s = st.standardize(cfg, g);
    mean0 += s.g_o[0];
    var0 += s.g_o[0] * s.g_o[0];
  }
  mean0 /= 40.0;
  var0 = var0 / 40.0 - mean0 * mean0;
  CHECK(std::abs(mean0) < 1e-9);
  CHECK(var0 == doctest::Approx(1.0).epsilon(1e-6));

  // Positions scale by 1/pos_scale.
  LatentState s0 = st.standardize(cfg, data[0]);
  CHECK(s0.l_o.at(3, 1) == doctest::Approx(data[0].l_o.at(3, 1) / 0.3).epsilon(1e-12));
  CHECK(s0.t[2] == doctest::Approx(data[0].t[2] / 0.3).epsilon(1e-12));
  CHECK(s0.c.at(1, 0) == doctest::Approx(data[0].anchors.at(1, 0) / 0.3).epsilon(1e-12));

  // standardize then destandardize is the identity.
  GraspLatents back = st.destandardize(cfg, s0);
  CHECK(std::abs(back.g_o[1] - data[0].g_o[1]) < 1e-12);
  CHECK(std::abs(back.l_o.at(5, 2) - data[0].l_o.at(5, 2)) < 1e-12);
  CHECK(std::abs(back.g_h[3] - data[0].g_h[3]) < 1e-12);
  CHECK(std::abs(back.anchors.at(0, 2) - data[0].anchors.at(0, 2)) < 1e-12);

  // Persisted stats come back identical through a ParamStore.
  ParamStore store;
  st.put(store);
  Standardizer loaded = Standardizer::from_store(store);
  CHECK(loaded.pos_scale == doctest::Approx(st.pos_scale));
  for (int64_t j = 0; j < cfg.d_g; ++j) {
    CHECK(loaded.go_mean[j] == st.go_mean[j]);
    CHECK(loaded.go_std[j] == st.go_std[j]);
  }
  ParamStore empty;
  CHECK_THROWS_AS(Standardizer::from_store(empty), Error);
}
