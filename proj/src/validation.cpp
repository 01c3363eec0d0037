#include "corsearch/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "corsearch/harness.hpp"
#include "corsearch/kernels.hpp"

namespace corsearch::validation {

namespace {

std::string num(double x, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, x);
  return buf;
}

double mean_of(const std::vector<double>& xs) {
  return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

Vec unit(int d, int i) {
  Vec e = Vec::Zero(d);
  e[i] = 1.0;
  return e;
}

Vec random_unit(int d, Rng& rng) {
  Vec g(d);
  do {
    for (int i = 0; i < d; ++i) g[i] = rng.normal();
  } while (g.norm() < 1e-9);
  return g / g.norm();
}

// Uniform point of the unit ball in R^d.
Vec ball_point(int d, Rng& rng) { return sample_ball(Vec::Zero(d), 1.0, Subspace::full(d), rng); }

// ---------------------------------------------------------------------------
// Shared adversarial suite: seeded corpv_known runs with C <= c-bar.

struct SuiteEpoch {
  int run = 0;
  int d = 2;
  int cbar = 1;
  AlgoParams params;
  EpochState before;
  Halfspace cut;
  std::size_t mistakes = 0;
  std::vector<int> scores;
  bool retained = true;
};

struct Suite {
  std::size_t runs = 0;
  std::size_t failed_runs = 0;  // runs where theta* left K at some epoch
  std::size_t errors = 0;       // runs that raised
  std::size_t corruptions = 0;
  std::vector<SuiteEpoch> epochs;
  std::vector<std::string> error_messages;
  double seconds = 0.0;
};

const char* kStrategies[] = {"flip", "front-load", "targeted"};

ExperimentConfig suite_config(int i) {
  ExperimentConfig c;
  c.algorithm = Algorithm::CorpvKnown;
  c.d = i % 2 == 0 ? 2 : 3;
  const int cbar = 1 + (i / 2) % 2;
  c.eps = 0.1;
  c.T = c.d == 2 ? 800 : 1200;
  c.behavior.model = BehaviorModel::Adversarial;
  c.behavior.C = static_cast<std::size_t>(cbar);
  c.behavior.strategy = kStrategies[(i / 4) % 3];
  c.budget = cbar;
  c.seed = 1000 + static_cast<std::uint64_t>(i);
  Rng r = Rng(c.seed).substream("theta");
  c.theta_star = sample_theta(c.d, r);
  return c;
}

Suite run_suite(std::size_t n, std::ostream* log, std::function<void(ExperimentConfig&)> tweak = nullptr) {
  Suite s;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < n; ++i) {
    ExperimentConfig c = suite_config(static_cast<int>(i));
    if (tweak) tweak(c);
    const AlgoParams p = AlgoParams::make(c.d, c.eps, *c.budget);
    const Vec theta = *c.theta_star;
    bool ok = true;
    RunHooks hooks;
    hooks.on_epoch = [&](const EpochEvent& ev) {
      SuiteEpoch e;
      e.run = static_cast<int>(i);
      e.d = c.d;
      e.cbar = *c.budget;
      e.params = p;
      e.before = ev.report->before;
      e.cut = ev.report->cut.cut;
      e.mistakes = ev.report->cut.mistakes;
      e.scores = ev.report->cut.landmark_scores;
      e.retained = ev.after->K.contains(theta);
      ok = ok && e.retained;
      s.epochs.push_back(std::move(e));
    };
    try {
      const RegretTrace tr = run(c, hooks);
      s.corruptions += tr.corruptions;
      ok = ok && tr.theta_retained;
    } catch (const std::exception& e) {
      ++s.errors;
      ok = false;
      s.error_messages.push_back("run " + std::to_string(i) + ": " + e.what());
    }
    if (!ok) ++s.failed_runs;
    ++s.runs;
    if (log && (i + 1) % 25 == 0) *log << "  suite: " << (i + 1) << "/" << n << " runs\n";
  }
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

struct Context {
  Level level;
  std::ostream* log;
  std::optional<Suite> suite;

  const Suite& get_suite() {
    if (!suite) {
      const std::size_t n = level == Level::Full ? 200 : 24;
      if (log) *log << "running the adversarial suite (" << n << " runs)\n";
      suite = run_suite(n, log);
    }
    return *suite;
  }
};

// ---------------------------------------------------------------------------

Check c01_retention(Context& ctx) {
  const Suite& s = ctx.get_suite();
  Check c{1, "theta*-retention under at most c-bar corruptions", false, ""};
  std::size_t bad_epochs = 0;
  for (const auto& e : s.epochs) bad_epochs += e.retained ? 0 : 1;
  c.pass = s.failed_runs == 0 && s.runs > 0;
  c.detail = std::to_string(s.runs - s.failed_runs) + "/" + std::to_string(s.runs) + " runs retained theta* (" +
             std::to_string(s.epochs.size()) + " epochs, " + std::to_string(bad_epochs) + " violating, " +
             std::to_string(s.corruptions) + " corrupted rounds, " + std::to_string(s.errors) + " errors, " +
             num(s.seconds, 3) + " s)";
  if (!s.error_messages.empty()) c.detail += "; first error: " + s.error_messages.front();
  return c;
}

ExperimentConfig fragility_config(Algorithm a) {
  ExperimentConfig c;
  c.algorithm = a;
  c.d = 2;
  c.T = 300;
  c.eps = 0.1;
  c.contexts.kind = "script";
  c.contexts.contexts = {unit(2, 0)};
  c.initial_cuts = {Halfspace(unit(2, 1), 0.0, +1), Halfspace(unit(2, 1), 0.0, -1), Halfspace(unit(2, 0), 0.0, +1)};
  Vec theta(2);
  theta << 0.75, 0.0;
  c.theta_star = theta;
  c.behavior.model = BehaviorModel::Adversarial;
  c.behavior.C = 1;
  c.behavior.strategy = "scripted";
  c.behavior.rounds = {1};
  if (a == Algorithm::CorpvKnown) c.budget = 1;
  c.seed = 42;
  return c;
}

Check c02_fragility(Context&) {
  Check c{2, "baseline fragility vs corpv on one corrupted round", false, ""};
  const Vec theta = *fragility_config(Algorithm::ProjectedVolume).theta_star;
  bool pv_first_cut_drops = false;
  double pv_hi = 0.0;
  RunHooks pv_hooks;
  pv_hooks.on_pv_cut = [&](std::size_t t, const PvState& st) {
    if (t == 1) {
      pv_first_cut_drops = !st.K.contains(theta);
      pv_hi = extent(st.K, unit(2, 0)).second;
    }
  };
  const RegretTrace pv = run(fragility_config(Algorithm::ProjectedVolume), pv_hooks);

  bool corpv_every_epoch = true;
  std::size_t epochs = 0;
  RunHooks cp_hooks;
  cp_hooks.on_epoch = [&](const EpochEvent& ev) {
    ++epochs;
    corpv_every_epoch = corpv_every_epoch && ev.after->K.contains(theta);
  };
  const RegretTrace cp = run(fragility_config(Algorithm::CorpvKnown), cp_hooks);

  c.pass = pv_first_cut_drops && !pv.theta_retained && corpv_every_epoch && cp.theta_retained &&
           pv.corruptions == 1 && cp.corruptions == 1;
  c.detail = "projected_volume: K after round 1 = [0, " + num(pv_hi) + "], theta* " +
             (pv.theta_retained ? "retained" : "eliminated") + ", eps-ball regret " + num(pv.cum_epsball) +
             "; corpv_known(c=1): theta* " + (cp.theta_retained && corpv_every_epoch ? "retained" : "eliminated") +
             " over " + std::to_string(epochs) + " epochs, eps-ball regret " + num(cp.cum_epsball);
  return c;
}

// Centroid of Cyl(K, S) to within tol. A full-dimensional body is sampled
// by independent rejection from its bounding box, which is cheaper than the
// Markov chain at this accuracy; otherwise the midpoint construction is exact
// or already i.i.d.
Vec oracle_centroid(const EpochState& s, Rng rng, double tol) {
  if (s.S().size() > 0) {
    CentroidOptions opt;
    opt.policy = ExecPolicy::Serial;
    opt.max_samples = 20'000'000;
    return approx_centroid(s.K, s.S(), rng, tol, opt);
  }
  const int d = s.K.dim();
  Vec lo(d), hi(d);
  for (int i = 0; i < d; ++i) std::tie(lo[i], hi[i]) = extent(s.K, unit(d, i));
  kernels::Moments m(d);
  Vec p(d);
  while (m.count < 1000 || m.std_error() > tol / 3.0) {
    for (int k = 0; k < 4096; ++k) {
      for (int i = 0; i < d; ++i) p[i] = rng.uniform(lo[i], hi[i]);
      if (p.norm() > 1.0 || !s.K.contains(p, 0.0)) continue;
      m.sum += p;
      m.sumsq += p.cwiseProduct(p);
      ++m.count;
    }
  }
  return m.mean();
}

Check c03_cut_geometry(Context& ctx) {
  const Suite& s = ctx.get_suite();
  Check c{3, "separating cut passes near the centroid", false, ""};
  std::size_t bad_k = 0, bad_star = 0, n = 0;
  double worst_k = 0.0, worst_star = 0.0;
  for (const auto& e : s.epochs) {
    const double nh = e.params.nu_hi;
    const double dk = std::abs(e.cut.signed_distance(e.before.kappa)) / nh;
    const Vec kstar = oracle_centroid(e.before, Rng(7000 + n).substream("oracle-centroid"), nh / 10.0);
    const double ds = std::abs(e.cut.signed_distance(kstar)) / nh;
    worst_k = std::max(worst_k, dk);
    worst_star = std::max(worst_star, ds);
    bad_k += dk <= 2.0 ? 0 : 1;
    bad_star += ds <= 3.0 ? 0 : 1;
    ++n;
  }
  c.pass = n > 0 && bad_k == 0 && bad_star == 0;
  c.detail = std::to_string(n) + " epochs; max dist(kappa, cut) = " + num(worst_k) + " nu_hi (bound 2), max dist(kappa*, cut) = " +
             num(worst_star) + " nu_hi (bound 3); violations " + std::to_string(bad_k) + "/" + std::to_string(bad_star);
  return c;
}

Check c04_volume(Context& ctx) {
  Check c{4, "per-epoch volume progress on d=2", false, ""};
  const bool full = ctx.level == Level::Full;
  const std::size_t seeds = full ? 10 : 2;
  const std::size_t samples = full ? 1'000'000 : 100'000;
  const double bound = 1.0 - 1.0 / (2.0 * std::exp(2.0));
  std::size_t n = 0, bad = 0;
  double worst = 0.0, sum = 0.0;
  for (std::size_t k = 0; k < seeds; ++k) {
    ExperimentConfig cfg;
    cfg.algorithm = Algorithm::CorpvKnown;
    cfg.d = 2;
    cfg.T = 600;
    cfg.eps = 0.1;
    cfg.budget = 1;
    cfg.seed = 5000 + k;
    RunHooks hooks;
    hooks.on_epoch = [&](const EpochEvent& ev) {
      const EpochState& b = ev.report->before;
      const Subspace& L = b.L();
      const Rng r = Rng(cfg.seed).substream("volume", ev.report->phi);
      const VolumeEstimate v0 = mc_volume(b.K, L, r.substream("before"), samples);
      const VolumeEstimate v1 = mc_volume(ev.after->K, L, r.substream("after"), samples);
      if (!(v0.value > 0.0)) return;
      const double ratio = v1.value / v0.value;
      const double se = ratio * std::hypot(v0.std_error / v0.value, v1.value > 0 ? v1.std_error / v1.value : 0.0);
      ++n;
      sum += ratio;
      worst = std::max(worst, ratio);
      if (ratio > bound + 3.0 * se) ++bad;
    };
    run(cfg, hooks);
  }
  c.pass = n > 0 && bad == 0;
  c.detail = std::to_string(n) + " epochs, mean ratio " + num(n ? sum / n : 0.0) + ", max ratio " + num(worst) +
             " vs bound " + num(bound) + " (+3 s.e.); " + std::to_string(bad) + " epochs above";
  return c;
}

Check c05_pigeonhole(Context& ctx) {
  const Suite& s = ctx.get_suite();
  Check c{5, "landmark pigeonhole and Caratheodory bound", false, ""};
  std::size_t pig_bad = 0, cara_bad = 0, cara_checked = 0, combos = 0;
  int min_max_score = 1 << 30;
  std::map<int, int> first_epoch_of_run;
  for (std::size_t i = 0; i < s.epochs.size(); ++i) {
    const auto& e = s.epochs[i];
    const int best = e.scores.empty() ? 0 : *std::max_element(e.scores.begin(), e.scores.end());
    min_max_score = std::min(min_max_score, best);
    if (best < e.params.pigeonhole_level()) ++pig_bad;

    // Caratheodory on a subset of epochs.
    if (i % (ctx.level == Level::Full ? 5 : 10) != 0) continue;
    ++cara_checked;
    Rng rng = Rng(9000 + i).substream("caratheodory");
    std::vector<Vec> pool;
    for (int tries = 0; tries < 200000 && pool.size() < 400; ++tries) {
      const Vec p = ball_point(e.d, rng);
      if (e.before.K.contains(p) && undesirability(p, e.params.nu, e.before) <= e.cbar) pool.push_back(p);
    }
    if (pool.empty()) continue;
    for (int k = 0; k < 200; ++k) {
      const int m = 1 + static_cast<int>(rng.below(static_cast<std::size_t>(e.d + 1)));
      Vec comb = Vec::Zero(e.d);
      double wsum = 0.0;
      for (int j = 0; j < m; ++j) {
        const double w = -std::log(1.0 - rng.uniform());
        comb += w * pool[rng.below(pool.size())];
        wsum += w;
      }
      comb /= wsum;
      ++combos;
      if (undesirability(comb, e.params.nu, e.before) > e.cbar * (e.d + 1)) ++cara_bad;
    }
  }
  c.pass = !s.epochs.empty() && pig_bad == 0 && cara_bad == 0;
  c.detail = "pigeonhole: " + std::to_string(s.epochs.size() - pig_bad) + "/" + std::to_string(s.epochs.size()) +
             " epochs have a landmark at level c(d+1)+1 (lowest best score " + std::to_string(min_max_score) +
             "); Caratheodory: " + std::to_string(combos - cara_bad) + "/" + std::to_string(combos) +
             " combinations within c(d+1) over " + std::to_string(cara_checked) + " epochs";
  return c;
}

Check c06_mistakes(Context& ctx) {
  const Suite& s = ctx.get_suite();
  Check c{6, "Perceptron mistake cap", false, ""};
  std::size_t bad = 0, worst = 0;
  double cap = 0.0;
  for (const auto& e : s.epochs) {
    worst = std::max(worst, e.mistakes);
    cap = e.params.mistake_cap;
    if (static_cast<double>(e.mistakes) > e.params.mistake_cap) ++bad;
  }
  c.pass = !s.epochs.empty() && bad == 0;
  c.detail = "max mistakes " + std::to_string(worst) + " over " + std::to_string(s.epochs.size()) +
             " accepting runs (cap " + num(cap, 6) + " for eps=0.1)";
  return c;
}

Check c07_cap_mass(Context&) {
  Check c{7, "cap-sampling mass", true, ""};
  for (int d : {2, 3, 5}) {
    Rng rng = Rng(70 + d).substream("cap");
    const Vec h = random_unit(d, rng);
    const double radius = AlgoParams::make(d, 0.1, 1).zeta;
    const double thr = radius * std::log(1.5) / std::sqrt(d - 1.0);
    const int n = 100000;
    int hits = 0;
    for (int k = 0; k < n; ++k)
      if (h.dot(sample_ball(Vec::Zero(d), radius, Subspace::full(d), rng)) >= thr) ++hits;
    const double p = static_cast<double>(hits) / n;
    const double se = std::sqrt(p * (1 - p) / n);
    const double lb = 1.0 / (20.0 * std::sqrt(d - 1.0));
    c.pass = c.pass && p >= lb - 3 * se;
    c.detail += (c.detail.empty() ? "" : ", ") + std::string("d=") + std::to_string(d) + ": " + num(p) +
                " >= " + num(lb);
  }
  return c;
}

// Exploit along every direction of a dense grid of the orthant (d = 2).
bool finished(const CorpvKnown& a) {
  const AlgoParams& p = a.params();
  for (int k = 0; k <= 180; ++k) {
    const double ang = (std::acos(-1.0) / 2.0) * k / 180.0;
    Vec x(2);
    x << std::cos(ang), std::sin(ang);
    if (a.state().L().size() > 0 && cyl_width(a.state(), x) > p.eps) return false;
  }
  return true;
}

Check c08_epochs(Context& ctx) {
  Check c{8, "epoch count until every width is at most eps", false, ""};
  const int d = 2;
  const double eps = 0.1;
  const double bound = 4.0 * d * std::log(d / eps) / std::log(1.0 / (1.0 - 1.0 / (2.0 * std::exp(2.0))));
  const std::size_t seeds = ctx.level == Level::Full ? 20 : 5;
  std::size_t ok = 0, worst = 0;
  for (std::size_t k = 0; k < seeds; ++k) {
    const Rng root(8000 + k);
    Rng tr = root.substream("theta");
    const Vec theta = sample_theta(d, tr);
    CorpvKnown algo(AlgoParams::make(d, eps, 1), LossKind::eps_ball(eps), NoiseModel::none(), root.substream("algorithm"));
    auto ctxs = make_uniform_sphere(d, root.substream("contexts"));
    std::size_t t = 0;
    bool done = finished(algo);
    while (!done && t < 200000 && static_cast<double>(algo.epochs_completed()) <= bound) {
      ++t;
      const Vec x = ctxs->next();
      const QueryDecision q = algo.query(x);
      if (q.branch != Branch::Explore) continue;
      if (algo.update(x, q, feedback(x.dot(theta), q.omega), t)) done = finished(algo);
    }
    worst = std::max(worst, algo.epochs_completed());
    if (done && static_cast<double>(algo.epochs_completed()) <= bound) ++ok;
  }
  c.pass = ok == seeds;
  c.detail = std::to_string(ok) + "/" + std::to_string(seeds) + " runs finished; max epochs " + std::to_string(worst) +
             " vs budget " + num(bound);
  return c;
}

Check c09_gd(Context& ctx) {
  Check c{9, "gradient descent scaling and corruption additivity", false, ""};
  const std::size_t seeds = ctx.level == Level::Full ? 20 : 5;
  const std::size_t T = 2500;
  const std::size_t C = 200;
  std::vector<double> r1, r4, excess, allowed;
  for (std::size_t k = 0; k < seeds; ++k) {
    ExperimentConfig cfg;
    cfg.algorithm = Algorithm::Gd;
    cfg.d = 2;
    cfg.eps = 0.1;
    cfg.loss = LossType::Absolute;
    cfg.seed = 9100 + k;
    cfg.T = T;
    const RegretTrace a = run(cfg);
    cfg.T = 4 * T;
    const RegretTrace b = run(cfg);
    cfg.T = T;
    cfg.behavior.model = BehaviorModel::Adversarial;
    cfg.behavior.C = C;
    cfg.behavior.strategy = "flip";
    const RegretTrace cr = run(cfg);
    r1.push_back(a.cum_abs);
    r4.push_back(b.cum_abs);
    excess.push_back(cr.cum_abs - a.cum_abs);
    allowed.push_back(2.0 * static_cast<double>(C) + a.cum_abs);
  }
  const double ratio = mean_of(r4) / mean_of(r1);
  const double ex = mean_of(excess), al = mean_of(allowed);
  c.pass = ratio <= 2.5 && ex <= al;
  c.detail = "regret(4T)/regret(T) = " + num(ratio) + " (<= 2.5; R(T) = " + num(mean_of(r1)) + "), excess with C=" +
             std::to_string(C) + " = " + num(ex) + " (<= 2C + R(T) = " + num(al) + "), max per-seed excess " +
             num(*std::max_element(excess.begin(), excess.end()));
  return c;
}

Check c10_ai(Context& ctx) {
  Check c{10, "corpv_ai degrades gracefully with C", false, ""};
  const bool full = ctx.level == Level::Full;
  SweepSpec s;
  s.base.algorithm = Algorithm::CorpvAi;
  s.base.d = 2;
  s.base.T = full ? 8192 : 2048;
  s.base.eps = 0.1;
  s.base.beta = 0.1;
  s.base.behavior.model = BehaviorModel::Adversarial;
  s.base.behavior.strategy = "flip";
  s.C = {0, 10, 50, 100};
  s.d = {2};
  s.eps = {0.1};
  s.algorithms = {Algorithm::CorpvAi};
  const std::size_t seeds = full ? 20 : 3;
  for (std::size_t k = 0; k < seeds; ++k) s.seeds.push_back(10000 + k);
  const auto rows = sweep(s);

  std::vector<double> known;
  for (std::uint64_t seed : s.seeds) {
    ExperimentConfig cfg = s.base;
    cfg.algorithm = Algorithm::CorpvKnown;
    cfg.behavior.model = BehaviorModel::FullyRational;
    cfg.behavior.C = 0;
    cfg.budget = agnostic_budget(cfg.T, cfg.beta);
    cfg.seed = seed;
    known.push_back(run(cfg).cum_epsball);
  }
  bool mono = true;
  std::size_t failures = 0;
  std::string means;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    failures += rows[i].failures;
    if (i > 0 && rows[i].mean_epsball < rows[i - 1].mean_epsball) mono = false;
    means += (i ? ", " : "") + std::string("C=") + std::to_string(rows[i].C) + ": " + num(rows[i].mean_epsball);
  }
  const double k0 = mean_of(known);
  const double a0 = rows.front().mean_epsball;
  c.pass = mono && failures == 0 && a0 <= 2.0 * k0;
  c.detail = "mean eps-ball regret " + means + (mono ? " (nondecreasing)" : " (NOT monotone)") +
             "; C=0 ratio to corpv_known(c=" + std::to_string(agnostic_budget(s.base.T, s.base.beta)) + ") = " +
             num(k0 > 0 ? a0 / k0 : 0.0) + " (<= 2), failed runs " + std::to_string(failures);
  return c;
}

Check c11_layers(Context& ctx) {
  Check c{11, "per-layer corruption count", false, ""};
  const std::size_t T = 8192, C = 100, runs = ctx.level == Level::Full ? 500 : 100;
  const double beta = 0.1;
  const int J = num_layers(T);
  const int jmin = static_cast<int>(std::ceil(std::log2(static_cast<double>(C))));
  const double cap = std::log(1.0 / beta) + 3.0;
  std::vector<std::size_t> within(static_cast<std::size_t>(J + 1), 0);
  for (std::size_t r = 0; r < runs; ++r) {
    // The same streams the harness uses for a corpv_ai run with a flip adversary.
    const Rng root(11000 + r);
    Rng sampler = root.substream("algorithm").substream("layer-sampler");
    auto flip = make_flip(C, T, root.substream("corruption"));
    std::vector<int> layer(T);
    std::vector<bool> corrupted(T);
    for (std::size_t t = 1; t <= T; ++t) {
      layer[t - 1] = sample_layer(sampler, T);
      corrupted[t - 1] = flip->corrupt(RoundInfo{t, Branch::Explore, layer[t - 1], 0.5}, Vec(), 0.7).has_value();
    }
    const auto counts = corruption_tolerance_audit(layer, corrupted, J);
    for (int j = jmin; j <= J; ++j)
      if (static_cast<double>(counts[j - 1]) <= cap) ++within[j];
  }
  double worst = 1.0;
  for (int j = jmin; j <= J; ++j) worst = std::min(worst, static_cast<double>(within[j]) / runs);
  c.pass = worst >= 1.0 - beta;
  c.detail = "layers " + std::to_string(jmin) + ".." + std::to_string(J) + ": min fraction of " +
             std::to_string(runs) + " runs with count <= ln(1/beta)+3 = " + num(cap) + " is " + num(worst) +
             " (>= " + num(1.0 - beta) + ")";
  return c;
}

Check c12_bounded(Context& ctx) {
  Check c{12, "bounded rationality below the noise threshold", false, ""};
  const int d = 2;
  const double eps = 0.1;
  const std::size_t T = 1000;
  const double thr = eps / (8.0 * std::sqrt(2.0 * d) * (std::sqrt(d) + 1.0) * std::log(static_cast<double>(T)));
  const std::size_t runs = ctx.level == Level::Full ? 50 : 8;
  auto make = [&](std::size_t k, double sigma) {
    ExperimentConfig cfg;
    cfg.algorithm = Algorithm::CorpvKnown;
    cfg.d = d;
    cfg.eps = eps;
    cfg.T = T;
    cfg.loss = LossType::Pricing;
    cfg.behavior.model = BehaviorModel::Bounded;
    cfg.behavior.sigma = sigma;
    cfg.budget = 1;
    cfg.seed = 12000 + k;
    return cfg;
  };
  std::size_t retained = 0, finite = 0;
  double max_pseudo = 0.0;
  for (std::size_t k = 0; k < runs; ++k) {
    const ExperimentConfig cfg = make(k, thr / 2.0);
    bool every = true;
    RegretTrace tr;
    RunHooks hooks;
    Vec theta;
    hooks.on_epoch = [&](const EpochEvent& ev) { every = every && ev.after->K.contains(theta); };
    {
      Rng r = Rng(cfg.seed).substream("theta");
      theta = sample_theta(d, r);
    }
    tr = run(cfg, hooks);
    if (every && tr.theta_retained) ++retained;
    const double cp = tr.pseudo.empty() ? 0.0 : tr.pseudo.back().cum_pseudo;
    if (std::isfinite(cp) && tr.pseudo.size() == T) ++finite;
    max_pseudo = std::max(max_pseudo, cp);
  }
  // Negative control far above the threshold: the margin cannot absorb the
  // noise, so the run goes without one.
  std::size_t ctrl_retained = 0;
  const std::size_t ctrl_runs = ctx.level == Level::Full ? 20 : 4;
  for (std::size_t k = 0; k < ctrl_runs; ++k) {
    ExperimentConfig cfg = make(k, 20.0 * thr);
    cfg.margin_override = 0.0;
    try {
      if (run(cfg).theta_retained) ++ctrl_retained;
    } catch (const std::exception&) {
    }
  }
  c.pass = retained == runs && finite == runs;
  c.detail = "sigma = " + num(thr / 2.0) + ": theta* retained in " + std::to_string(retained) + "/" +
             std::to_string(runs) + ", finite pseudo-regret in " + std::to_string(finite) + "/" + std::to_string(runs) +
             " (max cumulative " + num(max_pseudo) + "); negative control sigma = " + num(20.0 * thr) + ": " +
             std::to_string(ctrl_retained) + "/" + std::to_string(ctrl_runs) + " retained (allowed to fail)";
  return c;
}

EpochState ball_state(int d) {
  EpochState s;
  s.K = KnowledgeSet(d);
  s.split.small = Subspace::none(d);
  s.split.large = Subspace::full(d);
  s.kappa = Vec::Zero(d);
  return s;
}

// Some recorded line has its whole violating side at (margin-free)
// undesirability >= c+1, audited on a lattice of the disk.
bool has_proper_cut(const EpochState& s, int cbar) {
  const int n = 201;
  std::vector<Vec> pts;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Vec p(2);
      p << -1.0 + 2.0 * i / (n - 1), -1.0 + 2.0 * j / (n - 1);
      if (p.norm() > 1.0) continue;
      bool near = false;
      for (const auto& r : s.records) near = near || std::abs(r.direction.dot(p - s.kappa)) < 1e-9;
      if (!near) pts.push_back(p);
    }
  for (std::size_t t = 0; t < s.records.size(); ++t) {
    bool all = true;
    for (const auto& p : pts) {
      if (s.records[t].direction.dot(p - s.kappa) >= 0.0) continue;
      int u = 0;
      for (const auto& r : s.records) u += r.direction.dot(p - s.kappa) < 0.0 ? 1 : 0;
      if (u < cbar + 1) {
        all = false;
        break;
      }
    }
    if (all) return true;
  }
  return false;
}

Check c13_appendix(Context& ctx) {
  Check c{13, "proper cut in 2-D, improper cut in the 3-D cone", false, ""};
  // 2-D: 3c+1 uncorrupted rounds with distinct contexts.
  const std::size_t seeds = ctx.level == Level::Full ? 50 : 10;
  std::size_t ok2 = 0, total2 = 0;
  for (int cbar : {1, 2}) {
    const AlgoParams p = AlgoParams::make(2, 0.1, cbar);
    for (std::size_t k = 0; k < seeds; ++k) {
      Rng rng = Rng(13000 + k).substream("appendix-2d", static_cast<std::uint64_t>(cbar));
      EpochState s = ball_state(2);
      const Vec theta = 0.9 * ball_point(2, rng);
      for (int t = 0; t < 3 * cbar + 1; ++t) {
        const Vec x = random_unit(2, rng);
        record_explore(s, p, x, 0.0, feedback(x.dot(theta), 0.0), static_cast<std::size_t>(t + 1));
      }
      ++total2;
      if (has_proper_cut(s, cbar)) ++ok2;
    }
  }
  // 3-D cone: every recorded plane borders a region violated by that record
  // alone (margin-free count, as in the 2-D audit), yet a certified cut exists.
  const int cbar = 1;
  AlgoParams p = AlgoParams::make(3, 0.1, cbar);
  p.policy = ExecPolicy::Serial;
  const auto xs = cone_contexts(3, p.tau, Vec::Zero(3), 0.95);
  EpochState s = ball_state(3);
  Vec theta(3);
  theta << 0.0, 0.0, 0.5;
  bool ended = false;
  for (std::size_t t = 0; t < xs.size(); ++t)
    ended = record_explore(s, p, xs[t], 0.0, feedback(xs[t].dot(theta), 0.0), t + 1);
  std::size_t low_regions = 0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    std::vector<Halfspace> cuts;
    for (std::size_t r = 0; r < xs.size(); ++r)
      if (r != t) cuts.emplace_back(s.records[r].direction, 0.0, +1);
    cuts.emplace_back(s.records[t].direction, -1e-6, -1);
    Vec w;
    if (!feasible(cuts, {}, &w)) continue;
    int u = 0;
    for (const auto& r : s.records) u += r.direction.dot(w - s.kappa) < 0.0 ? 1 : 0;
    if (u <= cbar) ++low_regions;
  }
  bool cut_ok = false;
  double dist = 0.0, max_cos = 0.0;
  try {
    const CutResult res = separating_cut(s, p, Rng(1313));
    ConvexRegion below = s.K.region();
    below.add(res.cut.flipped());
    const bool certified = !find_violation_enumerate(below, s, p, p.nu, ExecPolicy::Serial).has_value();
    dist = std::abs(res.cut.signed_distance(s.kappa)) / p.nu_hi;
    for (const auto& r : s.records) max_cos = std::max(max_cos, std::abs(r.direction.dot(res.cut.normal)));
    cut_ok = certified && dist <= 2.0 && max_cos < 1.0 - 1e-6 && res.cut.contains(theta);
  } catch (const std::exception&) {
    cut_ok = false;
  }
  c.pass = ok2 == total2 && ended && low_regions == xs.size() && cut_ok;
  c.detail = "2-D: " + std::to_string(ok2) + "/" + std::to_string(total2) + " record sets have a proper cut; cone (n=" +
             std::to_string(xs.size()) + "): " + std::to_string(low_regions) +
             " hyperplanes border a region of undesirability <= c, separating cut " +
             (cut_ok ? "certified" : "NOT certified") + " (dist " + num(dist) + " nu_hi, max |cos| to a record " +
             num(max_cos) + ")";
  return c;
}

Check c14_determinism(Context&) {
  Check c{14, "byte-identical traces for identical config and seed", true, ""};
  std::vector<ExperimentConfig> cfgs;
  {
    ExperimentConfig a;
    a.algorithm = Algorithm::CorpvKnown;
    a.T = 600;
    a.behavior.model = BehaviorModel::Adversarial;
    a.behavior.C = 2;
    a.budget = 2;
    a.seed = 14;
    cfgs.push_back(a);
    ExperimentConfig b = a;
    b.algorithm = Algorithm::CorpvAi;
    b.budget.reset();
    b.T = 1024;
    cfgs.push_back(b);
    ExperimentConfig g;
    g.algorithm = Algorithm::Gd;
    g.loss = LossType::Absolute;
    g.T = 1000;
    g.seed = 15;
    cfgs.push_back(g);
    ExperimentConfig pv;
    pv.algorithm = Algorithm::ProjectedVolume;
    pv.T = 300;
    pv.seed = 16;
    cfgs.push_back(pv);
  }
  for (const auto& cfg : cfgs) {
    std::ostringstream x, y;
    write_csv(run(cfg), x);
    write_csv(run(cfg), y);
    const bool same = x.str() == y.str() && x.str().size() > std::string(kTraceHeader).size() + 1;
    c.pass = c.pass && same;
    c.detail += (c.detail.empty() ? "" : ", ") + to_string(cfg.algorithm) + (same ? " identical" : " DIFFERS") + " (" +
                std::to_string(x.str().size()) + " bytes)";
  }
  return c;
}

}  // namespace

std::vector<Check> run_battery(Level level, std::ostream* log, const std::vector<int>& only) {
  using Fn = Check (*)(Context&);
  static const Fn table[kCriteria] = {c01_retention, c02_fragility, c03_cut_geometry, c04_volume, c05_pigeonhole,
                                      c06_mistakes,  c07_cap_mass,  c08_epochs,       c09_gd,     c10_ai,
                                      c11_layers,    c12_bounded,   c13_appendix,     c14_determinism};
  Context ctx{level, log, std::nullopt};
  std::vector<Check> out;
  for (int id = 1; id <= kCriteria; ++id) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Check c;
    try {
      c = table[id - 1](ctx);
    } catch (const std::exception& e) {
      c = Check{id, "criterion " + std::to_string(id), false, std::string("raised: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (log) *log << "criterion " << id << " done in " << num(secs, 3) << " s\n";
    out.push_back(std::move(c));
  }
  return out;
}

std::string format(const Check& c) {
  char id[8];
  std::snprintf(id, sizeof id, "%02d", c.id);
  return std::string(c.pass ? "PASS " : "FAIL ") + id + " " + c.name + ": " + c.detail;
}

}  // namespace corsearch::validation
