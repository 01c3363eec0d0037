#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "corsearch/behaviors.hpp"
#include "corsearch/corpv.hpp"

using namespace corsearch;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Vec random_unit(int d, Rng& rng) {
  Vec v(d);
  for (int i = 0; i < d; ++i) v[i] = rng.normal();
  return v / v.norm();
}

Vec ball_point(int d, Rng& rng) {
  return random_unit(d, rng) * std::pow(rng.uniform(), 1.0 / d);
}

EpochState ball_state(int d) {
  EpochState s;
  s.K = KnowledgeSet(d);
  s.split.small = Subspace::none(d);
  s.split.large = Subspace::full(d);
  s.kappa = Vec::Zero(d);
  return s;
}

// Number of records whose margin row a.x <= b fails at p.
int rows_violated(const EpochState& s, const Vec& p, double nu) {
  int u = 0;
  for (const auto& r : s.records) {
    const auto [a, b] = record_row(r, s.kappa, nu);
    if (a.dot(p) > b + 1e-9) ++u;
  }
  return u;
}

// Records n clean explore rounds against theta at the current centroid.
void fill_records(EpochState& s, const AlgoParams& p, const Vec& theta, int n, Rng& rng, bool orthant = false) {
  for (int t = 0; t < n; ++t) {
    Vec x = random_unit(p.d, rng);
    if (orthant) x = x.cwiseAbs();
    const double w = x.dot(s.kappa);
    record_explore(s, p, x, w, feedback(x.dot(theta), w), static_cast<std::size_t>(t + 1));
  }
}

struct Played {
  std::size_t epochs = 0;
  bool retained = true;
};

// Drives a corpv learner against nature for T rounds.
Played play(CorpvKnown& a, Nature& nat, ContextSource& ctx, std::size_t T) {
  Played out;
  for (std::size_t t = 1; t <= T; ++t) {
    const Vec x = ctx.next();
    const auto q = a.query(x);
    const auto pv = nat.perceived_value(x, {t, q.branch, 0, q.omega});
    if (a.update(x, q, feedback(pv.vtilde, q.omega), t)) ++out.epochs;
  }
  out.retained = a.state().K.contains(nat.theta_star());
  return out;
}

}  // namespace

TEST_CASE("parameters for d = 2, eps = 0.1") {
  const auto p = AlgoParams::make(2, 0.1, 1);
  CHECK(p.delta == doctest::Approx(0.1 / (4 * (2 + std::sqrt(2.0)))));
  CHECK(p.nu_hi == doctest::Approx(0.01402).epsilon(1e-3));
  CHECK(p.nu == doctest::Approx(0.01219).epsilon(1e-3));
  CHECK(p.nu_lo < p.nu);
  CHECK(p.nu < p.nu_hi);
  CHECK(p.zeta == p.nu_hi);
  CHECK(p.tau == 13);
  CHECK(p.pigeonhole_level() == 4);
  CHECK(AlgoParams::make(3, 0.1, 2).tau == 49);
  CHECK(AlgoParams::make(3, 0.1, 0).tau == 1);
  const auto q = AlgoParams::make(2, 0.1, 1);
  CHECK(q.mistake_cap == doctest::Approx(1.0 / (q.zeta * q.zeta * std::log(1.5) * std::log(1.5))));
}

TEST_CASE("parameter validation") {
  CHECK_THROWS(AlgoParams::make(0, 0.1, 1));
  CHECK_THROWS(AlgoParams::make(2, 0.0, 1));
  CHECK_THROWS(AlgoParams::make(2, 0.1, -1));
  CHECK_THROWS(AlgoParams::make(2, 0.1, 1, 1.0));
  CHECK(AlgoParams::make(2, 0.1, 1, 0.001).nu_lo == doctest::Approx(AlgoParams::make(2, 0.1, 1).nu_lo + 0.001));
}

TEST_CASE("records normalize the sign into the direction") {
  const auto p = AlgoParams::make(2, 0.1, 1);
  EpochState s = ball_state(2);
  const Vec x = v2(0.6, 0.8);
  record_explore(s, p, x, 0.3, -1, 1);
  record_explore(s, p, x, 0.3, +1, 2);
  CHECK(s.records[0].sign == -1);
  CHECK((s.records[0].direction + x).norm() < 1e-15);
  CHECK(s.records[0].intercept == doctest::Approx(-0.3));
  CHECK((s.records[1].direction - x).norm() < 1e-15);
  CHECK(s.records[1].scale == doctest::Approx(1.0));
  CHECK_THROWS(record_explore(s, p, x, 0.3, 0, 3));
}

TEST_CASE("records keep the unnormalized length of the large projection") {
  const auto p = AlgoParams::make(2, 0.1, 1);
  EpochState s = ball_state(2);
  s.split.small = Subspace(Mat(Vec::Unit(2, 0)));
  s.split.large = Subspace(Mat(Vec::Unit(2, 1)));
  record_explore(s, p, v2(0.6, 0.8), 0.0, +1, 1);
  CHECK(s.records[0].scale == doctest::Approx(0.8));
  CHECK((s.records[0].direction - v2(0, 1)).norm() < 1e-15);
  CHECK_THROWS_AS(record_explore(s, p, v2(1, 0), 0.0, +1, 2), std::domain_error);
}

TEST_CASE("epoch ends exactly at tau records") {
  const auto p = AlgoParams::make(2, 0.1, 1);
  EpochState s = ball_state(2);
  Rng rng(1);
  for (int t = 1; t < p.tau; ++t) CHECK_FALSE(record_explore(s, p, random_unit(2, rng), 0.0, 1, t));
  CHECK(record_explore(s, p, random_unit(2, rng), 0.0, 1, p.tau));
}

TEST_CASE("undesirability examples") {
  const auto p = AlgoParams::make(2, 0.1, 1);
  EpochState s = ball_state(2);
  // "value >= 0 along e1", "value <= 0 along e2", "value >= 0 along e2".
  record_explore(s, p, v2(1, 0), 0.0, +1, 1);
  record_explore(s, p, v2(0, 1), 0.0, -1, 2);
  record_explore(s, p, v2(0, 1), 0.0, +1, 3);
  CHECK(undesirability(v2(0.5, 0.0), 0.0, s) == 0);
  CHECK(undesirability(v2(0.5, 0.5), 0.0, s) == 1);
  CHECK(undesirability(v2(-0.5, 0.5), 0.0, s) == 2);
  CHECK(undesirability(v2(-0.5, -0.5), 0.0, s) == 2);
  // A margin forgives points within nu of a line.
  CHECK(undesirability(v2(-0.01, 0.0), 0.0, s) == 1);
  CHECK(undesirability(v2(-0.01, 0.0), p.nu, s) == 0);
  // Scale multiplies the inner product and not the margin.
  s.records[0].scale = 0.5;
  CHECK(undesirability(v2(-0.03, 0.0), 0.02, s) == 0);
  CHECK(undesirability(v2(-0.05, 0.0), 0.02, s) == 1);
}

TEST_CASE("record rows agree with undesirability") {
  const auto p = AlgoParams::make(2, 0.1, 2);
  Rng rng(2);
  EpochState s = ball_state(2);
  s.kappa = v2(0.1, -0.2);
  fill_records(s, p, v2(0.3, 0.3), 20, rng);
  for (auto& r : s.records) r.scale = rng.uniform(0.2, 1.0);
  for (int k = 0; k < 2000; ++k) {
    const Vec q = ball_point(2, rng);
    CHECK(rows_violated(s, q, p.nu) == undesirability(q, p.nu, s));
  }
}

TEST_CASE("landmarks sit at distance nu_hi along each large direction") {
  const auto p = AlgoParams::make(3, 0.1, 1);
  EpochState s = ball_state(3);
  s.kappa = Vec::Constant(3, 0.1);
  const auto lm = landmarks(s, p);
  REQUIRE(lm.size() == 6);
  for (const auto& l : lm) CHECK((l - s.kappa).norm() == doctest::Approx(p.nu_hi));
}

TEST_CASE("branch and bound agrees with enumeration") {
  Rng rng(3);
  std::size_t found = 0, none = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int d = 2 + trial % 2;
    const int cbar = 1 + (trial / 2) % 3;
    const auto p = AlgoParams::make(d, 0.1, cbar);
    EpochState s = ball_state(d);
    const Vec theta = 0.8 * ball_point(d, rng);
    fill_records(s, p, theta, 8 + trial % 7, rng);
    // Corrupt a few records so that the violation problem is nontrivial.
    for (int k = 0; k < trial % 4; ++k) {
      auto& r = s.records[rng.below(s.records.size())];
      r.direction = -r.direction;
    }
    ConvexRegion base = s.K.region();
    const Vec h = random_unit(d, rng);
    base.add(h, rng.uniform(-0.5, 0.2));
    const auto e = find_violation_enumerate(base, s, p, p.nu, ExecPolicy::Serial);
    const auto b = find_violation_branch_bound(base, s, p, p.nu);
    CHECK(e.has_value() == b.has_value());
    for (const auto& z : {e, b}) {
      if (!z) continue;
      CHECK(base.contains(*z, 1e-7));
      CHECK(rows_violated(s, *z, p.nu) <= cbar);
    }
    (e ? found : none)++;
  }
  // Both outcomes are exercised.
  CHECK(found > 5);
  CHECK(none > 5);
}

TEST_CASE("parallel and serial enumeration agree") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = AlgoParams::make(2, 0.1, 2);
    EpochState s = ball_state(2);
    fill_records(s, p, 0.7 * ball_point(2, rng), 12, rng);
    ConvexRegion base = s.K.region();
    base.add(random_unit(2, rng), rng.uniform(-0.3, 0.1));
    const auto a = find_violation_enumerate(base, s, p, p.nu, ExecPolicy::Serial);
    const auto b = find_violation_enumerate(base, s, p, p.nu, ExecPolicy::Parallel);
    REQUIRE(a.has_value() == b.has_value());
    if (a) CHECK((*a - *b).norm() == 0.0);
  }
}

TEST_CASE("no violation exists when every point of the base is heavily undesirable") {
  const auto p = AlgoParams::make(2, 0.1, 1);
  EpochState s = ball_state(2);
  for (int t = 0; t < 3; ++t) record_explore(s, p, v2(1, 0), 0.0, +1, t + 1);
  ConvexRegion left = s.K.region();
  left.add(v2(1, 0), -0.1);  // x <= -0.1: all three rows fail there
  CHECK_FALSE(find_violation(left, s, p, p.nu).has_value());
  ConvexRegion right = s.K.region();
  right.add(v2(-1, 0), -0.1);  // x >= 0.1
  CHECK(find_violation(right, s, p, p.nu).has_value());
}

TEST_CASE("clean cut: lattice audit keeps every consistent point and theta*") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    auto p = AlgoParams::make(2, 0.1, 0);
    p.policy = ExecPolicy::Serial;
    Rng rng(100 + seed);
    EpochState s = ball_state(2);
    const Vec theta = 0.6 * ball_point(2, rng).cwiseAbs();
    fill_records(s, p, theta, 5, rng);
    const CutResult res = separating_cut(s, p, Rng(seed));
    CHECK(res.cut.contains(theta, 1e-12));
    std::size_t audited = 0;
    for (int i = 0; i <= 120; ++i)
      for (int j = 0; j <= 120; ++j) {
        const Vec q = v2(-1.0 + i / 60.0, -1.0 + j / 60.0);
        if (q.norm() > 1.0 || undesirability(q, p.nu, s) > 0) continue;
        ++audited;
        CHECK(res.cut.contains(q, 1e-9));
      }
    CHECK(audited > 0);
    // The cut also removes kappa's immediate neighbourhood on one side.
    CHECK(std::abs(res.cut.signed_distance(s.kappa)) <= 2.0 * p.nu_hi);
  }
}

TEST_CASE("certified cut: nothing below it has undesirability <= c") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const int cbar = 1 + static_cast<int>(seed % 2);
    auto p = AlgoParams::make(2, 0.1, cbar);
    p.policy = ExecPolicy::Serial;
    Rng rng(200 + seed);
    EpochState s = ball_state(2);
    const Vec theta = 0.6 * ball_point(2, rng).cwiseAbs();
    fill_records(s, p, theta, p.tau, rng, true);
    for (int k = 0; k < cbar; ++k) {
      auto& r = s.records[rng.below(s.records.size())];
      r.direction = -r.direction;
    }
    const CutResult res = separating_cut(s, p, Rng(seed));
    ConvexRegion below = s.K.region();
    below.add(res.cut.flipped());
    CHECK_FALSE(find_violation_enumerate(below, s, p, p.nu, ExecPolicy::Serial).has_value());
    CHECK(static_cast<double>(res.mistakes) <= p.mistake_cap);
    // theta* is consistent with all but the corrupted records.
    CHECK(res.cut.contains(theta, 1e-12));
  }
}

TEST_CASE("mutation: a margin-free certificate is caught by the margin audit") {
  std::size_t caught = 0, trials = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto p = AlgoParams::make(2, 0.1, 1);
    p.policy = ExecPolicy::Serial;
    p.certificate_margin = false;
    Rng rng(300 + seed);
    EpochState s = ball_state(2);
    fill_records(s, p, 0.6 * ball_point(2, rng).cwiseAbs(), p.tau, rng, true);
    CutResult res;
    try {
      res = separating_cut(s, p, Rng(seed));
    } catch (const std::exception&) {
      continue;
    }
    ++trials;
    ConvexRegion below = s.K.region();
    below.add(res.cut.flipped());
    if (find_violation_enumerate(below, s, p, p.nu, ExecPolicy::Serial)) ++caught;
  }
  CHECK(trials > 0);
  CHECK(caught > 0);
}

TEST_CASE("Caratheodory: convex combinations of d+1 low points stay below c(d+1)") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 2 + trial % 2;
    const int cbar = 1 + trial % 3;
    const auto p = AlgoParams::make(d, 0.1, cbar);
    EpochState s = ball_state(d);
    fill_records(s, p, 0.7 * ball_point(d, rng), 30, rng);
    std::vector<Vec> pool;
    for (int k = 0; k < 100000 && pool.size() < 300; ++k) {
      const Vec q = ball_point(d, rng);
      if (undesirability(q, p.nu, s) <= cbar) pool.push_back(q);
    }
    REQUIRE_FALSE(pool.empty());
    for (int k = 0; k < 500; ++k) {
      Vec comb = Vec::Zero(d);
      double ws = 0.0;
      for (int j = 0; j <= d; ++j) {
        const double w = rng.uniform();
        comb += w * pool[rng.below(pool.size())];
        ws += w;
      }
      comb /= ws;
      CHECK(undesirability(comb, p.nu, s) <= cbar * (d + 1));
    }
  }
}

TEST_CASE("epoch update on a slab") {
  auto p = AlgoParams::make(2, 0.1, 1);
  p.policy = ExecPolicy::Serial;
  // K = {0.2 <= theta_1 <= 0.2 + delta/2}: e1 is thin from the start.
  KnowledgeSet K(2, {Halfspace(v2(1, 0), 0.2, +1), Halfspace(v2(1, 0), 0.2 + p.delta / 2, -1)});
  EpochState s = initial_state(p, K, Rng(1));
  REQUIRE(s.S().size() == 1);
  CHECK(std::abs(s.S().basis.col(0).dot(v2(1, 0))) == doctest::Approx(1.0));
  CHECK(s.L().size() == 1);
  CHECK(s.small_extents[0].second - s.small_extents[0].first <= p.delta + 1e-12);
  CHECK(K.contains(s.kappa));

  Rng rng(2);
  fill_records(s, p, v2(0.2, 0.3), 3, rng);
  const Halfspace cut(v2(0, 1), 0.0, +1);
  const EpochState n = epoch_update(s, p, cut, Rng(3));
  CHECK(n.phi == s.phi + 1);
  CHECK(n.records.empty());
  CHECK(n.K.cuts().size() == K.cuts().size() + 1);
  CHECK(cut.contains(n.kappa));
  CHECK(n.K.contains(n.kappa));
  CHECK(n.S().orthonormal());
  CHECK_THROWS(epoch_update(s, p, Halfspace(v2(1, 0), 0.9, +1), Rng(3)));
}

TEST_CASE("a thin cut moves its direction into the small subspace") {
  auto p = AlgoParams::make(2, 0.1, 1);
  EpochState s = initial_state(p, KnowledgeSet(2, {Halfspace(v2(0, 1), 0.3, +1)}), Rng(1));
  REQUIRE(s.L().size() == 2);
  CHECK(apply_cut(s, p, Halfspace(v2(0, 1), 0.3 + p.delta / 2, -1)));
  CHECK(s.S().size() == 1);
  CHECK(s.L().size() == 1);
  CHECK(std::abs(s.L().basis.col(0).dot(v2(1, 0))) == doctest::Approx(1.0));
  CHECK_FALSE(apply_cut(s, p, Halfspace(v2(0, 1), 0.9, +1)));
}

TEST_CASE("exploit is safe when every direction is small") {
  auto p = AlgoParams::make(2, 0.1, 1);
  KnowledgeSet K(2, {Halfspace(v2(1, 0), 0.40, +1), Halfspace(v2(1, 0), 0.40 + p.delta / 2, -1),
                     Halfspace(v2(0, 1), 0.30, +1), Halfspace(v2(0, 1), 0.30 + p.delta / 2, -1)});
  EpochState s = initial_state(p, K, Rng(1));
  REQUIRE(s.L().size() == 0);
  Rng rng(2);
  for (int k = 0; k < 200; ++k) {
    const Vec x = random_unit(2, rng).cwiseAbs();
    const auto [lo, hi] = extent(K, x);
    for (auto kind : {LossKind::eps_ball(0.1), LossKind::absolute(), LossKind::pricing()}) {
      const auto q = step(s, p, x, kind, NoiseModel::none());
      CHECK(q.branch == Branch::Exploit);
      CHECK(q.omega >= lo - 1e-9);
      CHECK(q.omega <= hi + 1e-9);
      const double v = x.dot(v2(0.40 + p.delta / 4, 0.30 + p.delta / 4));
      CHECK(loss(kind, q.omega, v, v) <= (kind.type == LossType::EpsBall ? 0.0 : p.eps));
    }
  }
  CHECK_THROWS_AS(separating_cut(s, p, Rng(0)), std::logic_error);
}

TEST_CASE("query rejects non-unit contexts") {
  const auto p = AlgoParams::make(2, 0.1, 1);
  EpochState s = ball_state(2);
  CHECK_THROWS(step(s, p, v2(1, 1), LossKind::eps_ball(0.1), NoiseModel::none()));
}

TEST_CASE("theta* survives a budgeted adversary") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    auto p = AlgoParams::make(2, 0.1, 1);
    p.policy = ExecPolicy::Serial;
    Rng root(seed);
    Rng th = root.substream("theta");
    const Vec theta = sample_theta(2, th);
    CorpvKnown a(p, LossKind::eps_ball(0.1), NoiseModel::none(), root.substream("algorithm"));
    Nature nat(theta, BehaviorModel::Adversarial, 1, make_targeted(), NoiseModel::none(), root.substream("nature"));
    auto ctx = make_uniform_sphere(2, root.substream("contexts"));
    const auto r = play(a, nat, *ctx, 600);
    CHECK(nat.corruptions_used() == 1);
    CHECK(r.epochs > 0);
    CHECK(r.retained);
  }
}

TEST_CASE("clean play keeps theta* and ends in exploitation") {
  auto p = AlgoParams::make(2, 0.1, 0);
  p.policy = ExecPolicy::Serial;
  Rng root(42);
  Rng th = root.substream("theta");
  const Vec theta = sample_theta(2, th);
  CorpvKnown a(p, LossKind::eps_ball(0.1), NoiseModel::none(), root.substream("algorithm"));
  Nature nat(theta, BehaviorModel::FullyRational, 0, nullptr, NoiseModel::none(), root.substream("nature"));
  auto ctx = make_uniform_sphere(2, root.substream("contexts"));
  const auto r = play(a, nat, *ctx, 1500);
  CHECK(r.retained);
  CHECK(a.epochs_completed() == r.epochs);
  // Late rounds are mostly exploits with eps-accurate answers.
  std::size_t exploit = 0, wrong = 0;
  for (int k = 0; k < 200; ++k) {
    const Vec x = ctx->next();
    const auto q = a.query(x);
    if (q.branch != Branch::Exploit) continue;
    ++exploit;
    if (std::abs(q.omega - x.dot(theta)) > p.eps) ++wrong;
  }
  CHECK(exploit > 100);
  CHECK(wrong == 0);
}
