#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "corsearch/baseline.hpp"
#include "corsearch/behaviors.hpp"

using namespace corsearch;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

PvParams serial(int d, double eps) {
  PvParams p = PvParams::make(d, eps);
  p.centroid.policy = ExecPolicy::Serial;
  return p;
}

}  // namespace

TEST_CASE("parameters") {
  const auto p = PvParams::make(2, 0.1);
  CHECK(p.delta_prime == doctest::Approx(0.01 / (16.0 * 2 * 9)));
  CHECK(p.centroid_tol == doctest::Approx(p.delta_prime / 4));
  CHECK_THROWS(PvParams::make(0, 0.1));
  CHECK_THROWS(PvParams::make(2, -0.1));
}

TEST_CASE("fixed context e1 bisects the interval") {
  // theta in [0, 0.7] x [0, 0.7]; only theta_1 is probed.
  const Vec theta = v2(0.3141, 0.2);
  KnowledgeSet K0(2, {Halfspace(v2(1, 0), 0.0, +1), Halfspace(v2(1, 0), 0.7, -1), Halfspace(v2(0, 1), 0.0, +1),
                      Halfspace(v2(0, 1), 0.7, -1)});
  ProjectedVolume pv(serial(2, 0.001), LossKind::eps_ball(0.001), NoiseModel::none(), Rng(1), K0);
  const Vec x = v2(1, 0);
  double lo = 0.0, hi = 0.7;
  for (int k = 0; k < 8; ++k) {
    const auto q = pv.query(x);
    REQUIRE(q.branch == Branch::Explore);
    // The centroid query sits at the midpoint within the centroid tolerance.
    CHECK(std::abs(q.omega - 0.5 * (lo + hi)) <= 0.05 * (hi - lo) + pv.params().centroid_tol);
    const int y = feedback(theta[0], q.omega);
    pv.update(x, q, y);
    (y > 0 ? lo : hi) = q.omega;
    const auto [a, b] = extent(pv.state().K, x);
    CHECK(a == doctest::Approx(lo).epsilon(1e-9));
    CHECK(b == doctest::Approx(hi).epsilon(1e-9));
  }
  CHECK(hi - lo <= 0.7 * std::pow(0.55, 8));
  CHECK(pv.state().K.contains(theta));
  CHECK(pv.state().cuts == 8);
}

TEST_CASE("one corrupted answer eliminates theta* for good") {
  const Vec theta = v2(0.75, 0.0);
  const Vec x = v2(1, 0);
  KnowledgeSet K0(2, {Halfspace(v2(1, 0), 0.0, +1), Halfspace(v2(0, 1), 0.0, +1), Halfspace(v2(0, 1), 1e-3, -1)});
  ProjectedVolume pv(serial(2, 0.1), LossKind::eps_ball(0.1), NoiseModel::none(), Rng(2), K0);
  auto q = pv.query(x);
  REQUIRE(q.branch == Branch::Explore);
  CHECK(q.omega == doctest::Approx(0.5).epsilon(0.05));
  Nature nat(theta, BehaviorModel::Adversarial, 1, make_scripted({1}), NoiseModel::none(), Rng(3));
  auto p = nat.perceived_value(x, {1, q.branch, 0, q.omega});
  CHECK(p.corrupted);
  pv.update(x, q, feedback(p.vtilde, q.omega));
  CHECK_FALSE(pv.state().K.contains(theta));
  CHECK(extent(pv.state().K, x).second == doctest::Approx(q.omega));
  for (std::size_t t = 2; t <= 40; ++t) {
    q = pv.query(x);
    p = nat.perceived_value(x, {t, q.branch, 0, q.omega});
    pv.update(x, q, feedback(p.vtilde, q.omega));
    CHECK_FALSE(pv.state().K.contains(theta));
  }
  // It settles at the top of the wrong interval.
  CHECK(pv.query(x).branch == Branch::Exploit);
  CHECK(std::abs(pv.query(x).omega - 0.75) > 0.2);
}

TEST_CASE("inconsistent feedback surfaces as an empty knowledge set") {
  KnowledgeSet K0(2, {Halfspace(v2(1, 0), 0.4, +1), Halfspace(v2(1, 0), 0.6, -1)});
  ProjectedVolume pv(serial(2, 0.01), LossKind::eps_ball(0.01), NoiseModel::none(), Rng(4), K0);
  QueryDecision q;
  q.branch = Branch::Explore;
  q.omega = 0.3;
  CHECK_THROWS_WITH(pv.update(v2(1, 0), q, -1), "empty knowledge set");
}

TEST_CASE("clean run ends narrow with theta* inside") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng root(seed);
    Rng th = root.substream("theta");
    const Vec theta = sample_theta(2, th);
    const auto p = serial(2, 0.1);
    ProjectedVolume pv(p, LossKind::eps_ball(0.1), NoiseModel::none(), root.substream("algorithm"));
    auto ctx = make_uniform_sphere(2, root.substream("contexts"));
    std::size_t explores = 0;
    for (std::size_t t = 1; t <= 1000; ++t) {
      const Vec x = ctx->next();
      const auto q = pv.query(x);
      if (q.branch == Branch::Explore) ++explores;
      pv.update(x, q, feedback(x.dot(theta), q.omega));
      REQUIRE(pv.state().K.contains(theta));
    }
    CHECK(explores <= 10.0 * 2 * std::log(2 / 0.1));
    Rng probe(7);
    auto ctx2 = make_uniform_sphere(2, probe);
    for (int k = 0; k < 200; ++k) {
      const Vec x = ctx2->next();
      CHECK(cylindrify(pv.state().K, pv.state().S()).width(x) <= p.eps);
    }
  }
}
