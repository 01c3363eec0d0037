#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "corsearch/behaviors.hpp"
#include "corsearch/gd.hpp"
#include "corsearch/losses.hpp"

using namespace corsearch;

namespace {

Vec e(int d, int i) {
  return Vec::Unit(d, i);
}

struct GdRun {
  double abs = 0.0;
  double epsball = 0.0;
};

GdRun play(std::size_t T, std::uint64_t seed, std::size_t C, double eps = 0.1) {
  Rng root(seed);
  Rng th = root.substream("theta");
  const Vec theta = sample_theta(2, th);
  auto ctx = make_uniform_sphere(2, root.substream("contexts"));
  Nature nat(theta, C ? BehaviorModel::Adversarial : BehaviorModel::FullyRational, C,
             C ? make_flip(C, T, root.substream("corruption")) : nullptr, NoiseModel::none(), root.substream("nature"));
  GdState s(2);
  GdRun out;
  for (std::size_t t = 1; t <= T; ++t) {
    const Vec x = ctx->next();
    const double w = gd_query(s, x);
    const auto p = nat.perceived_value(x, {t, Branch::Explore, 0, w});
    out.abs += loss(LossKind::absolute(), w, p.v, p.vtilde);
    out.epsball += loss(LossKind::eps_ball(eps), w, p.v, p.vtilde);
    gd_update(s, x, feedback(p.vtilde, w));
  }
  return out;
}

}  // namespace

TEST_CASE("first step is clipped onto the sphere") {
  GdState s(2);
  gd_update(s, e(2, 0), +1);
  CHECK(s.t == 1);
  CHECK((s.z - e(2, 0)).norm() < 1e-15);
}

TEST_CASE("second step with negative feedback returns to the origin") {
  GdState s(e(2, 0));
  s.t = 1;
  gd_update(s, e(2, 0), -1);
  CHECK(s.z.norm() < 1e-15);
}

TEST_CASE("step sizes") {
  CHECK(gd_step_size(1) == doctest::Approx(std::sqrt(2.0)));
  CHECK(gd_step_size(2) == doctest::Approx(1.0));
  CHECK(gd_step_size(8) == doctest::Approx(0.5));
  CHECK_THROWS(gd_step_size(0));
}

TEST_CASE("query clamps into [0, 1] and validates inputs") {
  Vec z(2);
  z << -0.5, 0.0;
  GdState s(z);
  CHECK(gd_query(s, e(2, 0)) == 0.0);
  CHECK(gd_query(s, e(2, 1)) == 0.0);
  CHECK_THROWS(gd_query(s, Vec::Ones(2)));
  CHECK_THROWS(GdState(Vec::Ones(2)));
  CHECK_THROWS(gd_update(s, e(2, 0), 0));
}

TEST_CASE("proxy loss is linear: finite differences are exact") {
  Rng rng(1);
  for (int k = 0; k < 100; ++k) {
    Vec x(3), z(3), u(3);
    for (int i = 0; i < 3; ++i) {
      x[i] = rng.normal();
      z[i] = rng.normal();
      u[i] = rng.normal();
    }
    x.normalize();
    const int y = rng.uniform() < 0.5 ? -1 : 1;
    auto f = [&](const Vec& p) { return -y * p.dot(x); };
    const Vec grad = -y * x;
    const double h = 1e-3;
    CHECK(f(z + h * u) - f(z) == doctest::Approx(h * grad.dot(u)).epsilon(1e-9));
  }
}

TEST_CASE("iterates stay in the unit ball under arbitrary feedback") {
  Rng rng(2);
  GdState s(3);
  for (int t = 0; t < 5000; ++t) {
    Vec x(3);
    for (int i = 0; i < 3; ++i) x[i] = rng.normal();
    x.normalize();
    gd_update(s, x, rng.uniform() < 0.5 ? -1 : 1);
    CHECK(s.z.norm() <= 1.0 + 1e-12);
  }
  CHECK(project_unit_ball(Vec::Constant(2, 3.0)).norm() == doctest::Approx(1.0));
  const Vec in = Vec::Constant(2, 0.1);
  CHECK(project_unit_ball(in) == in);
}

TEST_CASE("eps-ball loss is bounded by absolute loss over eps on every trace") {
  for (std::uint64_t seed = 0; seed < 5; ++seed)
    for (std::size_t C : {0u, 50u}) {
      const auto r = play(1000, seed, C);
      CHECK(r.epsball <= r.abs / 0.1 + 1e-9);
    }
}

TEST_CASE("uncorrupted regret grows sublinearly") {
  double r1 = 0.0, r4 = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    r1 += play(1000, seed, 0).abs;
    r4 += play(4000, seed, 0).abs;
  }
  CHECK(r4 / r1 <= 2.5);
}

TEST_CASE("corruption adds at most a linear term") {
  const std::size_t T = 2000, C = 100;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const double clean = play(T, seed, 0).abs;
    const double dirty = play(T, seed, C).abs;
    CHECK(dirty - clean <= 2.0 * C + std::sqrt(static_cast<double>(T)));
  }
}
