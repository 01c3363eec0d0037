#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "corsearch/behaviors.hpp"
#include "corsearch/layers.hpp"

using namespace corsearch;

namespace {

AlgoParams serial(int d, double eps) {
  AlgoParams p = AlgoParams::make(d, eps, 1);
  p.policy = ExecPolicy::Serial;
  return p;
}

struct AiRun {
  std::vector<int> sampled;
  std::vector<bool> corrupted;
  std::size_t epochs = 0;
};

// Plays T rounds; `each` sees the bank, the context and the decision before
// the update is applied.
template <class F>
AiRun play(CorpvAi& a, Nature& nat, ContextSource& ctx, std::size_t T, F&& each) {
  AiRun out;
  for (std::size_t t = 1; t <= T; ++t) {
    const Vec x = ctx.next();
    const AiDecision d = a.query(x);
    each(a, x, d);
    const auto pv = nat.perceived_value(x, {t, d.q.branch, d.sampled, d.q.omega});
    out.sampled.push_back(d.sampled);
    out.corrupted.push_back(pv.corrupted);
    if (a.update(x, d, feedback(pv.vtilde, d.q.omega), t)) ++out.epochs;
  }
  return out;
}

AiRun play(CorpvAi& a, Nature& nat, ContextSource& ctx, std::size_t T) {
  return play(a, nat, ctx, T, [](const CorpvAi&, const Vec&, const AiDecision&) {});
}

}  // namespace

TEST_CASE("layer count and probabilities") {
  CHECK(num_layers(8) == 3);
  CHECK(num_layers(9) == 4);
  CHECK(num_layers(2) == 1);
  CHECK(num_layers(1) == 1);
  CHECK(layer_probability(1, 8) == doctest::Approx(5.0 / 8));
  CHECK(layer_probability(2, 8) == doctest::Approx(1.0 / 4));
  CHECK(layer_probability(3, 8) == doctest::Approx(1.0 / 8));
  CHECK(layer_probability(4, 8) == 0.0);
  CHECK(layer_probability(1, 2) == 1.0);
  for (std::size_t T : {2u, 8u, 100u, 8192u}) {
    double s = 0.0;
    for (int j = 1; j <= num_layers(T); ++j) s += layer_probability(j, T);
    CHECK(s == doctest::Approx(1.0));
  }
}

TEST_CASE("sampled layers follow the layer distribution") {
  Rng rng(1);
  const std::size_t T = 8, n = 200'000;
  std::vector<std::size_t> hits(4, 0);
  for (std::size_t k = 0; k < n; ++k) ++hits[sample_layer(rng, T)];
  for (int j = 1; j <= 3; ++j) {
    const double pj = layer_probability(j, T);
    const double se = std::sqrt(pj * (1 - pj) / n);
    CHECK(std::abs(static_cast<double>(hits[j]) / n - pj) <= 4 * se);
  }
  Rng one(2);
  for (int k = 0; k < 100; ++k) CHECK(sample_layer(one, 2) == 1);
}

TEST_CASE("agnostic budget") {
  CHECK(agnostic_budget(1024, 0.5) == 22);
  CHECK(agnostic_budget(8192, 0.1) == static_cast<int>(std::ceil(2 * std::log2(81920.0))));
  CHECK_THROWS(agnostic_budget(100, 0.0));
  CHECK_THROWS(agnostic_budget(100, 1.0));
}

TEST_CASE("budget doubles under a noise margin") {
  AlgoParams p = serial(2, 0.1);
  CorpvAi a(p, 64, 0.5, LossKind::eps_ball(0.1), NoiseModel::none(), Rng(0));
  CHECK(a.params().budget == agnostic_budget(64, 0.5));
  AlgoParams q = AlgoParams::make(2, 0.1, 1, 0.001);
  q.policy = ExecPolicy::Serial;
  CorpvAi b(q, 64, 0.5, LossKind::eps_ball(0.1), NoiseModel::none(), Rng(0));
  CHECK(b.params().budget == 2 * agnostic_budget(64, 0.5));
  CHECK(b.params().margin_shift == 0.001);
}

TEST_CASE("a one-layer bank replays the known-budget learner bit for bit") {
  const double beta = 0.5;
  const std::size_t T = 2;
  AlgoParams p = serial(2, 0.1);
  CorpvAi ai(p, T, beta, LossKind::eps_ball(0.1), NoiseModel::none(), Rng(77));
  REQUIRE(ai.layers() == 1);
  AlgoParams pk = AlgoParams::make(2, 0.1, agnostic_budget(T, beta));
  pk.policy = ExecPolicy::Serial;
  CorpvKnown kn(pk, LossKind::eps_ball(0.1), NoiseModel::none(), Rng(77));
  Rng th(5);
  const Vec theta = sample_theta(2, th);
  auto ctx = make_uniform_sphere(2, Rng(6));
  std::size_t epochs = 0;
  for (std::size_t t = 1; t <= 1500; ++t) {
    const Vec x = ctx->next();
    const AiDecision d = ai.query(x);
    const QueryDecision q = kn.query(x);
    REQUIRE(d.q.branch == q.branch);
    REQUIRE(d.q.omega == q.omega);
    REQUIRE(d.q.omega_raw == q.omega_raw);
    const int y = feedback(x.dot(theta), q.omega);
    const bool ea = ai.update(x, d, y, t).has_value();
    const bool ek = kn.update(x, q, y, t).has_value();
    REQUIRE(ea == ek);
    epochs += ea;
  }
  CHECK(epochs > 0);
  CHECK((ai.layer(1).state.kappa - kn.state().kappa).norm() == 0.0);
  CHECK(ai.layer(1).state.K.cuts().size() == kn.state().K.cuts().size());
}

TEST_CASE("layers stay nested and delegation picks the lowest eligible layer") {
  AlgoParams p = serial(2, 0.1);
  const std::size_t T = 1024;
  CorpvAi a(p, T, 0.5, LossKind::eps_ball(0.1), NoiseModel::none(), Rng(11));
  Rng th(12);
  const Vec theta = sample_theta(2, th);
  Nature nat(theta, BehaviorModel::FullyRational, 0, nullptr, NoiseModel::none(), Rng(13));
  auto ctx = make_uniform_sphere(2, Rng(14));
  std::size_t delegated = 0;
  const auto r = play(a, nat, *ctx, T, [&](const CorpvAi& b, const Vec& x, const AiDecision& d) {
    CHECK(d.layer >= d.sampled);
    if (d.q.branch == Branch::Explore) {
      CHECK(d.layer == d.sampled);
      return;
    }
    auto eligible = [&](int j) {
      const auto& s = b.layer(j).state;
      return s.L().size() == 0 || cyl_width(s, x) <= b.params().eps;
    };
    if (d.layer != d.sampled) ++delegated;
    for (int j = d.sampled; j < d.layer; ++j) CHECK_FALSE(eligible(j));
    if (d.layer <= b.layers()) CHECK(eligible(d.layer));
  });
  CHECK(r.epochs > 0);
  for (int j = 1; j < a.layers(); ++j) {
    const auto& lo = a.layer(j).cut_ids;
    const auto& hi = a.layer(j + 1).cut_ids;
    for (auto id : hi) CHECK(std::find(lo.begin(), lo.end(), id) != lo.end());
  }
  // Geometric nesting on sample points.
  Rng rng(15);
  for (int k = 0; k < 3000; ++k) {
    Vec q(2);
    q << rng.uniform(), rng.uniform();
    for (int j = 1; j < a.layers(); ++j)
      if (a.layer(j).state.K.contains(q, 0.0)) CHECK(a.layer(j + 1).state.K.contains(q, 1e-9));
  }
  // Clean feedback: every layer keeps theta*.
  for (int j = 1; j <= a.layers(); ++j) CHECK(a.layer(j).state.K.contains(theta));
  // The exploit trigger already makes j_t eligible, so the minimum is j_t.
  CHECK(delegated == 0);
}

TEST_CASE("scripted layer-1 corruption is confined to layer 1") {
  AlgoParams p = serial(2, 0.1);
  const std::size_t T = 1024, C = 20;
  CorpvAi a(p, T, 0.5, LossKind::eps_ball(0.1), NoiseModel::none(), Rng(21));
  Rng th(22);
  const Vec theta = sample_theta(2, th);
  Nature nat(theta, BehaviorModel::Adversarial, C, make_layer_targeted(1), NoiseModel::none(), Rng(23));
  auto ctx = make_uniform_sphere(2, Rng(24));
  const auto r = play(a, nat, *ctx, T);
  const auto counts = corruption_tolerance_audit(r.sampled, r.corrupted, a.layers());
  REQUIRE(counts.size() == static_cast<std::size_t>(a.layers()));
  CHECK(counts[0] == nat.corruptions_used());
  CHECK(counts[0] == C);
  for (int j = 2; j <= a.layers(); ++j) CHECK(counts[j - 1] == 0);
  // Layers that never saw a corrupted round keep theta*.
  for (int j = 2; j <= a.layers(); ++j) CHECK(a.layer(j).state.K.contains(theta));
}

TEST_CASE("corruption audit validates its input") {
  CHECK_THROWS(corruption_tolerance_audit({1, 2}, {true}, 2));
  CHECK_THROWS(corruption_tolerance_audit({3}, {true}, 2));
  const auto c = corruption_tolerance_audit({1, 2, 2, 1}, {false, true, true, false}, 2);
  CHECK(c[0] == 0);
  CHECK(c[1] == 2);
}
