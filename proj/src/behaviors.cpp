#include "corsearch/behaviors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace corsearch {

namespace {
constexpr double kFlipGap = 1e-6;
constexpr double kValueSlack = 1e-12;

class FlipRandom : public CorruptionStrategy {
 public:
  FlipRandom(std::size_t C, std::size_t T, Rng rng) {
    std::vector<std::size_t> all(T);
    for (std::size_t t = 0; t < T; ++t) all[t] = t + 1;
    C = std::min(C, T);
    for (std::size_t k = 0; k < C; ++k) {
      const std::size_t j = k + rng.below(T - k);
      std::swap(all[k], all[j]);
      rounds_.insert(all[k]);
    }
  }
  std::string name() const override { return "flip"; }
  std::optional<double> corrupt(const RoundInfo& info, const Vec&, double v) override {
    if (!rounds_.count(info.t)) return std::nullopt;
    return flipped_value(v, info.omega);
  }

 private:
  std::set<std::size_t> rounds_;
};

class FrontLoad : public CorruptionStrategy {
 public:
  std::string name() const override { return "front-load"; }
  std::optional<double> corrupt(const RoundInfo& info, const Vec&, double v) override {
    return flipped_value(v, info.omega);
  }
};

class Targeted : public CorruptionStrategy {
 public:
  std::string name() const override { return "targeted"; }
  std::optional<double> corrupt(const RoundInfo& info, const Vec&, double v) override {
    if (info.branch != Branch::Explore) return std::nullopt;
    return flipped_value(v, info.omega);
  }
};

class Scripted : public CorruptionStrategy {
 public:
  explicit Scripted(std::set<std::size_t> r) : rounds_(std::move(r)) {}
  std::string name() const override { return "scripted"; }
  std::optional<double> corrupt(const RoundInfo& info, const Vec&, double v) override {
    if (!rounds_.count(info.t)) return std::nullopt;
    return flipped_value(v, info.omega);
  }

 private:
  std::set<std::size_t> rounds_;
};

class LayerTargeted : public CorruptionStrategy {
 public:
  explicit LayerTargeted(int layer) : layer_(layer) {}
  std::string name() const override { return "layer"; }
  std::optional<double> corrupt(const RoundInfo& info, const Vec&, double v) override {
    if (info.layer != layer_) return std::nullopt;
    return flipped_value(v, info.omega);
  }

 private:
  int layer_;
};

class UniformSphere : public ContextSource {
 public:
  UniformSphere(int d, Rng rng) : d_(d), rng_(rng) {}
  Vec next() override {
    Vec x(d_);
    double n = 0.0;
    while (n < 1e-12) {
      for (int i = 0; i < d_; ++i) x[i] = std::abs(rng_.normal());
      n = x.norm();
    }
    return x / n;
  }

 private:
  int d_;
  Rng rng_;
};

class Script : public ContextSource {
 public:
  explicit Script(std::vector<Vec> xs) : xs_(std::move(xs)) {
    if (xs_.empty()) throw std::invalid_argument("context script is empty");
    for (const auto& x : xs_)
      if (std::abs(x.norm() - 1.0) > kOrthoTol) throw std::invalid_argument("script contexts must be unit vectors");
  }
  Vec next() override { return xs_[i_++ % xs_.size()]; }

 private:
  std::vector<Vec> xs_;
  std::size_t i_ = 0;
};

}  // namespace

int feedback(double vtilde, double omega) { return vtilde >= omega ? +1 : -1; }

std::optional<double> flipped_value(double v, double omega) {
  if (feedback(v, omega) > 0) {
    const double w = omega - kFlipGap;
    if (w < 0.0) return std::nullopt;
    return w;
  }
  if (omega > 1.0) return std::nullopt;
  return omega;
}

std::unique_ptr<CorruptionStrategy> make_flip(std::size_t C, std::size_t T, Rng rng) {
  return std::make_unique<FlipRandom>(C, T, rng);
}
std::unique_ptr<CorruptionStrategy> make_front_load() { return std::make_unique<FrontLoad>(); }
std::unique_ptr<CorruptionStrategy> make_targeted() { return std::make_unique<Targeted>(); }
std::unique_ptr<CorruptionStrategy> make_scripted(std::set<std::size_t> rounds) {
  return std::make_unique<Scripted>(std::move(rounds));
}
std::unique_ptr<CorruptionStrategy> make_layer_targeted(int layer) { return std::make_unique<LayerTargeted>(layer); }

Nature::Nature(Vec theta_star, BehaviorModel model, std::size_t budget, std::unique_ptr<CorruptionStrategy> strategy,
               NoiseModel noise, Rng rng)
    : theta_(std::move(theta_star)),
      model_(model),
      budget_(model == BehaviorModel::Adversarial ? budget : 0),
      strategy_(std::move(strategy)),
      noise_(model == BehaviorModel::Bounded ? noise : NoiseModel::none()),
      rng_(rng) {
  if (theta_.norm() > 1.0 + kOrthoTol) throw std::invalid_argument("theta* must lie in the unit ball");
  if (model == BehaviorModel::Adversarial && !strategy_ && budget_ > 0)
    throw std::invalid_argument("adversarial nature needs a corruption strategy");
}

Nature::Perceived Nature::perceived_value(const Vec& x, const RoundInfo& info) {
  Perceived p;
  const double raw = x.dot(theta_);
  if (raw < -kValueSlack || raw > 1.0 + kValueSlack) throw std::domain_error("value <x, theta*> outside [0, 1]");
  p.v = std::clamp(raw, 0.0, 1.0);
  p.vtilde = p.v;
  switch (model_) {
    case BehaviorModel::FullyRational: break;
    case BehaviorModel::Bounded: {
      double xi = noise_.sigma * rng_.normal();
      if (noise_.truncation) xi = std::clamp(xi, -*noise_.truncation, *noise_.truncation);
      p.xi = xi;
      p.vtilde = std::clamp(p.v + xi, 0.0, 1.0);
      break;
    }
    case BehaviorModel::Adversarial: {
      if (used_ >= budget_ || !strategy_) break;
      const auto w = strategy_->corrupt(info, x, p.v);
      if (w && *w != p.v) {
        p.vtilde = std::clamp(*w, 0.0, 1.0);
        p.corrupted = true;
        ++used_;
      }
      break;
    }
  }
  if (used_ > budget_) throw std::logic_error("corruption budget exceeded");
  return p;
}

std::unique_ptr<ContextSource> make_uniform_sphere(int d, Rng rng) { return std::make_unique<UniformSphere>(d, rng); }
std::unique_ptr<ContextSource> make_script(std::vector<Vec> contexts) {
  return std::make_unique<Script>(std::move(contexts));
}

std::vector<Vec> cone_contexts(int d, int n, const Vec& apex, double lift, Rng* jitter) {
  if (d != 3) throw std::invalid_argument("cone contexts are defined for d = 3");
  if (apex.size() != 3) throw std::invalid_argument("apex must be a point of R^3");
  if (n < 1) throw std::invalid_argument("cone needs at least one context");
  const double c = std::sqrt(1.0 - lift * lift);
  std::vector<Vec> out;
  for (int i = 0; i < n; ++i) {
    double a = 2.0 * std::numbers::pi * i / n;
    if (jitter) a += (jitter->uniform() - 0.5) * std::numbers::pi / n;
    Vec x(3);
    x << c * std::cos(a), c * std::sin(a), lift;
    out.push_back(x);
  }
  return out;
}

Vec sample_theta(int d, Rng& rng, double r_max) {
  Vec g(d);
  double n = 0.0;
  while (n < 1e-12) {
    for (int i = 0; i < d; ++i) g[i] = std::abs(rng.normal());
    n = g.norm();
  }
  return g * (r_max * std::pow(rng.uniform(), 1.0 / d) / n);
}

}  // namespace corsearch
