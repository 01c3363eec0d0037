#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "corsearch/geometry.hpp"
#include "corsearch/losses.hpp"

namespace corsearch {

enum class Branch { Explore, Exploit };

// What the adversary may look at when deciding a round: history is implicit
// in its own state, the current query is passed explicitly.
struct RoundInfo {
  std::size_t t = 0;
  Branch branch = Branch::Explore;
  int layer = 0;
  double omega = 0.0;
};

int feedback(double vtilde, double omega);

// Perceived value just across omega so that the feedback is inverted, or
// nullopt when no value in [0, 1] achieves that.
std::optional<double> flipped_value(double v, double omega);

class CorruptionStrategy {
 public:
  virtual ~CorruptionStrategy() = default;
  virtual std::string name() const = 0;
  // Proposed perceived value for this round; nullopt leaves it uncorrupted.
  // Called only while budget remains.
  virtual std::optional<double> corrupt(const RoundInfo& info, const Vec& x, double v) = 0;
};

// Flips feedback on C rounds drawn uniformly from [1, T].
std::unique_ptr<CorruptionStrategy> make_flip(std::size_t C, std::size_t T, Rng rng);
// Flips feedback from the first round on until the budget is spent.
std::unique_ptr<CorruptionStrategy> make_front_load();
// Flips feedback on explore rounds only.
std::unique_ptr<CorruptionStrategy> make_targeted();
// Flips feedback on the listed rounds.
std::unique_ptr<CorruptionStrategy> make_scripted(std::set<std::size_t> rounds);
// Flips feedback on every round routed to the given layer.
std::unique_ptr<CorruptionStrategy> make_layer_targeted(int layer);

enum class BehaviorModel { FullyRational, Adversarial, Bounded };

class Nature {
 public:
  Nature(Vec theta_star, BehaviorModel model, std::size_t budget, std::unique_ptr<CorruptionStrategy> strategy,
         NoiseModel noise, Rng rng);

  struct Perceived {
    double v = 0.0;
    double vtilde = 0.0;
    bool corrupted = false;
    double xi = 0.0;
  };
  Perceived perceived_value(const Vec& x, const RoundInfo& info);

  const Vec& theta_star() const { return theta_; }
  BehaviorModel model() const { return model_; }
  std::size_t budget() const { return budget_; }
  std::size_t corruptions_used() const { return used_; }
  const NoiseModel& noise() const { return noise_; }

 private:
  Vec theta_;
  BehaviorModel model_;
  std::size_t budget_;
  std::unique_ptr<CorruptionStrategy> strategy_;
  NoiseModel noise_;
  Rng rng_;
  std::size_t used_ = 0;
};

class ContextSource {
 public:
  virtual ~ContextSource() = default;
  virtual Vec next() = 0;
};

// Uniform on the unit sphere folded into the nonnegative orthant, so that
// values <x, theta> of nonnegative parameters stay in [0, 1].
std::unique_ptr<ContextSource> make_uniform_sphere(int d, Rng rng);
// Replays the given unit contexts cyclically.
std::unique_ptr<ContextSource> make_script(std::vector<Vec> contexts);

// Normals of n planes through `apex` that wrap around the e3 axis at
// elevation asin(lift): their positive sides form a polyhedral cone whose
// facets are all essential. A nonzero jitter perturbs the azimuths.
std::vector<Vec> cone_contexts(int d, int n, const Vec& apex, double lift = 0.95, Rng* jitter = nullptr);

// A parameter drawn uniformly from the nonnegative orthant part of the ball
// of radius r_max.
Vec sample_theta(int d, Rng& rng, double r_max = 0.95);

}  // namespace corsearch
