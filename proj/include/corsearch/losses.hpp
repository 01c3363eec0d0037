#pragma once

#include <optional>
#include <string>

#include "corsearch/geometry.hpp"

namespace corsearch {

enum class LossType { EpsBall, Absolute, Pricing };

struct LossKind {
  LossType type = LossType::EpsBall;
  double eps = 0.1;  // EpsBall only

  static LossKind eps_ball(double eps);
  static LossKind absolute() { return {LossType::Absolute, 0.0}; }
  static LossKind pricing() { return {LossType::Pricing, 0.0}; }
  std::string name() const;
};

// Perceived value noise: Gaussian with standard deviation sigma, optionally
// clamped to [-truncation, truncation]; the perceived value is then clamped
// to [0, 1].
struct NoiseModel {
  double sigma = 0.0;
  std::optional<double> truncation;

  static NoiseModel none() { return {}; }
  static NoiseModel normal(double sigma, std::optional<double> trunc = std::nullopt);
  bool is_none() const { return sigma == 0.0; }
};

inline constexpr double kGridStep = 1e-4;

double loss(const LossKind& kind, double omega, double v, double vtilde);

// E[loss(omega, v, v + xi)] with the perceived value clamped into [0, 1].
double expected_loss(const LossKind& kind, const NoiseModel& noise, double omega, double v);

struct Benchmark {
  double omega = 0.0;
  double loss = 0.0;
};
Benchmark benchmark_loss(const LossKind& kind, const NoiseModel& noise, double true_value);

// Min-max query when the value is known to lie in [m, M]. `anchor` is the
// value <x, kappa> of a point of the body, used by the eps-ball loss.
double exploit_query(const LossKind& kind, const NoiseModel& noise, double m, double M, double anchor);
double exploit_query(const LossKind& kind, const NoiseModel& noise, const KnowledgeSet& K, const Vec& x,
                     const Vec& kappa);

// max over v in [m, M] of the expected loss of omega.
double worst_case_loss(const LossKind& kind, const NoiseModel& noise, double omega, double m, double M);

}  // namespace corsearch
