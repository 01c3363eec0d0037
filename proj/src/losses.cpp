#include "corsearch/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace corsearch {

namespace {

double Phi(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

void check_unit(double x, const char* what) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::out_of_range(std::string(what) + " must lie in [0, 1]");
}

// Perceived value is clamp(v + xi, a, b) with xi ~ N(0, sigma^2).
struct Clamp {
  double a, b;
};
Clamp clamp_range(const NoiseModel& n, double v) {
  const double t = n.truncation.value_or(std::numeric_limits<double>::infinity());
  return {std::max(0.0, v - t), std::min(1.0, v + t)};
}

double expected_pricing(const NoiseModel& n, double omega, double v) {
  if (n.is_none()) return loss(LossKind::pricing(), omega, v, v);
  const auto [a, b] = clamp_range(n, v);
  const double s = n.sigma;
  const double al = (a - v) / s, be = (b - v) / s;
  const double mean = a * Phi(al) + b * (1.0 - Phi(be)) + v * (Phi(be) - Phi(al)) - s * (phi(be) - phi(al));
  double buy;
  if (omega <= a) {
    buy = 1.0;
  } else if (omega > b) {
    buy = 0.0;
  } else {
    buy = 1.0 - Phi((omega - v) / s);
  }
  return mean - omega * buy;
}

template <class F>
double argmin_grid(double lo, double hi, double step, F&& f, double* best_val) {
  double best = lo, val = f(lo);
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long k = 1; k <= n; ++k) {
    const double w = lo + static_cast<double>(k) * step;
    const double fv = f(w);
    if (fv < val) {
      val = fv;
      best = w;
    }
  }
  const double fh = f(hi);
  if (fh < val) {
    val = fh;
    best = hi;
  }
  if (best_val) *best_val = val;
  return best;
}

}  // namespace

LossKind LossKind::eps_ball(double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps-ball loss needs eps > 0");
  return {LossType::EpsBall, eps};
}

std::string LossKind::name() const {
  switch (type) {
    case LossType::EpsBall: return "eps_ball";
    case LossType::Absolute: return "absolute";
    case LossType::Pricing: return "pricing";
  }
  return "?";
}

NoiseModel NoiseModel::normal(double sigma, std::optional<double> trunc) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("noise sigma must be >= 0");
  return {sigma, trunc};
}

double loss(const LossKind& kind, double omega, double v, double vtilde) {
  check_unit(omega, "query");
  check_unit(v, "value");
  check_unit(vtilde, "perceived value");
  switch (kind.type) {
    case LossType::EpsBall: return std::abs(v - omega) >= kind.eps ? 1.0 : 0.0;
    case LossType::Absolute: return std::abs(v - omega);
    case LossType::Pricing: return vtilde - (omega <= vtilde ? omega : 0.0);
  }
  return 0.0;
}

double expected_loss(const LossKind& kind, const NoiseModel& noise, double omega, double v) {
  if (kind.type == LossType::Pricing) return expected_pricing(noise, omega, v);
  return loss(kind, omega, v, v);
}

Benchmark benchmark_loss(const LossKind& kind, const NoiseModel& noise, double true_value) {
  check_unit(true_value, "value");
  if (kind.type != LossType::Pricing || noise.is_none()) return {true_value, 0.0};
  double val = 0.0;
  const double w = argmin_grid(0.0, 1.0, kGridStep, [&](double o) { return expected_pricing(noise, o, true_value); }, &val);
  return {w, val};
}

double worst_case_loss(const LossKind& kind, const NoiseModel& noise, double omega, double m, double M) {
  switch (kind.type) {
    case LossType::EpsBall: return std::max(std::abs(m - omega), std::abs(M - omega)) >= kind.eps ? 1.0 : 0.0;
    case LossType::Absolute: return std::max(std::abs(m - omega), std::abs(M - omega));
    case LossType::Pricing: break;
  }
  if (noise.is_none()) {
    // Supremum over v in [m, M]; a value just below omega forgoes the sale.
    if (omega <= m) return M - omega;
    if (omega > M) return M;
    return std::max(omega, M - omega);
  }
  constexpr int kPoints = 16;
  double worst = 0.0;
  for (int k = 0; k <= kPoints; ++k) {
    const double v = m + (M - m) * k / kPoints;
    worst = std::max(worst, expected_pricing(noise, omega, v));
  }
  return worst;
}

double exploit_query(const LossKind& kind, const NoiseModel& noise, double m, double M, double anchor) {
  m = std::clamp(m, 0.0, 1.0);
  M = std::clamp(M, m, 1.0);
  switch (kind.type) {
    case LossType::EpsBall: return std::clamp(anchor, 0.0, 1.0);
    case LossType::Absolute: return 0.5 * (m + M);
    case LossType::Pricing: break;
  }
  if (noise.is_none()) return m;
  // Coarse scan of [0, 1], then the fine grid around the coarse optimum.
  auto f = [&](double o) { return worst_case_loss(kind, noise, o, m, M); };
  const double coarse = argmin_grid(0.0, 1.0, 1e-2, f, nullptr);
  return argmin_grid(std::max(0.0, coarse - 2e-2), std::min(1.0, coarse + 2e-2), kGridStep, f, nullptr);
}

double exploit_query(const LossKind& kind, const NoiseModel& noise, const KnowledgeSet& K, const Vec& x,
                     const Vec& kappa) {
  const auto [m, M] = extent(K, x);
  return exploit_query(kind, noise, m, M, x.dot(kappa));
}

}  // namespace corsearch
