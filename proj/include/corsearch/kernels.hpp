#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "corsearch/geometry.hpp"

// Hot loops with a parallel (OpenMP) and a serial code path. Both paths give
// bit-identical results: work is split into units that own their RNG
// substream and partial results are reduced in a fixed order.
namespace corsearch::kernels {

struct Moments {
  Vec sum;
  Vec sumsq;
  std::size_t count = 0;

  explicit Moments(int n = 0) : sum(Vec::Zero(n)), sumsq(Vec::Zero(n)) {}
  void merge(const Moments& o) {
    sum += o.sum;
    sumsq += o.sumsq;
    count += o.count;
  }
  Vec mean() const { return sum / static_cast<double>(count); }
  // Largest per-coordinate standard error of the mean.
  double std_error() const;
};

// Parameter range [lo, hi] of the line p + t v inside the region (v unit).
std::pair<double, double> chord(const ConvexRegion& region, const Vec& p, const Vec& v);

class HitAndRun {
 public:
  HitAndRun(const ConvexRegion& region, const Vec& start, const Rng& rng, int chains, int thin,
            int burn_in);

  // Draws `per_chain` thinned samples from every chain and adds them to acc.
  void advance(std::size_t per_chain, ExecPolicy policy, Moments& acc);
  int chains() const { return static_cast<int>(state_.size()); }

 private:
  void step(int c);
  const ConvexRegion* region_;
  std::vector<Vec> state_;
  std::vector<Rng> rng_;
  int thin_;
};

// Number of uniform points of the box [lo, hi] accepted by `inside`.
std::size_t count_inside(const std::function<bool(const Vec&)>& inside, const Vec& lo, const Vec& hi,
                         const Rng& rng, std::size_t n, ExecPolicy policy);

// Uniform points of the box [lo, hi] accepted by `inside`, added to acc.
// Returns the number of proposals drawn.
std::size_t rejection_moments(const std::function<bool(const Vec&)>& inside, const Vec& lo,
                              const Vec& hi, Rng& rng, std::size_t proposals, ExecPolicy policy,
                              Moments& acc);

// Lexicographically first k-subset of {0..n-1} for which pred holds.
std::optional<std::vector<int>> first_subset(int n, int k,
                                             const std::function<bool(const std::vector<int>&)>& pred,
                                             ExecPolicy policy, std::size_t max_subsets);

bool next_combination(std::vector<int>& idx, int n);
double binomial(int n, int k);

}  // namespace corsearch::kernels
