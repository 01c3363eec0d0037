#include "corsearch/kernels.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace corsearch::kernels {

double Moments::std_error() const {
  if (count < 2) return std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(count);
  double worst = 0.0;
  for (int i = 0; i < sum.size(); ++i) {
    const double m = sum[i] / n;
    const double var = std::max(0.0, (sumsq[i] - n * m * m) / (n - 1.0));
    worst = std::max(worst, std::sqrt(var / n));
  }
  return worst;
}

std::pair<double, double> chord(const ConvexRegion& region, const Vec& p, const Vec& v) {
  // Ball: t^2 + 2 (p.v) t + |p|^2 - r^2 <= 0.
  const double pv = p.dot(v);
  const double disc = pv * pv - (p.squaredNorm() - region.radius * region.radius);
  const double root = std::sqrt(std::max(0.0, disc));
  double lo = -pv - root;
  double hi = -pv + root;
  for (std::size_t i = 0; i < region.rows(); ++i) {
    const double av = region.a[i].dot(v);
    const double slack = region.b[i] - region.a[i].dot(p);
    if (av > 1e-15) {
      hi = std::min(hi, slack / av);
    } else if (av < -1e-15) {
      lo = std::max(lo, slack / av);
    }
  }
  if (hi < lo) hi = lo = 0.0;
  return {lo, hi};
}

HitAndRun::HitAndRun(const ConvexRegion& region, const Vec& start, const Rng& rng, int chains,
                     int thin, int burn_in)
    : region_(&region), thin_(std::max(1, thin)) {
  for (int c = 0; c < chains; ++c) {
    state_.push_back(start);
    rng_.push_back(rng.substream("chain", static_cast<std::uint64_t>(c)));
  }
  for (int c = 0; c < chains; ++c)
    for (int s = 0; s < burn_in; ++s) step(c);
}

void HitAndRun::step(int c) {
  Vec& p = state_[c];
  Rng& r = rng_[c];
  Vec v(p.size());
  for (int i = 0; i < v.size(); ++i) v[i] = r.normal();
  const double nv = v.norm();
  if (nv == 0.0) return;
  v /= nv;
  const auto [lo, hi] = chord(*region_, p, v);
  p += r.uniform(lo, hi) * v;
}

void HitAndRun::advance(std::size_t per_chain, ExecPolicy policy, Moments& acc) {
  const int n = chains();
  std::vector<Moments> part(n, Moments(static_cast<int>(acc.sum.size())));
  auto work = [&](int c) {
    for (std::size_t k = 0; k < per_chain; ++k) {
      for (int s = 0; s < thin_; ++s) step(c);
      part[c].sum += state_[c];
      part[c].sumsq += state_[c].cwiseProduct(state_[c]);
      ++part[c].count;
    }
  };
  if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < n; ++c) work(c);
  } else {
    for (int c = 0; c < n; ++c) work(c);
  }
  for (const auto& m : part) acc.merge(m);
}

namespace {
constexpr std::size_t kBlock = 4096;

Vec box_point(const Vec& lo, const Vec& hi, Rng& r) {
  Vec p(lo.size());
  for (int i = 0; i < p.size(); ++i) p[i] = r.uniform(lo[i], hi[i]);
  return p;
}
}  // namespace

std::size_t count_inside(const std::function<bool(const Vec&)>& inside, const Vec& lo, const Vec& hi,
                         const Rng& rng, std::size_t n, ExecPolicy policy) {
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  std::vector<std::size_t> hits(blocks, 0);
  auto work = [&](std::size_t b) {
    Rng r = rng.substream("block", b);
    const std::size_t m = std::min(kBlock, n - b * kBlock);
    std::size_t h = 0;
    for (std::size_t k = 0; k < m; ++k)
      if (inside(box_point(lo, hi, r))) ++h;
    hits[b] = h;
  };
  if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long long b = 0; b < static_cast<long long>(blocks); ++b) work(static_cast<std::size_t>(b));
  } else {
    for (std::size_t b = 0; b < blocks; ++b) work(b);
  }
  std::size_t total = 0;
  for (auto h : hits) total += h;
  return total;
}

std::size_t rejection_moments(const std::function<bool(const Vec&)>& inside, const Vec& lo,
                              const Vec& hi, Rng& rng, std::size_t proposals, ExecPolicy policy,
                              Moments& acc) {
  const std::size_t blocks = (proposals + kBlock - 1) / kBlock;
  const int n = static_cast<int>(lo.size());
  std::vector<Moments> part(blocks, Moments(n));
  const Rng base = rng.substream("rejection", rng());
  auto work = [&](std::size_t b) {
    Rng r = base.substream("block", b);
    const std::size_t m = std::min(kBlock, proposals - b * kBlock);
    for (std::size_t k = 0; k < m; ++k) {
      Vec p = box_point(lo, hi, r);
      if (!inside(p)) continue;
      part[b].sum += p;
      part[b].sumsq += p.cwiseProduct(p);
      ++part[b].count;
    }
  };
  if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long long b = 0; b < static_cast<long long>(blocks); ++b) work(static_cast<std::size_t>(b));
  } else {
    for (std::size_t b = 0; b < blocks; ++b) work(b);
  }
  for (const auto& m : part) acc.merge(m);
  return proposals;
}

bool next_combination(std::vector<int>& idx, int n) {
  const int k = static_cast<int>(idx.size());
  int i = k - 1;
  while (i >= 0 && idx[i] == n - k + i) --i;
  if (i < 0) return false;
  ++idx[i];
  for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  return true;
}

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

std::optional<std::vector<int>> first_subset(int n, int k,
                                             const std::function<bool(const std::vector<int>&)>& pred,
                                             ExecPolicy policy, std::size_t max_subsets) {
  if (k < 0 || k > n) return std::nullopt;
  if (binomial(n, k) > static_cast<double>(max_subsets))
    throw std::length_error("subset enumeration exceeds max_subsets");
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;

  if (policy == ExecPolicy::Serial) {
    do {
      if (pred(idx)) return idx;
    } while (next_combination(idx, n));
    return std::nullopt;
  }

  // Chunks are scanned in lexicographic order; inside a chunk every subset is
  // tested and the lowest passing position wins, which matches the serial scan.
  constexpr std::size_t kChunk = 64;
  bool more = true;
  while (more) {
    std::vector<std::vector<int>> chunk;
    while (more && chunk.size() < kChunk) {
      chunk.push_back(idx);
      more = next_combination(idx, n);
    }
    std::vector<char> ok(chunk.size(), 0);
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(chunk.size()); ++i) ok[i] = pred(chunk[i]) ? 1 : 0;
    for (std::size_t i = 0; i < chunk.size(); ++i)
      if (ok[i]) return chunk[i];
  }
  return std::nullopt;
}

}  // namespace corsearch::kernels
