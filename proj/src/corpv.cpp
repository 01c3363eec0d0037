#include "corsearch/corpv.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "corsearch/kernels.hpp"

namespace corsearch {

namespace {

constexpr double kDegenerate = 1e-12;
// After this many consecutive rejected probes the probe filter relaxes from
// "provably outside the hull" to "outside the protected region".
constexpr int kStrictProbeTries = 400;

Mat append_col(const Mat& m, const Vec& v) {
  Mat out(m.rows(), m.cols() + 1);
  out << m, v;
  return out;
}

void refresh_small_extents(EpochState& s) {
  s.small_extents.clear();
  for (int i = 0; i < s.S().size(); ++i) s.small_extents.push_back(extent(s.K, s.S().basis.col(i)));
}

// Moves every large basis vector of width <= delta into S.
void demote_thin(EpochState& s, const AlgoParams& p, Mat small, const Mat& large) {
  std::vector<Vec> keep;
  for (int i = 0; i < large.cols(); ++i) {
    const Vec l = large.col(i);
    if (width(s.K, l) <= p.delta) {
      small = append_col(small, l);
    } else {
      keep.push_back(l);
    }
  }
  Mat L(p.d, static_cast<int>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) L.col(static_cast<int>(i)) = keep[i];
  s.split.small = Subspace(small);
  s.split.large = Subspace(L);
  s.split.delta = p.delta;
  refresh_small_extents(s);
}

}  // namespace

AlgoParams AlgoParams::make(int d, double eps, int budget, double margin_shift) {
  if (d < 1) throw std::invalid_argument("dimension must be >= 1");
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if (budget < 0) throw std::invalid_argument("budget must be >= 0");
  if (!(margin_shift >= 0.0)) throw std::invalid_argument("margin shift must be >= 0");
  AlgoParams p;
  p.d = d;
  p.eps = eps;
  p.budget = budget;
  const double rd = std::sqrt(static_cast<double>(d));
  p.delta = eps / (4.0 * (d + rd));
  p.nu_hi = (eps - 2.0 * rd * p.delta) / (4.0 * rd);
  p.nu_lo = rd * p.delta + margin_shift;
  p.margin_shift = margin_shift;
  if (!(p.nu_lo < p.nu_hi)) throw std::invalid_argument("margin shift leaves no room between nu_lo and nu_hi");
  p.nu = 0.5 * (p.nu_lo + p.nu_hi);
  p.zeta = p.nu_hi;
  p.tau = 2 * d * budget * (d + 1) + 1;
  const double l32 = std::log(1.5);
  p.mistake_cap = std::max(1.0, static_cast<double>(d - 1)) / (p.zeta * p.zeta * l32 * l32);
  p.centroid_tol = p.nu_hi;
  return p;
}

EpochState initial_state(const AlgoParams& p, const KnowledgeSet& K0, Rng rng) {
  if (K0.dim() != p.d) throw std::invalid_argument("initial knowledge set has wrong dimension");
  if (!feasible(K0.cuts())) throw std::runtime_error("empty knowledge set");
  EpochState s;
  s.K = K0;
  demote_thin(s, p, Mat(p.d, 0), Mat::Identity(p.d, p.d));
  s.kappa = approx_centroid(s.K, s.S(), rng, p.centroid_tol, p.centroid);
  return s;
}

double cyl_width(const EpochState& s, const Vec& x) {
  const Vec xl = s.L().project(x);
  double w = xl.norm() > 1e-15 ? width(s.K, xl) : 0.0;
  for (int i = 0; i < s.S().size(); ++i) {
    const auto [lo, hi] = s.small_extents[i];
    w += std::abs(x.dot(s.S().basis.col(i))) * (hi - lo);
  }
  return w;
}

QueryDecision step(const EpochState& s, const AlgoParams& p, const Vec& x, const LossKind& loss,
                   const NoiseModel& noise) {
  if (std::abs(x.norm() - 1.0) > 1e-9) throw std::invalid_argument("context must be a unit vector");
  QueryDecision q;
  q.omega_raw = x.dot(s.kappa);
  q.width = s.L().size() == 0 ? 0.0 : cyl_width(s, x);
  if (s.L().size() == 0 || q.width <= p.eps) {
    q.branch = Branch::Exploit;
    q.omega = loss.type == LossType::EpsBall ? std::clamp(q.omega_raw, 0.0, 1.0)
                                             : exploit_query(loss, noise, s.K, x, s.kappa);
  } else {
    q.branch = Branch::Explore;
    q.omega = std::clamp(q.omega_raw, 0.0, 1.0);
  }
  return q;
}

bool record_explore(EpochState& s, const AlgoParams& p, const Vec& x, double omega_raw, int y, std::size_t round) {
  if (y != 1 && y != -1) throw std::invalid_argument("feedback must be +1 or -1");
  const Vec h = s.L().project(x);
  const double n = h.norm();
  if (n < kDegenerate) throw std::domain_error("context lies in small dimensions");
  ExploreRecord r;
  r.context = x;
  r.direction = (y / n) * h;
  r.scale = n;
  r.intercept = y * omega_raw;
  r.sign = y;
  r.round = round;
  s.records.push_back(std::move(r));
  return static_cast<int>(s.records.size()) >= p.tau;
}

int undesirability(const Vec& point, double nu, const EpochState& s) {
  const Vec diff = point - s.kappa;
  int u = 0;
  for (const auto& r : s.records)
    if (r.scale * r.direction.dot(diff) + nu < 0.0) ++u;
  return u;
}

std::vector<Vec> landmarks(const EpochState& s, const AlgoParams& p) {
  std::vector<Vec> out;
  for (int i = 0; i < s.L().size(); ++i) {
    out.push_back(s.kappa + p.nu_hi * s.L().basis.col(i));
    out.push_back(s.kappa - p.nu_hi * s.L().basis.col(i));
  }
  return out;
}

std::pair<Vec, double> record_row(const ExploreRecord& r, const Vec& kappa, double nu) {
  // <p - kappa, scale * dir> + nu >= 0, divided by scale.
  return {-r.direction, nu / r.scale - r.direction.dot(kappa)};
}

namespace {

ConvexRegion with_records(const ConvexRegion& base, const EpochState& s, double nu, const std::vector<char>& drop) {
  ConvexRegion r = base;
  for (std::size_t t = 0; t < s.records.size(); ++t) {
    if (drop[t]) continue;
    const auto [a, b] = record_row(s.records[t], s.kappa, nu);
    r.add(a, b);
  }
  return r;
}

}  // namespace

std::optional<Vec> find_violation_enumerate(const ConvexRegion& base, const EpochState& s, const AlgoParams& p,
                                            double nu, ExecPolicy policy, ViolationStats* stats) {
  const int n = static_cast<int>(s.records.size());
  const int k = std::min(p.budget, n);
  std::atomic<std::size_t> solves{0};
  auto region_for = [&](const std::vector<int>& D) {
    std::vector<char> drop(n, 0);
    for (int t : D) drop[t] = 1;
    return with_records(base, s, nu, drop);
  };
  const auto D = kernels::first_subset(
      n, k,
      [&](const std::vector<int>& sub) {
        ++solves;
        return chebyshev(region_for(sub)).feasible;
      },
      policy,
      std::max<std::size_t>(p.max_subsets, 1));
  if (stats) stats->lp_solves += solves.load();
  if (!D) return std::nullopt;
  return chebyshev(region_for(*D)).center;
}

std::optional<Vec> find_violation_branch_bound(const ConvexRegion& base, const EpochState& s, const AlgoParams& p,
                                               double nu, ViolationStats* stats) {
  const int n = static_cast<int>(s.records.size());
  const int b0 = static_cast<int>(base.rows());
  std::size_t nodes = 0, solves = 0;
  std::vector<char> removed(n, 0), kept(n, 0);

  // Record ids of an infeasible subsystem, or nullopt with the witness set.
  auto probe = [&](const std::vector<char>& drop, Vec* witness) -> std::optional<std::vector<int>> {
    ++solves;
    const ChebyshevResult c = chebyshev(with_records(base, s, nu, drop));
    if (c.feasible) {
      if (witness) *witness = c.center;
      return std::nullopt;
    }
    // Map region rows back to record ids.
    std::vector<int> ids;
    std::vector<int> order;
    for (int t = 0; t < n; ++t)
      if (!drop[t]) order.push_back(t);
    for (int row : c.certificate)
      if (row >= b0) ids.push_back(order[row - b0]);
    return ids;
  };

  std::function<std::optional<Vec>(int)> search = [&](int budget) -> std::optional<Vec> {
    if (++nodes > p.max_nodes) throw std::runtime_error("certificate search exceeded node limit");
    Vec w;
    auto cert = probe(removed, &w);
    if (!cert) return w;
    if (budget == 0) return std::nullopt;
    std::vector<int> branch;
    for (int t : *cert)
      if (!kept[t]) branch.push_back(t);
    if (branch.empty()) return std::nullopt;

    // Disjoint infeasible groups each force one more removal.
    {
      std::vector<char> drop = removed;
      int groups = 1;
      for (int t : branch) drop[t] = 1;
      while (groups <= budget) {
        auto g = probe(drop, nullptr);
        if (!g) break;
        int fresh = 0;
        for (int t : *g)
          if (!kept[t]) {
            drop[t] = 1;
            ++fresh;
          }
        if (fresh == 0) return std::nullopt;
        ++groups;
      }
      if (groups > budget) return std::nullopt;
    }

    std::vector<int> pinned;
    std::optional<Vec> found;
    for (int t : branch) {
      removed[t] = 1;
      found = search(budget - 1);
      removed[t] = 0;
      if (found) break;
      // Later siblings keep t, which makes the branches disjoint.
      kept[t] = 1;
      pinned.push_back(t);
    }
    for (int t : pinned) kept[t] = 0;
    return found;
  };

  auto res = search(std::min(p.budget, n));
  if (stats) {
    stats->nodes += nodes;
    stats->lp_solves += solves;
  }
  return res;
}

std::optional<Vec> find_violation(const ConvexRegion& base, const EpochState& s, const AlgoParams& p, double nu,
                                  ViolationStats* stats) {
  const int n = static_cast<int>(s.records.size());
  if (kernels::binomial(n, std::min(p.budget, n)) <= static_cast<double>(p.max_subsets))
    return find_violation_enumerate(base, s, p, nu, p.policy, stats);
  return find_violation_branch_bound(base, s, p, nu, stats);
}

CutResult separating_cut(const EpochState& s, const AlgoParams& p, Rng rng) {
  const Subspace& L = s.L();
  const int k = L.size();
  if (k == 0) throw std::logic_error("separating cut needs a large dimension");
  const double nu_cert = p.certificate_margin ? p.nu : 0.0;
  const double hs = p.nu_hi;  // homogeneous coordinate

  CutResult res;
  const auto lms = landmarks(s, p);
  std::vector<int> idx;
  for (std::size_t i = 0; i < lms.size(); ++i) {
    res.landmark_scores.push_back(undesirability(lms[i], p.nu, s));
    if (res.landmark_scores.back() >= p.pigeonhole_level()) idx.push_back(static_cast<int>(i));
  }
  if (idx.empty())
    for (std::size_t i = 0; i < lms.size(); ++i) idx.push_back(static_cast<int>(i));

  auto embed = [&](const Vec& pt) {
    Vec v(k + 1);
    v.head(k) = L.coords(pt - s.kappa);
    v[k] = hs;
    return v;
  };

  int rejected = 0;
  for (int outer = 1; outer <= p.max_outer; ++outer) {
    res.outer = outer;
    const Vec& pstar = lms[idx[rng.below(idx.size())]];
    const Vec q = sample_ball(pstar, p.zeta, L, rng);
    const int uq = undesirability(q, p.nu, s);
    const int need = rejected < kStrictProbeTries ? p.pigeonhole_level() : p.budget + 1;
    if (uq < need) {
      ++rejected;
      continue;
    }
    rejected = 0;
    ++res.perceptron_runs;

    Vec w = Vec::Zero(k + 1);
    std::size_t mistakes = 0;
    bool accepted = false;
    const Vec eq = embed(q), ek = embed(s.kappa);
    while (static_cast<double>(mistakes) <= p.mistake_cap) {
      int m = 0;
      if (w.dot(eq) >= 0.0) {
        w -= eq / eq.norm();
        ++m;
      }
      if (w.dot(ek) <= 0.0) {
        w += ek / ek.norm();
        ++m;
      }
      const Vec hfull = L.basis * w.head(k);
      const double hn = hfull.norm();
      std::optional<Vec> z;
      if (hn > 1e-14) {
        ConvexRegion base = s.K.region();
        base.add(hfull / hn, (hfull.dot(s.kappa) - w[k] * hs) / hn);
        z = find_violation(base, s, p, nu_cert, &res.stats);
      } else if (w[k] * hs <= 0.0) {
        z = find_violation(s.K.region(), s, p, nu_cert, &res.stats);
      }
      if (z) {
        const Vec ez = embed(*z);
        w += ez / ez.norm();
        ++m;
      }
      if (m == 0 && hn > 1e-14) {
        res.cut = Halfspace(hfull / hn, (hfull.dot(s.kappa) - w[k] * hs) / hn, +1);
        res.mistakes = mistakes;
        res.landmark = pstar;
        res.q = q;
        accepted = true;
        break;
      }
      mistakes += static_cast<std::size_t>(m);
    }
    if (accepted) return res;
  }
  throw std::runtime_error("separating cut search exhausted");
}

bool apply_cut(EpochState& s, const AlgoParams& p, const Halfspace& cut) {
  std::vector<Halfspace> cuts = s.K.cuts();
  cuts.push_back(cut);
  if (!feasible(cuts)) return false;
  s.K.add(cut);
  Mat small = s.S().basis;
  const Vec hl = s.L().project(cut.normal);
  if (hl.norm() > kDegenerate) {
    const Vec hu = hl / hl.norm();
    if (width(s.K, hu) <= p.delta) small = append_col(small, hu);
  }
  const Mat large = gram_schmidt(s.L().basis, small);
  demote_thin(s, p, small, large);
  return true;
}

EpochState epoch_update(const EpochState& s, const AlgoParams& p, const Halfspace& cut, Rng rng) {
  EpochState n = s;
  if (!apply_cut(n, p, cut)) throw std::logic_error("epoch cut empties the knowledge set");
  n.records.clear();
  n.kappa = approx_centroid(n.K, n.S(), rng, p.centroid_tol, p.centroid);
  ++n.phi;
  return n;
}

CorpvKnown::CorpvKnown(AlgoParams p, LossKind loss, NoiseModel noise, Rng rng, std::optional<KnowledgeSet> K0)
    : params_(std::move(p)), loss_(loss), noise_(noise), rng_(rng) {
  state_ = initial_state(params_, K0 ? *K0 : KnowledgeSet(params_.d), rng_.substream("centroid", 1));
}

EpochReport CorpvKnown::close_epoch() {
  EpochReport rep;
  rep.phi = state_.phi;
  rep.cut = separating_cut(state_, params_, rng_.substream("cut", state_.phi));
  rep.before = state_;
  state_ = epoch_update(state_, params_, rep.cut.cut, rng_.substream("centroid", state_.phi + 1));
  return rep;
}

std::optional<EpochReport> CorpvKnown::update(const Vec& x, const QueryDecision& q, int y, std::size_t round) {
  if (q.branch != Branch::Explore) return std::nullopt;
  if (!record_explore(state_, params_, x, q.omega_raw, y, round)) return std::nullopt;
  return close_epoch();
}

}  // namespace corsearch
