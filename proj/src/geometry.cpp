#include "corsearch/geometry.hpp"

#include <cmath>
#include <stdexcept>

#include "corsearch/kernels.hpp"
#include "corsearch/lp.hpp"

namespace corsearch {

namespace {
constexpr double kBallTol = 1e-9;
constexpr int kKelleyIters = 400;
}  // namespace

Halfspace::Halfspace(Vec n, double c, int orient) : normal(std::move(n)), intercept(c), orientation(orient) {
  if (std::abs(normal.norm() - 1.0) > kOrthoTol) throw std::invalid_argument("halfspace normal must be unit");
  if (orient != 1 && orient != -1) throw std::invalid_argument("halfspace orientation must be +1 or -1");
}

bool ConvexRegion::contains(const Vec& x, double slack) const {
  if (x.norm() > radius + slack) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].dot(x) > b[i] + slack) return false;
  return true;
}

std::optional<std::pair<double, Vec>> maximize(const ConvexRegion& region, const Vec& c) {
  const int n = region.dim;
  const double rho = region.radius;
  if (n == 0) {
    for (double bi : region.b)
      if (bi < -kFeasSlack) return std::nullopt;
    return std::make_pair(0.0, Vec());
  }
  lp::Solver s(Vec::Constant(n, -rho), Vec::Constant(n, rho));
  for (std::size_t i = 0; i < region.rows(); ++i) s.add_row(region.a[i], region.b[i]);
  const double cn = c.norm();
  if (cn > 0.0) s.add_row(c / cn, rho);
  Vec x;
  for (int it = 0; it < kKelleyIters; ++it) {
    const lp::Solution sol = s.maximize(c);
    if (sol.status == lp::Status::Infeasible) return std::nullopt;
    x = sol.x;
    const double nx = x.norm();
    if (nx <= rho + kBallTol) return std::make_pair(c.dot(x), x);
    s.add_row(x / nx, rho);
  }
  // Tangent cuts converge from outside; the residual is far below every
  // tolerance used downstream.
  x *= rho / x.norm();
  return std::make_pair(c.dot(x), x);
}

ChebyshevResult chebyshev(const ConvexRegion& region) {
  ChebyshevResult res;
  const int n = region.dim;
  const double rho = region.radius;
  double scale = 0.0;
  std::vector<int> rowmap;
  for (std::size_t i = 0; i < region.rows(); ++i) {
    const double an = region.a[i].norm();
    if (an == 0.0) {
      if (region.b[i] < -kFeasSlack) {
        res.certificate = {static_cast<int>(i)};
        return res;
      }
      continue;
    }
    scale = std::max(scale, std::abs(region.b[i]) / an);
    rowmap.push_back(static_cast<int>(i));
  }
  if (n == 0) {
    res.feasible = true;
    res.center = Vec();
    res.radius = rho;
    return res;
  }
  Vec lo = Vec::Constant(n + 1, -rho), hi = Vec::Constant(n + 1, rho);
  lo[n] = -(scale + std::sqrt(static_cast<double>(n)) * rho + 1.0);
  lp::Solver s(lo, hi);
  Vec row(n + 1);
  for (int i : rowmap) {
    row.head(n) = region.a[i];
    row[n] = region.a[i].norm();
    s.add_row(row, region.b[i]);
  }
  const int user_rows = static_cast<int>(rowmap.size());
  Vec c = Vec::Zero(n + 1);
  c[n] = 1.0;
  for (int it = 0; it < kKelleyIters; ++it) {
    const lp::Solution sol = s.maximize(c);
    const bool lp_infeasible = sol.status == lp::Status::Infeasible;
    const double r = lp_infeasible ? -1.0 : sol.x[n];
    if (lp_infeasible || r < -kFeasSlack) {
      for (int k : sol.rows)
        if (k < user_rows) res.certificate.push_back(rowmap[k]);
      return res;
    }
    const Vec xc = sol.x.head(n);
    const double nx = xc.norm();
    if (nx + r <= rho + kBallTol || it + 1 == kKelleyIters) {
      res.feasible = true;
      res.center = nx > rho ? Vec(xc * (rho / nx)) : xc;
      res.radius = r;
      return res;
    }
    row.head(n) = xc / nx;
    row[n] = 1.0;
    s.add_row(row, rho);
  }
  return res;
}

KnowledgeSet::KnowledgeSet(int d, std::vector<Halfspace> cuts) : dim_(d), cuts_(std::move(cuts)) {
  for (const auto& h : cuts_)
    if (h.normal.size() != d) throw std::invalid_argument("cut dimension mismatch");
}

void KnowledgeSet::add(const Halfspace& h) {
  if (h.normal.size() != dim_) throw std::invalid_argument("cut dimension mismatch");
  cuts_.push_back(h);
}

bool KnowledgeSet::contains(const Vec& x, double slack) const {
  if (x.norm() > 1.0 + slack) return false;
  for (const auto& h : cuts_)
    if (!h.contains(x, slack)) return false;
  return true;
}

ConvexRegion KnowledgeSet::region() const {
  ConvexRegion r(dim_, 1.0);
  for (const auto& h : cuts_) r.add(h);
  return r;
}

Subspace Subspace::complement() const {
  const int d = ambient();
  const int k = size();
  if (k == 0) return full(d);
  if (k == d) return none(d);
  Eigen::HouseholderQR<Mat> qr(basis);
  const Mat q = qr.householderQ() * Mat::Identity(d, d);
  return Subspace(q.rightCols(d - k));
}

bool Subspace::orthonormal(double tol) const {
  const Mat g = basis.transpose() * basis;
  return (g - Mat::Identity(size(), size())).cwiseAbs().maxCoeff() <= tol || size() == 0;
}

Vec project_point(const Vec& x, const Subspace& L) { return L.project(x); }

std::pair<double, double> extent(const KnowledgeSet& K, const Vec& u) {
  const ConvexRegion r = K.region();
  const auto hi = maximize(r, u);
  const auto lo = maximize(r, -u);
  if (!hi || !lo) throw std::runtime_error("empty knowledge set");
  return {-lo->first, hi->first};
}

double width(const KnowledgeSet& K, const Vec& u) {
  const auto [lo, hi] = extent(K, u);
  return std::max(0.0, hi - lo);
}

bool feasible(const std::vector<Halfspace>& cuts, const std::vector<Halfspace>& extra, Vec* witness) {
  if (cuts.empty() && extra.empty()) {
    if (witness) *witness = Vec();
    return true;
  }
  const int d = static_cast<int>(cuts.empty() ? extra.front().normal.size() : cuts.front().normal.size());
  ConvexRegion r(d, 1.0);
  for (const auto& h : cuts) r.add(h);
  for (const auto& h : extra) r.add(h);
  const ChebyshevResult c = chebyshev(r);
  if (c.feasible && witness) *witness = c.center;
  return c.feasible;
}

Mat gram_schmidt(const Mat& vectors, const Mat& against, double tol) {
  const int d = static_cast<int>(vectors.rows());
  std::vector<Vec> out;
  for (int j = 0; j < vectors.cols(); ++j) {
    Vec v = vectors.col(j);
    for (int pass = 0; pass < 2; ++pass) {
      if (against.cols() > 0) v -= against * (against.transpose() * v);
      for (const auto& q : out) v -= q.dot(v) * q;
    }
    const double nv = v.norm();
    if (nv > tol) out.push_back(v / nv);
  }
  Mat m(d, static_cast<int>(out.size()));
  for (std::size_t j = 0; j < out.size(); ++j) m.col(static_cast<int>(j)) = out[j];
  return m;
}

Cylinder::Cylinder(const KnowledgeSet& K, Subspace S) : K_(&K), S_(std::move(S)), L_(S_.complement()) {
  for (int i = 0; i < S_.size(); ++i) ext_.push_back(corsearch::extent(K, S_.basis.col(i)));
}

std::pair<double, double> Cylinder::extent(const Vec& u) const {
  const Vec ul = L_.project(u);
  double lo = 0.0, hi = 0.0;
  if (ul.norm() > 1e-15) std::tie(lo, hi) = corsearch::extent(*K_, ul);
  for (int i = 0; i < S_.size(); ++i) {
    const double a = u.dot(S_.basis.col(i));
    const auto [sl, sh] = ext_[i];
    lo += a >= 0.0 ? a * sl : a * sh;
    hi += a >= 0.0 ? a * sh : a * sl;
  }
  return {lo, hi};
}

double Cylinder::width(const Vec& u) const {
  const auto [lo, hi] = extent(u);
  return std::max(0.0, hi - lo);
}

bool Cylinder::projection_contains(const Vec& z, double slack) const {
  if (S_.size() == 0) return K_->contains(z, slack);
  const double zn2 = z.squaredNorm();
  if (zn2 > (1.0 + slack) * (1.0 + slack)) return false;
  ConvexRegion r(S_.size(), std::sqrt(std::max(0.0, 1.0 - zn2)));
  for (const auto& h : K_->cuts()) r.add(S_.basis.transpose() * h.row(), h.rhs() - h.row().dot(z));
  if (S_.size() == 1) {
    // One free coordinate: intersect intervals directly.
    double lo = -r.radius, hi = r.radius;
    for (std::size_t i = 0; i < r.rows(); ++i) {
      const double a = r.a[i][0];
      if (std::abs(a) < 1e-15) {
        if (r.b[i] < -slack) return false;
      } else if (a > 0) {
        hi = std::min(hi, r.b[i] / a);
      } else {
        lo = std::max(lo, r.b[i] / a);
      }
    }
    return lo <= hi + slack;
  }
  return chebyshev(r).feasible;
}

bool Cylinder::contains(const Vec& p, double slack) const {
  for (int i = 0; i < S_.size(); ++i) {
    const double v = p.dot(S_.basis.col(i));
    if (v < ext_[i].first - slack || v > ext_[i].second + slack) return false;
  }
  return projection_contains(L_.project(p), slack);
}

Cylinder cylindrify(const KnowledgeSet& K, const Subspace& S) { return Cylinder(K, S); }

namespace {

bool stop(const kernels::Moments& m, double tol, const CentroidOptions& opt) {
  if (m.count >= opt.max_samples) return true;
  return m.count >= opt.min_samples && m.std_error() <= tol / 3.0;
}

CentroidEstimate full_body_centroid(const KnowledgeSet& K, Rng& rng, double tol, const CentroidOptions& opt) {
  const int d = K.dim();
  const ConvexRegion region = K.region();
  const ChebyshevResult start = chebyshev(region);
  if (!start.feasible) throw std::runtime_error("empty knowledge set");
  if (start.radius <= 1e-12) return {start.center, 0.0, 0};
  kernels::HitAndRun chains(region, start.center, rng.substream("hit-and-run", rng()), opt.chains, d, 100 * d);
  kernels::Moments m(d);
  while (!stop(m, tol, opt)) chains.advance(opt.batch, opt.policy, m);
  return {m.mean(), m.std_error(), m.count};
}

}  // namespace

CentroidEstimate approx_centroid_detail(const KnowledgeSet& K, const Subspace& S, Rng rng, double tol,
                                        const CentroidOptions& opt) {
  if (!(tol > 0.0)) throw std::invalid_argument("centroid tolerance must be positive");
  if (S.size() == 0) return full_body_centroid(K, rng, tol, opt);

  const Cylinder cyl(K, S);
  const Subspace& L = cyl.large();
  Vec point = Vec::Zero(K.dim());
  for (int i = 0; i < S.size(); ++i) {
    const auto [lo, hi] = cyl.small_extents()[i];
    point += 0.5 * (lo + hi) * S.basis.col(i);
  }
  CentroidEstimate est{point, 0.0, 0};
  if (L.size() == 0) return est;
  if (L.size() == 1) {
    const auto [lo, hi] = extent(K, L.basis.col(0));
    est.point += 0.5 * (lo + hi) * L.basis.col(0);
    return est;
  }
  // Uniform points of the projection by rejection from its bounding box.
  const int k = L.size();
  Vec lo(k), hi(k);
  for (int i = 0; i < k; ++i) std::tie(lo[i], hi[i]) = extent(K, L.basis.col(i));
  auto inside = [&](const Vec& c) { return cyl.projection_contains(L.basis * c, 0.0); };
  kernels::Moments m(k);
  std::size_t proposals = 0;
  const std::size_t chunk = opt.batch * static_cast<std::size_t>(std::max(1, opt.chains));
  while (!stop(m, tol, opt)) {
    proposals += kernels::rejection_moments(inside, lo, hi, rng, chunk, opt.policy, m);
    if (m.count == 0 && proposals > 64 * chunk) throw std::runtime_error("projection has negligible volume");
  }
  est.point += L.basis * m.mean();
  est.std_error = m.std_error();
  est.samples = m.count;
  return est;
}

Vec approx_centroid(const KnowledgeSet& K, const Subspace& S, Rng rng, double tol, const CentroidOptions& opt) {
  return approx_centroid_detail(K, S, std::move(rng), tol, opt).point;
}

Vec sample_ball(const Vec& center, double radius, const Subspace& L, Rng& rng) {
  if (!(radius > 0.0)) throw std::invalid_argument("ball radius must be positive");
  const int k = L.size();
  if (k == 0) return center;
  Vec g(k);
  double ng = 0.0;
  while (ng == 0.0) {
    for (int i = 0; i < k; ++i) g[i] = rng.normal();
    ng = g.norm();
  }
  const double r = radius * std::pow(rng.uniform(), 1.0 / k);
  return center + L.basis * (g * (r / ng));
}

VolumeEstimate mc_volume(const KnowledgeSet& K, const Subspace& L, Rng rng, std::size_t n, ExecPolicy policy) {
  if (n == 0) throw std::invalid_argument("mc_volume needs at least one sample");
  const int k = L.size();
  if (k == 0) return {1.0, 0.0};
  Vec lo(k), hi(k);
  for (int i = 0; i < k; ++i) std::tie(lo[i], hi[i]) = extent(K, L.basis.col(i));
  if (k == 1) return {hi[0] - lo[0], 0.0};
  double box = 1.0;
  for (int i = 0; i < k; ++i) box *= std::max(0.0, hi[i] - lo[i]);
  if (box == 0.0) return {0.0, 0.0};
  const Cylinder cyl(K, L.complement());
  auto inside = [&](const Vec& c) { return cyl.projection_contains(L.basis * c, 0.0); };
  const std::size_t hits = kernels::count_inside(inside, lo, hi, rng.substream("mc-volume"), n, policy);
  const double p = static_cast<double>(hits) / static_cast<double>(n);
  return {box * p, box * std::sqrt(p * (1.0 - p) / static_cast<double>(n))};
}

}  // namespace corsearch
