#include "corsearch/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace corsearch {

namespace {
constexpr double kDegenerate = 1e-12;
}

PvParams PvParams::make(int d, double eps) {
  if (d < 1) throw std::invalid_argument("dimension must be >= 1");
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  PvParams p;
  p.d = d;
  p.eps = eps;
  p.delta_prime = eps * eps / (16.0 * d * (d + 1.0) * (d + 1.0));
  p.centroid_tol = p.delta_prime / 4.0;
  return p;
}

ProjectedVolume::ProjectedVolume(PvParams p, LossKind loss, NoiseModel noise, Rng rng,
                                 std::optional<KnowledgeSet> K0)
    : params_(std::move(p)), loss_(loss), noise_(noise), rng_(rng) {
  state_.K = K0 ? *K0 : KnowledgeSet(params_.d);
  if (state_.K.dim() != params_.d) throw std::invalid_argument("initial knowledge set has wrong dimension");
  if (!feasible(state_.K.cuts())) throw std::runtime_error("empty knowledge set");
  state_.split.small = Subspace::none(params_.d);
  state_.split.large = Subspace::full(params_.d);
  state_.split.delta = params_.delta_prime;
  refresh_split(Vec::Zero(params_.d));
  state_.kappa = approx_centroid(state_.K, state_.S(), rng_.substream("centroid", 0), params_.centroid_tol,
                                 params_.centroid);
}

void ProjectedVolume::refresh_split(const Vec& cut_normal) {
  Mat small = state_.S().basis;
  const Vec hl = state_.L().project(cut_normal);
  if (hl.norm() > kDegenerate) {
    const Vec u = hl / hl.norm();
    if (width(state_.K, u) <= params_.delta_prime) {
      Mat m(params_.d, small.cols() + 1);
      m << small, u;
      small = m;
    }
  }
  const Mat large = gram_schmidt(state_.L().basis, small);
  std::vector<Vec> keep;
  for (int i = 0; i < large.cols(); ++i) {
    const Vec l = large.col(i);
    if (width(state_.K, l) <= params_.delta_prime) {
      Mat m(params_.d, small.cols() + 1);
      m << small, l;
      small = m;
    } else {
      keep.push_back(l);
    }
  }
  Mat L(params_.d, static_cast<int>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) L.col(static_cast<int>(i)) = keep[i];
  state_.split.small = Subspace(small);
  state_.split.large = Subspace(L);
}

QueryDecision ProjectedVolume::query(const Vec& x) const {
  if (std::abs(x.norm() - 1.0) > 1e-9) throw std::invalid_argument("context must be a unit vector");
  QueryDecision q;
  q.omega_raw = x.dot(state_.kappa);
  q.width = cylindrify(state_.K, state_.S()).width(x);
  if (q.width > params_.eps) {
    q.branch = Branch::Explore;
    q.omega = std::clamp(q.omega_raw, 0.0, 1.0);
  } else {
    q.branch = Branch::Exploit;
    q.omega = loss_.type == LossType::EpsBall ? std::clamp(q.omega_raw, 0.0, 1.0)
                                              : exploit_query(loss_, noise_, state_.K, x, state_.kappa);
  }
  return q;
}

void ProjectedVolume::update(const Vec& x, const QueryDecision& q, int y) {
  if (y != 1 && y != -1) throw std::invalid_argument("feedback must be +1 or -1");
  if (q.branch != Branch::Explore) return;
  // The agent answered about the submitted query, so that is where the cut goes.
  const Halfspace cut(x, q.omega, y);
  std::vector<Halfspace> cuts = state_.K.cuts();
  cuts.push_back(cut);
  if (!feasible(cuts)) throw std::runtime_error("empty knowledge set");
  state_.K.add(cut);
  ++state_.cuts;
  refresh_split(x);
  state_.kappa = approx_centroid(state_.K, state_.S(), rng_.substream("centroid", state_.cuts),
                                 params_.centroid_tol, params_.centroid);
}

}  // namespace corsearch
