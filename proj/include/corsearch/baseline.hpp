#pragma once

#include <optional>

#include "corsearch/corpv.hpp"

namespace corsearch {

struct PvParams {
  int d = 2;
  double eps = 0.1;
  double delta_prime = 0.0;  // eps^2 / (16 d (d+1)^2)
  double centroid_tol = 0.0;  // delta_prime / 4
  CentroidOptions centroid{400, 200'000, 128, 4, ExecPolicy::Parallel};

  static PvParams make(int d, double eps);
};

struct PvState {
  KnowledgeSet K;
  DimensionSplit split;
  Vec kappa;
  std::size_t cuts = 0;

  const Subspace& S() const { return split.small; }
  const Subspace& L() const { return split.large; }
};

// The uncorrupted ProjectedVolume learner: queries the centroid of the
// cylindrified knowledge set and cuts on every explore round.
class ProjectedVolume {
 public:
  ProjectedVolume(PvParams p, LossKind loss, NoiseModel noise, Rng rng, std::optional<KnowledgeSet> K0 = std::nullopt);

  QueryDecision query(const Vec& x) const;
  // Applies the cut of an explore round; throws "empty knowledge set" if the
  // feedback is inconsistent with every remaining parameter.
  void update(const Vec& x, const QueryDecision& q, int y);

  const PvState& state() const { return state_; }
  const PvParams& params() const { return params_; }

 private:
  void refresh_split(const Vec& cut_normal);
  PvParams params_;
  LossKind loss_;
  NoiseModel noise_;
  Rng rng_;
  PvState state_;
};

}  // namespace corsearch
