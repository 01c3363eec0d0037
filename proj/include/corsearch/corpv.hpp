#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "corsearch/behaviors.hpp"
#include "corsearch/geometry.hpp"
#include "corsearch/losses.hpp"

namespace corsearch {

struct AlgoParams {
  int d = 2;
  double eps = 0.1;
  int budget = 1;  // c-bar
  double delta = 0.0;
  double nu_hi = 0.0;
  double nu_lo = 0.0;
  double nu = 0.0;
  double zeta = 0.0;
  double margin_shift = 0.0;
  int tau = 1;
  double mistake_cap = 0.0;

  // Engineering knobs.
  std::size_t max_subsets = 512;  // above this the certificate uses branch and bound
  std::size_t max_nodes = 2'000'000;
  int max_outer = 20000;
  double centroid_tol = 0.0;  // defaults to nu_hi
  CentroidOptions centroid;
  ExecPolicy policy = ExecPolicy::Parallel;
  bool certificate_margin = true;  // tests flip this to inject a defect

  static AlgoParams make(int d, double eps, int budget, double margin_shift = 0.0);
  int pigeonhole_level() const { return budget * (d + 1) + 1; }
};

struct ExploreRecord {
  Vec context;
  Vec direction;       // sign * Pi_L x / |Pi_L x|
  double scale = 1.0;  // |Pi_L x|
  double intercept = 0.0;  // sign * <x, kappa>
  int sign = 1;
  std::size_t round = 0;

  Vec normal() const { return scale * direction; }  // sign * Pi_L x
};

struct EpochState {
  std::size_t phi = 1;
  KnowledgeSet K;
  DimensionSplit split;
  std::vector<std::pair<double, double>> small_extents;
  Vec kappa;
  std::vector<ExploreRecord> records;

  const Subspace& S() const { return split.small; }
  const Subspace& L() const { return split.large; }
};

EpochState initial_state(const AlgoParams& p, const KnowledgeSet& K0, Rng rng);

double cyl_width(const EpochState& s, const Vec& x);

struct QueryDecision {
  Branch branch = Branch::Explore;
  double omega = 0.0;      // submitted query, in [0, 1]
  double omega_raw = 0.0;  // <x, kappa> before clamping
  double width = 0.0;
};

QueryDecision step(const EpochState& s, const AlgoParams& p, const Vec& x, const LossKind& loss,
                   const NoiseModel& noise);
// Returns true when the epoch is complete.
bool record_explore(EpochState& s, const AlgoParams& p, const Vec& x, double omega_raw, int y, std::size_t round);

int undesirability(const Vec& point, double nu, const EpochState& s);
std::vector<Vec> landmarks(const EpochState& s, const AlgoParams& p);

// Rows a.x <= b of record t tightened by margin nu (unit normals).
std::pair<Vec, double> record_row(const ExploreRecord& r, const Vec& kappa, double nu);

// A point of `base` with undesirability <= budget, or nullopt. `base` is a
// region in R^d; the records are added as rows with margin nu.
struct ViolationStats {
  std::size_t lp_solves = 0;
  std::size_t nodes = 0;
};
std::optional<Vec> find_violation(const ConvexRegion& base, const EpochState& s, const AlgoParams& p, double nu,
                                  ViolationStats* stats = nullptr);
std::optional<Vec> find_violation_enumerate(const ConvexRegion& base, const EpochState& s, const AlgoParams& p,
                                            double nu, ExecPolicy policy, ViolationStats* stats = nullptr);
std::optional<Vec> find_violation_branch_bound(const ConvexRegion& base, const EpochState& s, const AlgoParams& p,
                                               double nu, ViolationStats* stats = nullptr);

struct CutResult {
  Halfspace cut;
  std::size_t mistakes = 0;   // mistakes of the accepting Perceptron run
  std::size_t perceptron_runs = 0;
  std::size_t outer = 0;
  Vec landmark;
  Vec q;
  std::vector<int> landmark_scores;
  ViolationStats stats;
};

CutResult separating_cut(const EpochState& s, const AlgoParams& p, Rng rng);

EpochState epoch_update(const EpochState& s, const AlgoParams& p, const Halfspace& cut, Rng rng);

// Adds `cut` to K and refreshes the small/large split; used both by the
// epoch update and by cross-layer eliminations. Returns false if the
// intersection is empty.
bool apply_cut(EpochState& s, const AlgoParams& p, const Halfspace& cut);

struct EpochReport {
  std::size_t phi = 0;
  EpochState before;
  CutResult cut;
};

class CorpvKnown {
 public:
  CorpvKnown(AlgoParams p, LossKind loss, NoiseModel noise, Rng rng, std::optional<KnowledgeSet> K0 = std::nullopt);

  QueryDecision query(const Vec& x) const { return step(state_, params_, x, loss_, noise_); }
  std::optional<EpochReport> update(const Vec& x, const QueryDecision& q, int y, std::size_t round);

  const EpochState& state() const { return state_; }
  EpochState& mutable_state() { return state_; }
  const AlgoParams& params() const { return params_; }
  std::size_t epochs_completed() const { return state_.phi - 1; }

  // Ends the current epoch with the given records already in place.
  EpochReport close_epoch();

 private:
  AlgoParams params_;
  LossKind loss_;
  NoiseModel noise_;
  Rng rng_;
  EpochState state_;
};

}  // namespace corsearch
