#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "corsearch/corpv.hpp"

namespace corsearch {

int num_layers(std::size_t T);
// Budget 2 log2(T / beta), rounded up.
int agnostic_budget(std::size_t T, double beta);
// P(j) = 2^-j for j = 2..num_layers(T); the rest of the mass goes to j = 1.
int sample_layer(Rng& rng, std::size_t T);
double layer_probability(int j, std::size_t T);

struct LayerState {
  EpochState state;
  std::vector<std::uint64_t> cut_ids;  // every cut this layer's K has received
  std::size_t resets = 0;               // times the layer was re-seeded from the one above
};

struct AiDecision {
  QueryDecision q;
  int sampled = 1;  // j_t
  int layer = 1;    // layer whose recommendation was played
};

struct AiEpochReport {
  int layer = 1;
  EpochReport report;
  std::vector<int> advanced;  // lower layers whose epoch advanced
  std::vector<int> reset;     // lower layers re-seeded because the cut emptied them
};

class CorpvAi {
 public:
  // `p.budget` is overwritten with the agnostic budget (doubled when
  // p.margin_shift > 0).
  CorpvAi(AlgoParams p, std::size_t T, double beta, LossKind loss, NoiseModel noise, Rng rng,
          std::optional<KnowledgeSet> K0 = std::nullopt);

  AiDecision query(const Vec& x);
  std::optional<AiEpochReport> update(const Vec& x, const AiDecision& d, int y, std::size_t round);

  int layers() const { return static_cast<int>(bank_.size()); }
  const LayerState& layer(int j) const { return bank_.at(j - 1); }
  const AlgoParams& params() const { return params_; }
  std::size_t horizon() const { return T_; }
  double beta() const { return beta_; }

 private:
  QueryDecision exploit_from(int j, const Vec& x) const;
  AlgoParams params_;
  std::size_t T_;
  double beta_;
  LossKind loss_;
  NoiseModel noise_;
  Rng rng_, sampler_;
  std::vector<LayerState> bank_;
  std::vector<Rng> layer_rng_;
  std::uint64_t next_cut_id_ = 0;
};

// Corrupted rounds routed to each layer (index j - 1).
std::vector<std::size_t> corruption_tolerance_audit(const std::vector<int>& layer_of_round,
                                                    const std::vector<bool>& corrupted, int layers);

}  // namespace corsearch
