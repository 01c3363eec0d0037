#include "corsearch/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace corsearch {

int num_layers(std::size_t T) {
  if (T < 2) return 1;
  return std::max(1, static_cast<int>(std::ceil(std::log2(static_cast<double>(T)) - 1e-12)));
}

int agnostic_budget(std::size_t T, double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0, 1)");
  return static_cast<int>(std::ceil(2.0 * std::log2(static_cast<double>(std::max<std::size_t>(T, 1)) / beta) - 1e-12));
}

double layer_probability(int j, std::size_t T) {
  const int J = num_layers(T);
  if (j < 1 || j > J) return 0.0;
  if (j >= 2) return std::ldexp(1.0, -j);
  double rest = 1.0;
  for (int k = 2; k <= J; ++k) rest -= std::ldexp(1.0, -k);
  return rest;
}

int sample_layer(Rng& rng, std::size_t T) {
  const int J = num_layers(T);
  double u = rng.uniform();
  for (int j = 2; j <= J; ++j) {
    const double pj = std::ldexp(1.0, -j);
    if (u < pj) return j;
    u -= pj;
  }
  return 1;
}

CorpvAi::CorpvAi(AlgoParams p, std::size_t T, double beta, LossKind loss, NoiseModel noise, Rng rng,
                 std::optional<KnowledgeSet> K0)
    : params_(std::move(p)), T_(T), beta_(beta), loss_(loss), noise_(noise), rng_(rng),
      sampler_(rng.substream("layer-sampler")) {
  // A noise margin means boundedly rational agents, which need twice the budget.
  const int budget = agnostic_budget(T, beta) * (p.margin_shift > 0.0 ? 2 : 1);
  params_ = AlgoParams::make(params_.d, params_.eps, budget, params_.margin_shift);
  params_.max_subsets = p.max_subsets;
  params_.max_nodes = p.max_nodes;
  params_.max_outer = p.max_outer;
  params_.centroid = p.centroid;
  params_.policy = p.policy;
  params_.certificate_margin = p.certificate_margin;
  if (p.centroid_tol > 0.0) params_.centroid_tol = p.centroid_tol;

  const KnowledgeSet K = K0 ? *K0 : KnowledgeSet(params_.d);
  const int J = num_layers(T);
  for (int j = 1; j <= J; ++j) {
    // Layer 1 reuses the root stream so a one-layer bank replays CorpvKnown.
    layer_rng_.push_back(j == 1 ? rng_ : rng_.substream("layer", static_cast<std::uint64_t>(j)));
    LayerState ls;
    ls.state = initial_state(params_, K, layer_rng_.back().substream("centroid", 1));
    bank_.push_back(std::move(ls));
  }
}

QueryDecision CorpvAi::exploit_from(int j, const Vec& x) const {
  const EpochState& s = bank_[j - 1].state;
  QueryDecision q;
  q.branch = Branch::Exploit;
  q.omega_raw = x.dot(s.kappa);
  q.width = s.L().size() == 0 ? 0.0 : cyl_width(s, x);
  q.omega = loss_.type == LossType::EpsBall ? std::clamp(q.omega_raw, 0.0, 1.0)
                                            : exploit_query(loss_, noise_, s.K, x, s.kappa);
  return q;
}

AiDecision CorpvAi::query(const Vec& x) {
  AiDecision d;
  d.sampled = sample_layer(sampler_, T_);
  d.layer = d.sampled;
  d.q = step(bank_[d.sampled - 1].state, params_, x, loss_, noise_);
  if (d.q.branch == Branch::Exploit) {
    for (int j = d.sampled; j <= layers(); ++j) {
      const EpochState& s = bank_[j - 1].state;
      if (s.L().size() == 0 || cyl_width(s, x) <= params_.eps) {
        d.layer = j;
        break;
      }
    }
    if (d.layer != d.sampled) d.q = exploit_from(d.layer, x);
  }
  return d;
}

std::optional<AiEpochReport> CorpvAi::update(const Vec& x, const AiDecision& d, int y, std::size_t round) {
  if (d.q.branch != Branch::Explore) return std::nullopt;
  const int jt = d.sampled;
  LayerState& top = bank_[jt - 1];
  if (!record_explore(top.state, params_, x, d.q.omega_raw, y, round)) return std::nullopt;

  AiEpochReport out;
  out.layer = jt;
  Rng& lr = layer_rng_[jt - 1];
  out.report.phi = top.state.phi;
  out.report.cut = separating_cut(top.state, params_, lr.substream("cut", top.state.phi));
  out.report.before = top.state;
  const Halfspace cut = out.report.cut.cut;
  top.state = epoch_update(top.state, params_, cut, lr.substream("centroid", top.state.phi + 1));
  const std::uint64_t id = next_cut_id_++;
  top.cut_ids.push_back(id);

  // Less robust layers inherit the cut, top-down so that a layer emptied by
  // it can be re-seeded from the (already updated) layer above.
  for (int j = jt - 1; j >= 1; --j) {
    LayerState& ls = bank_[j - 1];
    EpochState next = ls.state;
    if (!apply_cut(next, params_, cut)) {
      const std::size_t phi = ls.state.phi;
      ls.state = bank_[j].state;
      ls.state.phi = phi + 1;
      ls.state.records.clear();
      ls.cut_ids = bank_[j].cut_ids;
      ++ls.resets;
      out.reset.push_back(j);
      continue;
    }
    ls.cut_ids.push_back(id);
    const bool small_changed = next.S().size() != ls.state.S().size();
    if (!next.K.contains(ls.state.kappa) || small_changed) {
      next.records.clear();
      ++next.phi;
      next.kappa = approx_centroid(next.K, next.S(), layer_rng_[j - 1].substream("centroid", next.phi),
                                   params_.centroid_tol, params_.centroid);
      out.advanced.push_back(j);
    }
    ls.state = std::move(next);
  }
  return out;
}

std::vector<std::size_t> corruption_tolerance_audit(const std::vector<int>& layer_of_round,
                                                    const std::vector<bool>& corrupted, int layers) {
  if (layer_of_round.size() != corrupted.size()) throw std::invalid_argument("trace columns differ in length");
  std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(layers, 0)), 0);
  for (std::size_t t = 0; t < corrupted.size(); ++t) {
    if (!corrupted[t]) continue;
    const int j = layer_of_round[t];
    if (j < 1 || j > layers) throw std::out_of_range("round routed to an unknown layer");
    ++counts[j - 1];
  }
  return counts;
}

}  // namespace corsearch
