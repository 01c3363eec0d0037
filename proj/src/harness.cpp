#include "corsearch/harness.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

#include <omp.h>

#include "corsearch/gd.hpp"

namespace corsearch {

using nlohmann::json;

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::CorpvKnown: return "corpv_known";
    case Algorithm::CorpvAi: return "corpv_ai";
    case Algorithm::Gd: return "gd";
    case Algorithm::ProjectedVolume: return "projected_volume";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& s) {
  if (s == "corpv_known") return Algorithm::CorpvKnown;
  if (s == "corpv_ai") return Algorithm::CorpvAi;
  if (s == "gd") return Algorithm::Gd;
  if (s == "projected_volume") return Algorithm::ProjectedVolume;
  throw ConfigError("unknown algorithm '" + s + "'");
}

RunError::RunError(std::size_t t, const std::string& what)
    : std::runtime_error("round " + std::to_string(t) + ": " + what), round(t) {}

LossKind ExperimentConfig::loss_kind() const {
  switch (loss) {
    case LossType::EpsBall: return LossKind::eps_ball(eps);
    case LossType::Absolute: return LossKind::absolute();
    case LossType::Pricing: return LossKind::pricing();
  }
  return LossKind::eps_ball(eps);
}

NoiseModel ExperimentConfig::noise() const {
  if (behavior.model != BehaviorModel::Bounded) return NoiseModel::none();
  return NoiseModel::normal(behavior.sigma, behavior.truncation);
}

double ExperimentConfig::noise_margin() const {
  if (behavior.model != BehaviorModel::Bounded || T < 2) return 0.0;
  return std::sqrt(2.0) * behavior.sigma * std::log(static_cast<double>(T));
}

namespace {

json vec_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec json_vec(const json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array of numbers");
  Vec v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(std::string(what) + " must be an array of numbers");
    v[static_cast<int>(i)] = j[i].get<double>();
  }
  return v;
}

json halfspace_json(const Halfspace& h) {
  return {{"normal", vec_json(h.normal)}, {"intercept", h.intercept}, {"orientation", h.orientation}};
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("field '") + key + "' has the wrong type");
  }
}

LossType parse_loss(const std::string& s) {
  if (s == "eps_ball") return LossType::EpsBall;
  if (s == "absolute") return LossType::Absolute;
  if (s == "pricing") return LossType::Pricing;
  throw ConfigError("unknown loss '" + s + "'");
}

BehaviorModel parse_model(const std::string& s) {
  if (s == "fully_rational") return BehaviorModel::FullyRational;
  if (s == "adversarial") return BehaviorModel::Adversarial;
  if (s == "bounded") return BehaviorModel::Bounded;
  throw ConfigError("unknown behavior model '" + s + "'");
}

std::string model_name(BehaviorModel m) {
  switch (m) {
    case BehaviorModel::FullyRational: return "fully_rational";
    case BehaviorModel::Adversarial: return "adversarial";
    case BehaviorModel::Bounded: return "bounded";
  }
  return "?";
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// One query/feedback learner behind a common face.
struct Decision {
  QueryDecision q;
  AiDecision ai;
  int layer = 0;
  int played = 0;
  std::size_t epoch = 0;
};

class Learner {
 public:
  virtual ~Learner() = default;
  virtual Decision query(const Vec& x) = 0;
  virtual void update(const Vec& x, const Decision& d, int y, std::size_t t, const RunHooks& hooks,
                      RegretTrace& tr) = 0;
  virtual bool retains(const Vec& theta) const = 0;
  virtual std::size_t epochs() const = 0;
  virtual json snapshot() const = 0;
};

json state_json(const EpochState& s) {
  json cuts = json::array();
  for (const auto& h : s.K.cuts()) cuts.push_back(halfspace_json(h));
  return {{"phi", s.phi}, {"kappa", vec_json(s.kappa)}, {"small_dims", s.S().size()},
          {"large_dims", s.L().size()}, {"records", s.records.size()}, {"cuts", cuts}};
}

AlgoParams corpv_params(const ExperimentConfig& c, int budget) {
  AlgoParams p = AlgoParams::make(c.d, c.eps, budget, c.margin_override.value_or(c.noise_margin()));
  p.max_subsets = c.max_subsets;
  p.certificate_margin = c.certificate_margin;
  p.policy = c.policy;
  p.centroid.policy = c.policy;
  return p;
}

std::optional<KnowledgeSet> initial_set(const ExperimentConfig& c) {
  if (c.initial_cuts.empty()) return std::nullopt;
  return KnowledgeSet(c.d, c.initial_cuts);
}

int known_budget(const ExperimentConfig& c) {
  const int base = c.budget ? *c.budget : static_cast<int>(c.behavior.C);
  return c.behavior.model == BehaviorModel::Bounded ? 2 * base : base;
}

class KnownLearner : public Learner {
 public:
  KnownLearner(const ExperimentConfig& c, Rng rng)
      : algo_(corpv_params(c, known_budget(c)), c.loss_kind(), c.noise(), rng, initial_set(c)) {}
  Decision query(const Vec& x) override {
    Decision d;
    d.q = algo_.query(x);
    d.epoch = algo_.state().phi;
    return d;
  }
  void update(const Vec& x, const Decision& d, int y, std::size_t t, const RunHooks& hooks,
              RegretTrace& tr) override {
    const auto rep = algo_.update(x, d.q, y, t);
    if (!rep) return;
    EpochEvent ev;
    ev.t = t;
    ev.report = &*rep;
    ev.after = &algo_.state();
    if (hooks.on_epoch) hooks.on_epoch(ev);
    if (hooks.trace_geometry)
      tr.geometry.push_back(json{{"event", "epoch"},
                                 {"t", t},
                                 {"layer", 1},
                                 {"cut", halfspace_json(rep->cut.cut)},
                                 {"state", state_json(algo_.state())}}
                                .dump());
  }
  bool retains(const Vec& theta) const override { return algo_.state().K.contains(theta); }
  std::size_t epochs() const override { return algo_.epochs_completed(); }
  json snapshot() const override { return {{"kappa", vec_json(algo_.state().kappa)}}; }

 private:
  CorpvKnown algo_;
};

class AiLearner : public Learner {
 public:
  AiLearner(const ExperimentConfig& c, Rng rng)
      : algo_(corpv_params(c, 0), c.T, c.beta, c.loss_kind(), c.noise(), rng, initial_set(c)) {}
  Decision query(const Vec& x) override {
    Decision d;
    d.ai = algo_.query(x);
    d.q = d.ai.q;
    d.layer = d.ai.sampled;
    d.played = d.ai.layer;
    d.epoch = algo_.layer(d.ai.sampled).state.phi;
    return d;
  }
  void update(const Vec& x, const Decision& d, int y, std::size_t t, const RunHooks& hooks,
              RegretTrace& tr) override {
    const auto rep = algo_.update(x, d.ai, y, t);
    if (!rep) return;
    ++epochs_;
    EpochEvent ev;
    ev.t = t;
    ev.layer = rep->layer;
    ev.report = &rep->report;
    ev.after = &algo_.layer(rep->layer).state;
    ev.bank = &algo_;
    ev.advanced = rep->advanced;
    ev.reset = rep->reset;
    if (hooks.on_epoch) hooks.on_epoch(ev);
    if (hooks.trace_geometry) {
      json layers = json::array();
      for (int j = 1; j <= algo_.layers(); ++j) layers.push_back(state_json(algo_.layer(j).state));
      tr.geometry.push_back(json{{"event", "epoch"},
                                 {"t", t},
                                 {"layer", rep->layer},
                                 {"cut", halfspace_json(rep->report.cut.cut)},
                                 {"advanced", rep->advanced},
                                 {"reset", rep->reset},
                                 {"layers", layers}}
                                .dump());
    }
  }
  bool retains(const Vec& theta) const override {
    for (int j = 1; j <= algo_.layers(); ++j)
      if (!algo_.layer(j).state.K.contains(theta)) return false;
    return true;
  }
  std::size_t epochs() const override { return epochs_; }
  json snapshot() const override {
    json k = json::array();
    for (int j = 1; j <= algo_.layers(); ++j) k.push_back(vec_json(algo_.layer(j).state.kappa));
    return {{"kappa", k}};
  }

 private:
  CorpvAi algo_;
  std::size_t epochs_ = 0;
};

class GdLearner : public Learner {
 public:
  explicit GdLearner(const ExperimentConfig& c) : s_(c.d) {}
  Decision query(const Vec& x) override {
    Decision d;
    d.q.branch = Branch::Explore;
    d.q.omega_raw = x.dot(s_.z);
    d.q.omega = gd_query(s_, x);
    return d;
  }
  void update(const Vec& x, const Decision&, int y, std::size_t, const RunHooks&, RegretTrace&) override {
    gd_update(s_, x, y);
  }
  bool retains(const Vec& theta) const override { return theta.norm() <= 1.0 + kOrthoTol; }
  std::size_t epochs() const override { return 0; }
  json snapshot() const override { return {{"z", vec_json(s_.z)}}; }

 private:
  GdState s_;
};

class PvLearner : public Learner {
 public:
  PvLearner(const ExperimentConfig& c, Rng rng)
      : algo_(
            [&] {
              PvParams p = PvParams::make(c.d, c.eps);
              p.centroid.policy = c.policy;
              return p;
            }(),
            c.loss_kind(), c.noise(), rng, initial_set(c)) {}
  Decision query(const Vec& x) override {
    Decision d;
    d.q = algo_.query(x);
    d.epoch = algo_.state().cuts + 1;
    return d;
  }
  void update(const Vec& x, const Decision& d, int y, std::size_t t, const RunHooks& hooks,
              RegretTrace& tr) override {
    if (d.q.branch != Branch::Explore) return;
    algo_.update(x, d.q, y);
    if (hooks.on_pv_cut) hooks.on_pv_cut(t, algo_.state());
    if (hooks.trace_geometry) {
      json cuts = json::array();
      for (const auto& h : algo_.state().K.cuts()) cuts.push_back(halfspace_json(h));
      tr.geometry.push_back(json{{"event", "cut"},
                                 {"t", t},
                                 {"kappa", vec_json(algo_.state().kappa)},
                                 {"small_dims", algo_.state().S().size()},
                                 {"cuts", cuts}}
                                .dump());
    }
  }
  bool retains(const Vec& theta) const override { return algo_.state().K.contains(theta); }
  std::size_t epochs() const override { return algo_.state().cuts; }
  json snapshot() const override { return {{"kappa", vec_json(algo_.state().kappa)}}; }

 private:
  ProjectedVolume algo_;
};

std::unique_ptr<CorruptionStrategy> make_strategy(const ExperimentConfig& c, const Rng& root) {
  const auto& b = c.behavior;
  if (b.model != BehaviorModel::Adversarial || b.C == 0) return nullptr;
  if (b.strategy == "flip") return make_flip(b.C, c.T, root.substream("corruption"));
  if (b.strategy == "front-load") return make_front_load();
  if (b.strategy == "targeted") return make_targeted();
  if (b.strategy == "scripted") return make_scripted(std::set<std::size_t>(b.rounds.begin(), b.rounds.end()));
  if (b.strategy == "layer") return make_layer_targeted(b.layer);
  throw ConfigError("unknown corruption strategy '" + b.strategy + "'");
}

std::unique_ptr<ContextSource> make_contexts(const ExperimentConfig& c, const Rng& root) {
  const auto& s = c.contexts;
  if (s.kind == "uniform") return make_uniform_sphere(c.d, root.substream("contexts"));
  if (s.kind == "script") return make_script(s.contexts);
  if (s.kind == "cone") return make_script(cone_contexts(c.d, s.cone_n, Vec::Zero(c.d), s.cone_lift));
  throw ConfigError("unknown context source '" + s.kind + "'");
}

std::unique_ptr<Learner> make_learner(const ExperimentConfig& c, const Rng& root) {
  const Rng rng = root.substream("algorithm");
  switch (c.algorithm) {
    case Algorithm::CorpvKnown: return std::make_unique<KnownLearner>(c, rng);
    case Algorithm::CorpvAi: return std::make_unique<AiLearner>(c, rng);
    case Algorithm::Gd: return std::make_unique<GdLearner>(c);
    case Algorithm::ProjectedVolume: return std::make_unique<PvLearner>(c, rng);
  }
  throw ConfigError("unknown algorithm");
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  c.algorithm = parse_algorithm(get_or<std::string>(j, "algorithm", "corpv_known"));
  c.d = get_or<int>(j, "d", c.d);
  const auto T = get_or<long long>(j, "T", static_cast<long long>(c.T));
  if (T < 0) throw ConfigError("T must be >= 0");
  c.T = static_cast<std::size_t>(T);
  c.eps = get_or<double>(j, "eps", c.eps);
  c.loss = parse_loss(get_or<std::string>(j, "loss", "eps_ball"));
  if (j.contains("behavior")) {
    const json& b = j.at("behavior");
    if (!b.is_object()) throw ConfigError("behavior must be an object");
    c.behavior.model = parse_model(get_or<std::string>(b, "model", "fully_rational"));
    const auto C = get_or<long long>(b, "C", 0);
    if (C < 0) throw ConfigError("C must be >= 0");
    c.behavior.C = static_cast<std::size_t>(C);
    c.behavior.strategy = get_or<std::string>(b, "strategy", c.behavior.strategy);
    c.behavior.rounds = get_or<std::vector<std::size_t>>(b, "rounds", {});
    c.behavior.layer = get_or<int>(b, "layer", 1);
    c.behavior.sigma = get_or<double>(b, "sigma", 0.0);
    if (b.contains("truncation") && !b.at("truncation").is_null())
      c.behavior.truncation = get_or<double>(b, "truncation", 0.0);
  }
  if (j.contains("context_source")) {
    const json& s = j.at("context_source");
    if (s.is_string()) {
      c.contexts.kind = s.get<std::string>();
    } else if (s.is_object()) {
      c.contexts.kind = get_or<std::string>(s, "kind", "uniform");
      if (s.contains("contexts"))
        for (const auto& x : s.at("contexts")) c.contexts.contexts.push_back(json_vec(x, "contexts"));
      c.contexts.cone_n = get_or<int>(s, "n", c.contexts.cone_n);
      c.contexts.cone_lift = get_or<double>(s, "lift", c.contexts.cone_lift);
    } else {
      throw ConfigError("context_source must be a string or an object");
    }
  }
  if (j.contains("theta_star") && !j.at("theta_star").is_null()) c.theta_star = json_vec(j.at("theta_star"), "theta_star");
  c.seed = get_or<std::uint64_t>(j, "seed", 0);
  if (j.contains("budget") && !j.at("budget").is_null()) c.budget = get_or<int>(j, "budget", 0);
  c.beta = get_or<double>(j, "beta", c.beta);
  if (j.contains("initial_cuts")) {
    for (const auto& h : j.at("initial_cuts")) {
      if (!h.is_object() || !h.contains("normal")) throw ConfigError("initial cut needs a normal");
      try {
        c.initial_cuts.emplace_back(json_vec(h.at("normal"), "normal"), get_or<double>(h, "intercept", 0.0),
                                    get_or<int>(h, "orientation", 1));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("initial cut: ") + e.what());
      }
    }
  }
  c.output = get_or<std::string>(j, "output", c.output);
  const auto reps = get_or<long long>(j, "replicates", 1);
  if (reps < 1) throw ConfigError("replicates must be >= 1");
  c.replicates = static_cast<std::size_t>(reps);
  c.max_subsets = get_or<std::size_t>(j, "max_subsets", c.max_subsets);
  c.certificate_margin = get_or<bool>(j, "certificate_margin", true);
  if (get_or<bool>(j, "serial", false)) c.policy = ExecPolicy::Serial;
  validate_config(c);
  return c;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["algorithm"] = to_string(c.algorithm);
  j["d"] = c.d;
  j["T"] = c.T;
  j["eps"] = c.eps;
  j["loss"] = c.loss_kind().name();
  json b = {{"model", model_name(c.behavior.model)},
            {"C", c.behavior.C},
            {"strategy", c.behavior.strategy},
            {"sigma", c.behavior.sigma}};
  if (!c.behavior.rounds.empty()) b["rounds"] = c.behavior.rounds;
  if (c.behavior.strategy == "layer") b["layer"] = c.behavior.layer;
  if (c.behavior.truncation) b["truncation"] = *c.behavior.truncation;
  j["behavior"] = b;
  json s = {{"kind", c.contexts.kind}};
  if (c.contexts.kind == "script") {
    json xs = json::array();
    for (const auto& x : c.contexts.contexts) xs.push_back(vec_json(x));
    s["contexts"] = xs;
  }
  if (c.contexts.kind == "cone") {
    s["n"] = c.contexts.cone_n;
    s["lift"] = c.contexts.cone_lift;
  }
  j["context_source"] = s;
  if (c.theta_star) j["theta_star"] = vec_json(*c.theta_star);
  j["seed"] = c.seed;
  if (c.budget) j["budget"] = *c.budget;
  j["beta"] = c.beta;
  if (!c.initial_cuts.empty()) {
    json cuts = json::array();
    for (const auto& h : c.initial_cuts) cuts.push_back(halfspace_json(h));
    j["initial_cuts"] = cuts;
  }
  j["output"] = c.output;
  j["replicates"] = c.replicates;
  return j;
}

void validate_config(const ExperimentConfig& c) {
  if (c.d < 1) throw ConfigError("d must be >= 1");
  if (!(c.eps > 0.0) || !(c.eps <= 1.0)) throw ConfigError("eps must lie in (0, 1]");
  const bool corpv = c.algorithm == Algorithm::CorpvKnown || c.algorithm == Algorithm::CorpvAi;
  if (corpv && c.eps > 1.0 / std::sqrt(static_cast<double>(c.d)) + 1e-15)
    throw ConfigError("corpv needs eps <= 1/sqrt(d)");
  if (c.algorithm == Algorithm::Gd && c.loss == LossType::Pricing)
    throw ConfigError("gd does not support the pricing loss");
  if (c.algorithm == Algorithm::CorpvAi && !(c.beta > 0.0 && c.beta < 1.0)) throw ConfigError("beta must lie in (0, 1)");
  if (c.budget && *c.budget < 0) throw ConfigError("budget must be >= 0");
  if (c.budget && c.algorithm != Algorithm::CorpvKnown) throw ConfigError("budget applies to corpv_known only");
  const auto& b = c.behavior;
  if (b.model == BehaviorModel::Bounded && !(b.sigma >= 0.0)) throw ConfigError("sigma must be >= 0");
  if (b.truncation && !(*b.truncation > 0.0)) throw ConfigError("truncation must be positive");
  if (b.model == BehaviorModel::Adversarial) {
    static const std::set<std::string> known = {"flip", "front-load", "targeted", "scripted", "layer"};
    if (!known.count(b.strategy)) throw ConfigError("unknown corruption strategy '" + b.strategy + "'");
  }
  if (c.contexts.kind == "script") {
    if (c.contexts.contexts.empty()) throw ConfigError("script context source needs contexts");
    for (const auto& x : c.contexts.contexts) {
      if (x.size() != c.d) throw ConfigError("script context has wrong dimension");
      if (std::abs(x.norm() - 1.0) > kOrthoTol) throw ConfigError("script contexts must be unit vectors");
    }
  } else if (c.contexts.kind == "cone") {
    if (c.d != 3) throw ConfigError("cone contexts need d = 3");
    if (c.contexts.cone_n < 1) throw ConfigError("cone needs n >= 1");
    if (!(c.contexts.cone_lift > 0.0 && c.contexts.cone_lift < 1.0)) throw ConfigError("cone lift must lie in (0, 1)");
  } else if (c.contexts.kind != "uniform") {
    throw ConfigError("unknown context source '" + c.contexts.kind + "'");
  }
  if (c.theta_star) {
    if (c.theta_star->size() != c.d) throw ConfigError("theta_star has wrong dimension");
    if (c.theta_star->norm() > 1.0 + kOrthoTol) throw ConfigError("theta_star must lie in the unit ball");
  }
  for (const auto& h : c.initial_cuts)
    if (h.normal.size() != c.d) throw ConfigError("initial cut has wrong dimension");
  if (!c.initial_cuts.empty() && !feasible(c.initial_cuts)) throw ConfigError("initial cuts are infeasible");
  const double margin = c.margin_override.value_or(c.noise_margin());
  if (corpv && margin > 0.0) {
    try {
      (void)AlgoParams::make(c.d, c.eps, 1, margin);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("noise too large for eps: ") + e.what());
    }
  }
}

RegretTrace run(const ExperimentConfig& c, const RunHooks& hooks) {
  validate_config(c);
  const Rng root(c.seed);
  RegretTrace tr;
  tr.algorithm = c.algorithm;
  if (c.theta_star) {
    tr.theta_star = *c.theta_star;
  } else {
    Rng r = root.substream("theta");
    tr.theta_star = sample_theta(c.d, r);
  }
  if (!c.initial_cuts.empty() && !KnowledgeSet(c.d, c.initial_cuts).contains(tr.theta_star))
    throw ConfigError("theta_star violates the initial cuts");
  if (c.T == 0) return tr;

  auto contexts = make_contexts(c, root);
  Nature nature(tr.theta_star, c.behavior.model, c.behavior.C, make_strategy(c, root), c.noise(),
                root.substream("nature"));
  std::unique_ptr<Learner> learner;
  try {
    learner = make_learner(c, root);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw RunError(0, e.what());
  }
  const LossKind eps_kind = LossKind::eps_ball(c.eps);
  const LossKind kind = c.loss_kind();
  const NoiseModel noise = c.noise();
  const bool bounded = c.behavior.model == BehaviorModel::Bounded;
  tr.rows.reserve(c.T);

  for (std::size_t t = 1; t <= c.T; ++t) {
    RoundOutcome o;
    o.t = t;
    try {
      o.x = contexts->next();
      const Decision d = learner->query(o.x);
      o.branch = d.q.branch;
      o.omega = d.q.omega;
      o.layer = d.layer;
      o.played_layer = d.played;
      o.epoch = d.epoch;
      const Nature::Perceived p = nature.perceived_value(o.x, RoundInfo{t, o.branch, o.layer, o.omega});
      o.v = p.v;
      o.vtilde = p.vtilde;
      o.corrupted = p.corrupted;
      o.xi = p.xi;
      o.y = feedback(p.vtilde, o.omega);
      learner->update(o.x, d, o.y, t, hooks, tr);
    } catch (const ConfigError&) {
      throw;
    } catch (const RunError&) {
      throw;
    } catch (const std::exception& e) {
      throw RunError(t, e.what());
    }
    o.loss_epsball = loss(eps_kind, o.omega, o.v, o.vtilde);
    o.loss_abs = loss(LossKind::absolute(), o.omega, o.v, o.vtilde);
    o.loss_pricing = loss(LossKind::pricing(), o.omega, o.v, o.vtilde);
    tr.cum_epsball += o.loss_epsball;
    tr.cum_abs += o.loss_abs;
    tr.cum_pricing += o.loss_pricing;
    o.cum_epsball = tr.cum_epsball;
    o.cum_abs = tr.cum_abs;
    o.cum_pricing = tr.cum_pricing;
    if (bounded) {
      PseudoRegretRow r;
      r.t = t;
      r.expected = expected_loss(kind, noise, o.omega, o.v);
      r.benchmark = benchmark_loss(kind, noise, o.v).loss;
      r.pseudo = r.expected - r.benchmark;
      r.cum_pseudo = (tr.pseudo.empty() ? 0.0 : tr.pseudo.back().cum_pseudo) + r.pseudo;
      tr.pseudo.push_back(r);
    }
    if (hooks.trace_geometry) {
      json g = {{"event", "round"}, {"t", t},         {"branch", o.branch == Branch::Explore ? "explore" : "exploit"},
                {"layer", o.layer}, {"played", o.played_layer}, {"epoch", o.epoch},
                {"x", vec_json(o.x)}, {"omega", o.omega}};
      g.update(learner->snapshot());
      tr.geometry.push_back(g.dump());
    }
    if (hooks.on_round) hooks.on_round(o);
    tr.rows.push_back(std::move(o));
  }
  tr.corruptions = nature.corruptions_used();
  tr.epochs = learner->epochs();
  tr.theta_retained = learner->retains(tr.theta_star);
  return tr;
}

void write_csv(const RegretTrace& tr, std::ostream& os) {
  os << kTraceHeader << '\n';
  const std::string algo = to_string(tr.algorithm);
  for (const auto& r : tr.rows) {
    os << r.t << ',' << algo << ',' << r.layer << ',' << r.epoch << ','
       << (r.branch == Branch::Explore ? "explore" : "exploit") << ',' << fmt(r.omega) << ',' << fmt(r.v) << ','
       << fmt(r.vtilde) << ',' << r.y << ',' << (r.corrupted ? 1 : 0) << ',' << fmt(r.loss_epsball) << ','
       << fmt(r.loss_abs) << ',' << fmt(r.loss_pricing) << ',' << fmt(r.cum_epsball) << ',' << fmt(r.cum_abs)
       << ',' << fmt(r.cum_pricing) << '\n';
  }
}

void write_pseudo_csv(const RegretTrace& tr, std::ostream& os) {
  os << "t,expected_loss,benchmark_loss,pseudo_regret,cum_pseudo_regret\n";
  for (const auto& r : tr.pseudo)
    os << r.t << ',' << fmt(r.expected) << ',' << fmt(r.benchmark) << ',' << fmt(r.pseudo) << ','
       << fmt(r.cum_pseudo) << '\n';
}

void write_jsonl(const RegretTrace& tr, std::ostream& os) {
  for (const auto& line : tr.geometry) os << line << '\n';
}

CsvTotals reconstruct_csv(std::istream& is) {
  CsvTotals out;
  std::string line;
  if (!std::getline(is, line) || line != kTraceHeader) throw std::runtime_error("not a trace CSV");
  while (std::getline(is, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 16) throw std::runtime_error("malformed trace row");
    out.epsball += std::stod(f[10]);
    out.abs += std::stod(f[11]);
    out.pricing += std::stod(f[12]);
    if (out.epsball != std::stod(f[13]) || out.abs != std::stod(f[14]) || out.pricing != std::stod(f[15]))
      out.columns_consistent = false;
    ++out.rows;
  }
  return out;
}

SweepSpec parse_sweep(const json& j) {
  if (!j.is_object()) throw ConfigError("sweep spec must be a JSON object");
  SweepSpec s;
  s.base = parse_config(j.contains("base") ? j.at("base") : json::object());
  const json grid = j.contains("grid") ? j.at("grid") : json::object();
  s.C = get_or<std::vector<std::size_t>>(grid, "C", {s.base.behavior.C});
  s.d = get_or<std::vector<int>>(grid, "d", {s.base.d});
  s.eps = get_or<std::vector<double>>(grid, "eps", {s.base.eps});
  for (const auto& a : get_or<std::vector<std::string>>(grid, "algorithm", {to_string(s.base.algorithm)}))
    s.algorithms.push_back(parse_algorithm(a));
  if (grid.contains("seeds")) {
    s.seeds = get_or<std::vector<std::uint64_t>>(grid, "seeds", {});
  } else {
    for (std::size_t r = 0; r < s.base.replicates; ++r) s.seeds.push_back(s.base.seed + r);
  }
  if (s.seeds.empty()) throw ConfigError("sweep needs at least one replicate seed");
  if (s.C.empty() || s.d.empty() || s.eps.empty() || s.algorithms.empty())
    throw ConfigError("sweep axes must be non-empty");
  for (const auto& c : expand(s)) validate_config(c);
  return s;
}

std::vector<ExperimentConfig> expand(const SweepSpec& s) {
  std::vector<ExperimentConfig> out;
  for (Algorithm a : s.algorithms)
    for (int d : s.d)
      for (double e : s.eps)
        for (std::size_t C : s.C)
          for (std::uint64_t seed : s.seeds) {
            ExperimentConfig c = s.base;
            c.algorithm = a;
            c.d = d;
            c.eps = e;
            c.behavior.C = C;
            if (C > 0 && c.behavior.model == BehaviorModel::FullyRational) c.behavior.model = BehaviorModel::Adversarial;
            if (a != Algorithm::CorpvKnown) c.budget.reset();
            if (c.theta_star && c.theta_star->size() != d) c.theta_star.reset();
            c.seed = seed;
            out.push_back(std::move(c));
          }
  return out;
}

std::vector<SweepRow> sweep(const SweepSpec& s) {
  const std::vector<ExperimentConfig> jobs = expand(s);
  struct Result {
    bool ok = false;
    double e = 0, a = 0, p = 0;
  };
  std::vector<Result> results(jobs.size());
  // Cells run concurrently; each run keeps its kernels serial and owns its state.
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    ExperimentConfig c = jobs[i];
    if (omp_get_num_threads() > 1) c.policy = ExecPolicy::Serial;
    try {
      const RegretTrace tr = run(c);
      results[i] = {true, tr.cum_epsball, tr.cum_abs, tr.cum_pricing};
    } catch (const std::exception&) {
      results[i].ok = false;
    }
  }
  std::vector<SweepRow> rows;
  const std::size_t n = s.seeds.size();
  for (std::size_t start = 0; start < jobs.size(); start += n) {
    SweepRow r;
    const auto& c = jobs[start];
    r.algorithm = c.algorithm;
    r.d = c.d;
    r.eps = c.eps;
    r.C = c.behavior.C;
    std::vector<double> e, a, p;
    for (std::size_t k = start; k < start + n; ++k) {
      if (!results[k].ok) {
        ++r.failures;
        continue;
      }
      e.push_back(results[k].e);
      a.push_back(results[k].a);
      p.push_back(results[k].p);
    }
    r.replicates = e.size();
    auto stats = [](const std::vector<double>& xs, double& mean, double& sd) {
      mean = sd = 0.0;
      if (xs.empty()) return;
      for (double x : xs) mean += x;
      mean /= static_cast<double>(xs.size());
      if (xs.size() < 2) return;
      for (double x : xs) sd += (x - mean) * (x - mean);
      sd = std::sqrt(sd / static_cast<double>(xs.size() - 1));
    };
    stats(e, r.mean_epsball, r.std_epsball);
    stats(a, r.mean_abs, r.std_abs);
    stats(p, r.mean_pricing, r.std_pricing);
    rows.push_back(r);
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& os) {
  os << "algo,d,eps,C,replicates,failures,mean_epsball,std_epsball,mean_abs,std_abs,mean_pricing,std_pricing\n";
  for (const auto& r : rows)
    os << to_string(r.algorithm) << ',' << r.d << ',' << fmt(r.eps) << ',' << r.C << ',' << r.replicates << ','
       << r.failures << ',' << fmt(r.mean_epsball) << ',' << fmt(r.std_epsball) << ',' << fmt(r.mean_abs) << ','
       << fmt(r.std_abs) << ',' << fmt(r.mean_pricing) << ',' << fmt(r.std_pricing) << '\n';
}

}  // namespace corsearch
