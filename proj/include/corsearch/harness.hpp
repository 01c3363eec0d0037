#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "corsearch/baseline.hpp"
#include "corsearch/behaviors.hpp"
#include "corsearch/corpv.hpp"
#include "corsearch/layers.hpp"
#include "corsearch/losses.hpp"

namespace corsearch {

enum class Algorithm { CorpvKnown, CorpvAi, Gd, ProjectedVolume };
std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& s);

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An exception thrown inside a simulation, tagged with the round it hit.
struct RunError : std::runtime_error {
  std::size_t round;
  RunError(std::size_t t, const std::string& what);
};

struct BehaviorSpec {
  BehaviorModel model = BehaviorModel::FullyRational;
  std::size_t C = 0;
  std::string strategy = "flip";  // flip | front-load | targeted | scripted | layer
  std::vector<std::size_t> rounds;  // scripted
  int layer = 1;                    // layer
  double sigma = 0.0;
  std::optional<double> truncation;
};

struct ContextSpec {
  std::string kind = "uniform";  // uniform | script | cone
  std::vector<Vec> contexts;     // script
  int cone_n = 12;
  double cone_lift = 0.95;
};

struct ExperimentConfig {
  Algorithm algorithm = Algorithm::CorpvKnown;
  int d = 2;
  std::size_t T = 1000;
  double eps = 0.1;
  LossType loss = LossType::EpsBall;
  BehaviorSpec behavior;
  ContextSpec contexts;
  std::optional<Vec> theta_star;
  std::uint64_t seed = 0;
  std::optional<int> budget;  // corpv_known only; defaults to C
  double beta = 0.1;          // corpv_ai
  std::vector<Halfspace> initial_cuts;
  std::string output = "out";
  std::size_t replicates = 1;

  // Engineering knobs, not part of the JSON schema unless set.
  std::size_t max_subsets = 512;
  bool certificate_margin = true;
  ExecPolicy policy = ExecPolicy::Parallel;
  std::optional<double> margin_override;  // replaces the noise margin handed to corpv

  LossKind loss_kind() const;
  NoiseModel noise() const;
  // Xi = sqrt(2) sigma ln T for boundedly rational agents, else 0.
  double noise_margin() const;
};

ExperimentConfig parse_config(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);
// Throws ConfigError describing the first violated constraint.
void validate_config(const ExperimentConfig& c);

struct RoundOutcome {
  std::size_t t = 0;
  int layer = 0;         // sampled layer (corpv_ai), else 0
  int played_layer = 0;  // layer whose recommendation was submitted
  std::size_t epoch = 0;
  Branch branch = Branch::Explore;
  double omega = 0.0;
  double v = 0.0;
  double vtilde = 0.0;
  int y = 1;
  bool corrupted = false;
  double xi = 0.0;
  double loss_epsball = 0.0, loss_abs = 0.0, loss_pricing = 0.0;
  double cum_epsball = 0.0, cum_abs = 0.0, cum_pricing = 0.0;
  Vec x;
};

// Expected loss of the query minus the best achievable expected loss for
// the same context, under the configured loss and noise.
struct PseudoRegretRow {
  std::size_t t = 0;
  double expected = 0.0;
  double benchmark = 0.0;
  double pseudo = 0.0;
  double cum_pseudo = 0.0;
};

struct RegretTrace {
  Algorithm algorithm = Algorithm::CorpvKnown;
  Vec theta_star;
  std::vector<RoundOutcome> rows;
  std::vector<PseudoRegretRow> pseudo;
  std::vector<std::string> geometry;  // JSON lines, filled when requested
  double cum_epsball = 0.0, cum_abs = 0.0, cum_pricing = 0.0;
  std::size_t corruptions = 0;
  std::size_t epochs = 0;
  bool theta_retained = true;  // theta* inside every knowledge set at the end
};

struct EpochEvent {
  std::size_t t = 0;
  int layer = 1;
  const EpochReport* report = nullptr;
  const EpochState* after = nullptr;
  const CorpvAi* bank = nullptr;  // corpv_ai only
  std::vector<int> advanced, reset;
};

struct RunHooks {
  std::function<void(const RoundOutcome&)> on_round;
  std::function<void(const EpochEvent&)> on_epoch;
  std::function<void(std::size_t, const PvState&)> on_pv_cut;
  bool trace_geometry = false;
};

RegretTrace run(const ExperimentConfig& c, const RunHooks& hooks = {});

inline constexpr const char* kTraceHeader =
    "t,algo,layer,epoch,branch,omega,v,vtilde,y,corrupted,loss_epsball,loss_abs,loss_pricing,cum_epsball,cum_abs,"
    "cum_pricing";
void write_csv(const RegretTrace& tr, std::ostream& os);
void write_pseudo_csv(const RegretTrace& tr, std::ostream& os);
void write_jsonl(const RegretTrace& tr, std::ostream& os);

// Rebuilds cumulative losses from the per-round columns of a trace CSV.
struct CsvTotals {
  std::size_t rows = 0;
  double epsball = 0.0, abs = 0.0, pricing = 0.0;
  bool columns_consistent = true;  // every cum_* column equals the running sum
};
CsvTotals reconstruct_csv(std::istream& is);

struct SweepSpec {
  ExperimentConfig base;
  std::vector<std::size_t> C;
  std::vector<int> d;
  std::vector<double> eps;
  std::vector<Algorithm> algorithms;
  std::vector<std::uint64_t> seeds;
};

struct SweepRow {
  Algorithm algorithm = Algorithm::CorpvKnown;
  int d = 2;
  double eps = 0.1;
  std::size_t C = 0;
  std::size_t replicates = 0;
  std::size_t failures = 0;  // replicates that raised an error
  double mean_epsball = 0.0, std_epsball = 0.0;
  double mean_abs = 0.0, std_abs = 0.0;
  double mean_pricing = 0.0, std_pricing = 0.0;
};

SweepSpec parse_sweep(const nlohmann::json& j);
std::vector<ExperimentConfig> expand(const SweepSpec& s);
std::vector<SweepRow> sweep(const SweepSpec& s);
void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& os);

}  // namespace corsearch
