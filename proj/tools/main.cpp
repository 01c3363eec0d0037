#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "corsearch/harness.hpp"
#include "corsearch/validation.hpp"

namespace fs = std::filesystem;
using namespace corsearch;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kConfigError = 2;

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw ConfigError("cannot write '" + p.string() + "'");
  return os;
}

void write_run(const RegretTrace& tr, const fs::path& dir, const std::string& stem, bool geometry) {
  auto csv = open_out(dir / (stem + ".csv"));
  write_csv(tr, csv);
  if (!tr.pseudo.empty()) {
    auto ps = open_out(dir / (stem + "_pseudo_regret.csv"));
    write_pseudo_csv(tr, ps);
  }
  if (geometry) {
    auto js = open_out(dir / (stem + ".jsonl"));
    write_jsonl(tr, js);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Corruption-robust contextual search simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  bool trace_geometry = false;

  auto* run_cmd = app.add_subcommand("run", "Run one experiment and write its regret trace");
  run_cmd->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run_cmd->add_option("--seed", seed, "Override the config seed");
  run_cmd->add_option("--out", out_dir, "Output directory (defaults to the config's output field)");
  run_cmd->add_flag("--trace-geometry", trace_geometry, "Also write per-round geometry snapshots as JSONL");

  std::string sweep_path;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a parameter grid and write a summary table");
  sweep_cmd->add_option("--config", sweep_path, "Sweep spec (JSON with 'base' and 'grid')")->required();
  sweep_cmd->add_option("--seed", seed, "Override the base seed (used when the grid lists no seeds)");
  sweep_cmd->add_option("--out", out_dir, "Output directory");

  bool quick = false;
  std::vector<int> only;
  auto* val_cmd = app.add_subcommand("validate", "Run the invariant and acceptance battery");
  val_cmd->add_flag("--quick", quick, "Reduced replicate counts");
  val_cmd->add_option("--only", only, "Run only the listed criteria");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  try {
    if (*run_cmd) {
      ExperimentConfig c = parse_config(load_json(config_path));
      if (seed) c.seed = *seed;
      const fs::path dir = out_dir.empty() ? fs::path(c.output) : fs::path(out_dir);
      fs::create_directories(dir);
      RunHooks hooks;
      hooks.trace_geometry = trace_geometry;
      for (std::size_t r = 0; r < c.replicates; ++r) {
        ExperimentConfig rc = c;
        rc.seed = c.seed + r;
        const RegretTrace tr = run(rc, hooks);
        const std::string stem = c.replicates == 1 ? "trace" : "trace_" + std::to_string(r);
        write_run(tr, dir, stem, trace_geometry);
        std::cout << to_string(rc.algorithm) << " seed=" << rc.seed << " T=" << rc.T
                  << " cum_epsball=" << tr.cum_epsball << " cum_abs=" << tr.cum_abs
                  << " cum_pricing=" << tr.cum_pricing << " corruptions=" << tr.corruptions
                  << " epochs=" << tr.epochs << " theta_retained=" << (tr.theta_retained ? "yes" : "no") << '\n';
      }
      return kOk;
    }
    if (*sweep_cmd) {
      nlohmann::json j = load_json(sweep_path);
      if (seed) j["base"]["seed"] = *seed;
      const SweepSpec s = parse_sweep(j);
      const fs::path dir = out_dir.empty() ? fs::path(s.base.output) : fs::path(out_dir);
      fs::create_directories(dir);
      const auto rows = sweep(s);
      auto os = open_out(dir / "summary.csv");
      write_sweep_csv(rows, os);
      write_sweep_csv(rows, std::cout);
      return kOk;
    }
    if (*val_cmd) {
      const auto checks = validation::run_battery(quick ? validation::Level::Quick : validation::Level::Full,
                                                  &std::cerr, only);
      bool ok = true;
      for (const auto& c : checks) {
        std::cout << validation::format(c) << '\n';
        ok = ok && c.pass;
      }
      return ok ? kOk : kFailed;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailed;
  }
  return kOk;
}
