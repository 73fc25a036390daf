// Command-line front end: train, sweep, evaluate, diagnose, aggregate.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "bagsac/campaign.hpp"
#include "bagsac/config.hpp"
#include "bagsac/errors.hpp"
#include "bagsac/experiment.hpp"

namespace {

using namespace bagsac;

int run_train(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out) {
  RunConfig cfg = load_config(config_path);
  if (seed) cfg.seed = *seed;
  const std::string dir = out.empty() ? "runs/" + cfg.method_label() + "-" + cfg.level.name + "-s" + std::to_string(cfg.seed) : out;
  const RunResult r = train_run(cfg, dir);
  std::cout << to_json(r.summary).dump(2) << "\n";
  return 0;
}

int run_sweep(const std::string& matrix_path, const std::string& out, int jobs) {
  const MatrixSpec spec = load_matrix(matrix_path);
  std::cerr << "[sweep] " << spec.run_count() << " runs into " << out << "\n";
  const SweepOutcome o = sweep(spec, out, jobs);
  std::cout << "completed " << o.completed << ", skipped " << o.skipped << ", failed " << o.failed << "\n";
  return o.exit_code;
}

int run_evaluate(const std::string& run_dir, int episodes) {
  const EvalRecord rec = evaluate_run(run_dir, episodes);
  nlohmann::json j = {{"episodes", rec.returns.size()},
                      {"returns", rec.returns},
                      {"mean_return", rec.mean_return},
                      {"return_std", rec.return_std},
                      {"collision_rate", rec.collision_rate}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Guided SAC with uncertainty-scheduled distillation on a kinematic highway"};
  app.require_subcommand(1);

  std::string config_path, out, matrix_path, run_dir, campaign_dir;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  int episodes = 5;

  auto* train = app.add_subcommand("train", "Run one training run");
  train->add_option("--config", config_path, "Run configuration (INI)")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "Override the configured seed");
  train->add_option("--out", out, "Run directory");

  auto* sw = app.add_subcommand("sweep", "Run a (method x level x seed) matrix");
  sw->add_option("--matrix", matrix_path, "Matrix file (INI)")->required()->check(CLI::ExistingFile);
  sw->add_option("--out", out, "Campaign directory")->required();
  sw->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);

  auto* ev = app.add_subcommand("evaluate", "Re-evaluate the saved control actor of a run");
  ev->add_option("--run", run_dir, "Run directory")->required();
  ev->add_option("--episodes", episodes, "Episodes")->check(CLI::PositiveNumber);

  auto* dg = app.add_subcommand("diagnose", "Lambda activity and blindness report of a run");
  dg->add_option("--run", run_dir, "Run directory")->required();

  auto* ag = app.add_subcommand("aggregate", "Rebuild campaign.json from finished runs");
  ag->add_option("--campaign", campaign_dir, "Campaign directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*train) return run_train(config_path, seed, out);
    if (*sw) return run_sweep(matrix_path, out, jobs);
    if (*ev) return run_evaluate(run_dir, episodes);
    if (*dg) {
      std::cout << diagnose(run_dir).dump(2) << "\n";
      return 0;
    }
    if (*ag) {
      std::cout << aggregate_campaign(campaign_dir).dump(2) << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 2;
  } catch (const MissingArtifact& e) {
    std::cerr << "missing artifact: " << e.what() << "\n";
    return 3;
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
