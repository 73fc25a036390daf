#pragma once

// Sweeps over (method, level, seed[, ablation value]) grids with resumable run
// directories and per-cell seed aggregates.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bagsac/config.hpp"

namespace bagsac {

struct MatrixSpec {
  std::vector<std::string> methods;  // "ba_gsac", "gsac_fixed:0.1", ...
  std::vector<std::string> levels;
  std::vector<std::uint64_t> seeds;
  std::optional<std::string> axis;  // "section.key" varied per cell
  std::vector<std::string> axis_values;
  RunConfig base;

  std::size_t run_count() const;
};

/// Named grids: main, guidance_mode, ensemble_size, history, warmup.
MatrixSpec matrix_preset(const std::string& name);

/// [matrix] preset/methods/levels/seeds/vary/values plus ordinary config
/// sections, which override the base run configuration.
MatrixSpec parse_matrix(const std::string& text);
MatrixSpec load_matrix(const std::filesystem::path& path);

struct PlannedRun {
  std::string name;  // run directory name under <campaign>/runs
  std::string cell;  // runs sharing a cell differ only in seed
  RunConfig config;
};

std::vector<PlannedRun> plan_runs(const MatrixSpec& spec);

struct SweepOutcome {
  std::size_t completed = 0;
  std::size_t skipped = 0;  // resumed: same config hash already finished
  std::size_t failed = 0;
  int exit_code = 0;        // first failure's CLI code, 0 when all succeeded
};

/// Runs (or resumes) every planned run with up to `jobs` concurrent runs, then
/// writes campaign.json.
SweepOutcome sweep(const MatrixSpec& spec, const std::filesystem::path& out_dir, int jobs);

/// Rebuilds campaign.json from the run directories listed in manifest.json.
nlohmann::json aggregate_campaign(const std::filesystem::path& campaign_dir);

}  // namespace bagsac
