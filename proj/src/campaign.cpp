#include "bagsac/campaign.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <atomic>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "bagsac/errors.hpp"
#include "bagsac/experiment.hpp"

namespace bagsac {

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of(","));
  std::vector<std::string> out;
  for (auto& p : parts) {
    boost::trim(p);
    if (!p.empty()) out.push_back(p);
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("missing artifact: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingArtifact("cannot write " + path.string());
  out << text;
}

void set_method(RunConfig& cfg, const std::string& spec) {
  const auto colon = spec.find(':');
  cfg.guidance.fixed_lambda = GuidanceConfig{}.fixed_lambda;
  cfg.method = method_from_string(spec.substr(0, colon));
  if (colon != std::string::npos) {
    if (cfg.method != Method::gsac_fixed) throw ConfigError("only gsac_fixed takes a ':lambda' suffix: " + spec);
    apply_setting(cfg, "method", "lambda", spec.substr(colon + 1));
  }
}

std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ':' || c == '/' || c == ' ' || c == '.') c = '_';
  return s;
}

}  // namespace

std::size_t MatrixSpec::run_count() const {
  return methods.size() * levels.size() * seeds.size() * std::max<std::size_t>(axis ? axis_values.size() : 1, 1);
}

MatrixSpec matrix_preset(const std::string& name) {
  MatrixSpec m;
  m.seeds = {42, 123, 7};
  if (name == "main") {
    m.methods = {"vanilla_sac", "gsac_fixed:0.1", "gsac_fixed:0.01", "ba_gsac", "linear_decay"};
    m.levels = {"mild", "moderate", "severe"};
  } else if (name == "guidance_mode") {
    m.methods = {"vanilla_sac", "gsac_fixed:0.1", "gsac_threshold", "ba_gsac"};
    m.levels = {"moderate"};
  } else if (name == "ensemble_size") {
    m.methods = {"ba_gsac"};
    m.levels = {"moderate"};
    m.axis = "ensemble.size";
    m.axis_values = {"1", "3", "5", "7"};
  } else if (name == "history") {
    m.methods = {"ba_gsac"};
    m.levels = {"moderate"};
    m.axis = "pomdp.history_length";
    m.axis_values = {"1", "2", "3", "5"};
  } else if (name == "warmup") {
    m.methods = {"ba_gsac"};
    m.levels = {"severe"};
    m.seeds = {42};
    m.axis = "guidance.warmup_steps";
    m.axis_values = {"800", "2000", "3000", "5000"};
  } else {
    throw ConfigError("unknown matrix preset '" + name +
                      "' (expected main, guidance_mode, ensemble_size, history, warmup)");
  }
  return m;
}

MatrixSpec parse_matrix(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("matrix parse error: ") + e.what());
  }
  MatrixSpec m;
  const auto matrix = tree.get_child_optional("matrix");
  if (!matrix) throw ConfigError("matrix file needs a [matrix] section");
  if (const auto preset = matrix->get_optional<std::string>("preset")) m = matrix_preset(*preset);
  for (const auto& [key, node] : *matrix) {
    const std::string v = node.data();
    if (key == "preset") continue;
    if (key == "methods") {
      m.methods = split_list(v);
    } else if (key == "levels") {
      m.levels = split_list(v);
    } else if (key == "seeds") {
      m.seeds.clear();
      for (const auto& s : split_list(v)) {
        try {
          m.seeds.push_back(std::stoull(s));
        } catch (const std::exception&) {
          throw ConfigError("matrix.seeds: bad seed '" + s + "'");
        }
      }
    } else if (key == "vary") {
      m.axis = v;
    } else if (key == "values") {
      m.axis_values = split_list(v);
    } else {
      throw ConfigError("unknown matrix key '" + key + "'");
    }
  }
  for (const auto& [section, body] : tree) {
    if (section == "matrix") continue;
    for (const auto& [key, node] : body) apply_setting(m.base, section, key, node.data());
  }
  if (m.methods.empty() || m.levels.empty() || m.seeds.empty()) throw ConfigError("matrix is empty");
  if (m.axis && m.axis_values.empty()) throw ConfigError("matrix.vary given without values");
  if (m.axis && m.axis->find('.') == std::string::npos) throw ConfigError("matrix.vary must be section.key");
  return m;
}

MatrixSpec load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open matrix file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_matrix(buf.str());
}

std::vector<PlannedRun> plan_runs(const MatrixSpec& spec) {
  std::vector<PlannedRun> runs;
  const std::vector<std::string> axis_values = spec.axis ? spec.axis_values : std::vector<std::string>{""};
  for (const auto& method : spec.methods) {
    for (const auto& level : spec.levels) {
      for (const auto& av : axis_values) {
        for (std::uint64_t seed : spec.seeds) {
          PlannedRun r;
          r.config = spec.base;
          set_method(r.config, method);
          r.config.level = PomdpLevel::from_name(level);
          r.config.seed = seed;
          std::string cell = sanitize(method) + "-" + level;
          if (spec.axis) {
            const auto dot = spec.axis->find('.');
            apply_setting(r.config, spec.axis->substr(0, dot), spec.axis->substr(dot + 1), av);
            cell += "-" + sanitize(spec.axis->substr(dot + 1)) + av;
          }
          r.config.validate();
          r.cell = cell;
          r.name = cell + "-s" + std::to_string(seed);
          runs.push_back(std::move(r));
        }
      }
    }
  }
  return runs;
}

namespace {

int exit_code_of(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 1;
  if (dynamic_cast<const NumericalError*>(&e)) return 2;
  if (dynamic_cast<const MissingArtifact*>(&e)) return 3;
  return 2;
}

bool already_done(const std::filesystem::path& dir, const RunConfig& cfg) {
  const auto summary = dir / "summary.json";
  if (!std::filesystem::exists(summary)) return false;
  try {
    const auto j = nlohmann::json::parse(read_text(summary));
    return j.at("config_hash").get<std::string>() == cfg.hash();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

SweepOutcome sweep(const MatrixSpec& spec, const std::filesystem::path& out_dir, int jobs) {
  const std::vector<PlannedRun> runs = plan_runs(spec);
  if (runs.empty()) throw ConfigError("sweep: matrix is empty");
  std::filesystem::create_directories(out_dir / "runs");

  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& r : runs)
    manifest.push_back({{"name", r.name}, {"cell", r.cell}, {"seed", r.config.seed}, {"config_hash", r.config.hash()}});
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");

  SweepOutcome outcome;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      const PlannedRun& r = runs[i];
      const auto dir = out_dir / "runs" / r.name;
      if (already_done(dir, r.config)) {
        std::lock_guard lock(mu);
        ++outcome.skipped;
        continue;
      }
      try {
        train_run(r.config, dir);
        std::lock_guard lock(mu);
        ++outcome.completed;
        std::cerr << "[sweep] finished " << r.name << "\n";
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        ++outcome.failed;
        if (outcome.exit_code == 0) outcome.exit_code = exit_code_of(e);
        std::cerr << "[sweep] " << r.name << " failed: " << e.what() << "\n";
      }
    }
  };
  const int n = std::max(1, jobs);
  std::vector<std::thread> pool;
  for (int j = 0; j < n; ++j) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  aggregate_campaign(out_dir);
  return outcome;
}

nlohmann::json aggregate_campaign(const std::filesystem::path& campaign_dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text(campaign_dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw MissingArtifact(std::string("malformed manifest.json: ") + e.what());
  }
  std::map<std::string, std::vector<RunSummary>> cells;
  std::vector<std::string> order;
  nlohmann::json missing = nlohmann::json::array();
  for (const auto& entry : manifest) {
    const std::string name = entry.at("name").get<std::string>();
    const std::string cell = entry.at("cell").get<std::string>();
    if (!cells.count(cell)) order.push_back(cell);
    auto& list = cells[cell];
    const auto path = campaign_dir / "runs" / name / "summary.json";
    if (!std::filesystem::exists(path)) {
      missing.push_back(name);
      continue;
    }
    list.push_back(summary_from_json(nlohmann::json::parse(read_text(path))));
  }
  nlohmann::json out;
  out["cells"] = nlohmann::json::object();
  for (const auto& cell : order) {
    const auto& list = cells[cell];
    nlohmann::json c;
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& s : list) runs.push_back(to_json(s));
    c["runs"] = runs;
    c["aggregate"] = list.size() >= 2 ? to_json(aggregate_seeds(list)) : nlohmann::json(nullptr);
    out["cells"][cell] = c;
  }
  out["missing_runs"] = missing;
  write_text(campaign_dir / "campaign.json", out.dump(2) + "\n");
  if (!missing.empty()) std::cerr << "warning: " << missing.size() << " run(s) have no summary.json\n";
  return out;
}

}  // namespace bagsac
