#include "bagsac/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "bagsac/errors.hpp"
#include "bagsac/rng.hpp"

namespace bagsac {

const char* to_string(Method method) {
  switch (method) {
    case Method::vanilla_sac: return "vanilla_sac";
    case Method::gsac_fixed: return "gsac_fixed";
    case Method::ba_gsac: return "ba_gsac";
    case Method::linear_decay: return "linear_decay";
    case Method::gsac_threshold: return "gsac_threshold";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  for (Method m : {Method::vanilla_sac, Method::gsac_fixed, Method::ba_gsac, Method::linear_decay,
                   Method::gsac_threshold}) {
    if (name == to_string(m)) return m;
  }
  throw ConfigError("unknown method '" + name +
                    "' (expected vanilla_sac, gsac_fixed, ba_gsac, linear_decay, gsac_threshold)");
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("'" + key + "': expected a number, got '" + text + "'");
}

long long parse_int(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("'" + key + "': expected an integer, got '" + text + "'");
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("'" + key + "': expected true/false, got '" + text + "'");
}

struct Field {
  const char* section;
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field real(const char* section, const char* key, T RunConfig::*block, double T::*member) {
  const std::string name = std::string(section) + "." + key;
  return {section, key, [=](RunConfig& c, const std::string& v) { (c.*block).*member = parse_double(name, v); },
          [=](const RunConfig& c) { return fmt_double((c.*block).*member); }};
}

template <typename T, typename I>
Field integer(const char* section, const char* key, T RunConfig::*block, I T::*member) {
  const std::string name = std::string(section) + "." + key;
  return {section, key,
          [=](RunConfig& c, const std::string& v) { (c.*block).*member = static_cast<I>(parse_int(name, v)); },
          [=](const RunConfig& c) { return std::to_string((c.*block).*member); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"method", "name", [](RunConfig& c, const std::string& v) { c.method = method_from_string(v); },
                 [](const RunConfig& c) { return std::string(to_string(c.method)); }});
    f.push_back(real("method", "lambda", &RunConfig::guidance, &GuidanceConfig::fixed_lambda));

    f.push_back({"pomdp", "level", [](RunConfig& c, const std::string& v) { c.level = PomdpLevel::from_name(v); },
                 [](const RunConfig& c) { return c.level.name; }});
    f.push_back({"pomdp", "noise_sigma",
                 [](RunConfig& c, const std::string& v) {
                   const double s = parse_double("pomdp.noise_sigma", v);
                   if (s != c.level.noise_sigma) c.level = PomdpLevel::custom(s, c.level.occlusion_rate);
                 },
                 [](const RunConfig& c) { return fmt_double(c.level.noise_sigma); }});
    f.push_back({"pomdp", "occlusion_rate",
                 [](RunConfig& c, const std::string& v) {
                   const double r = parse_double("pomdp.occlusion_rate", v);
                   if (r != c.level.occlusion_rate) c.level = PomdpLevel::custom(c.level.noise_sigma, r);
                 },
                 [](const RunConfig& c) { return fmt_double(c.level.occlusion_rate); }});
    f.push_back({"pomdp", "history_length",
                 [](RunConfig& c, const std::string& v) {
                   c.history_length = static_cast<int>(parse_int("pomdp.history_length", v));
                 },
                 [](const RunConfig& c) { return std::to_string(c.history_length); }});

    f.push_back({"schedule", "seed",
                 [](RunConfig& c, const std::string& v) {
                   c.seed = static_cast<std::uint64_t>(parse_int("schedule.seed", v));
                 },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});
    f.push_back({"schedule", "total_steps",
                 [](RunConfig& c, const std::string& v) { c.total_steps = parse_int("schedule.total_steps", v); },
                 [](const RunConfig& c) { return std::to_string(c.total_steps); }});
    f.push_back({"schedule", "eval_every",
                 [](RunConfig& c, const std::string& v) { c.eval_every = parse_int("schedule.eval_every", v); },
                 [](const RunConfig& c) { return std::to_string(c.eval_every); }});
    f.push_back({"schedule", "eval_episodes",
                 [](RunConfig& c, const std::string& v) {
                   c.eval_episodes = static_cast<int>(parse_int("schedule.eval_episodes", v));
                 },
                 [](const RunConfig& c) { return std::to_string(c.eval_episodes); }});

    f.push_back(integer("env", "lanes", &RunConfig::env, &EnvConfig::lanes));
    f.push_back(real("env", "lane_width", &RunConfig::env, &EnvConfig::lane_width));
    f.push_back(integer("env", "traffic_count", &RunConfig::env, &EnvConfig::traffic_count));
    f.push_back(real("env", "dt", &RunConfig::env, &EnvConfig::dt));
    f.push_back(integer("env", "horizon", &RunConfig::env, &EnvConfig::horizon));
    f.push_back(real("env", "accel_max", &RunConfig::env, &EnvConfig::accel_max));
    f.push_back(real("env", "steer_rate_max", &RunConfig::env, &EnvConfig::steer_rate_max));
    f.push_back(real("env", "speed_min", &RunConfig::env, &EnvConfig::speed_min));
    f.push_back(real("env", "speed_max", &RunConfig::env, &EnvConfig::speed_max));
    f.push_back(real("env", "initial_speed", &RunConfig::env, &EnvConfig::initial_speed));
    f.push_back(real("env", "traffic_speed_min", &RunConfig::env, &EnvConfig::traffic_speed_min));
    f.push_back(real("env", "traffic_speed_max", &RunConfig::env, &EnvConfig::traffic_speed_max));
    f.push_back(real("env", "w_speed", &RunConfig::env, &EnvConfig::w_speed));
    f.push_back(real("env", "w_lane", &RunConfig::env, &EnvConfig::w_lane));
    f.push_back(real("env", "w_collision", &RunConfig::env, &EnvConfig::w_collision));
    f.push_back(real("env", "lane_sigma", &RunConfig::env, &EnvConfig::lane_sigma));
    f.push_back(real("env", "vehicle_length", &RunConfig::env, &EnvConfig::vehicle_length));
    f.push_back(real("env", "vehicle_width", &RunConfig::env, &EnvConfig::vehicle_width));
    f.push_back(real("env", "spawn_ahead_min", &RunConfig::env, &EnvConfig::spawn_ahead_min));
    f.push_back(real("env", "spawn_ahead_max", &RunConfig::env, &EnvConfig::spawn_ahead_max));
    f.push_back(real("env", "respawn_ahead_min", &RunConfig::env, &EnvConfig::respawn_ahead_min));
    f.push_back(real("env", "respawn_ahead_max", &RunConfig::env, &EnvConfig::respawn_ahead_max));
    f.push_back(real("env", "recycle_behind", &RunConfig::env, &EnvConfig::recycle_behind));
    f.push_back(real("env", "recycle_ahead", &RunConfig::env, &EnvConfig::recycle_ahead));
    f.push_back(real("env", "min_gap", &RunConfig::env, &EnvConfig::min_gap));
    f.push_back(integer("env", "placement_retries", &RunConfig::env, &EnvConfig::placement_retries));

    f.push_back(real("sac", "alpha", &RunConfig::sac, &SacConfig::alpha));
    f.push_back({"sac", "alpha_mode",
                 [](RunConfig& c, const std::string& v) {
                   if (v == "fixed") {
                     c.sac.alpha_mode = AlphaMode::fixed;
                   } else if (v == "auto") {
                     c.sac.alpha_mode = AlphaMode::automatic;
                   } else {
                     throw ConfigError("sac.alpha_mode: expected fixed or auto, got '" + v + "'");
                   }
                 },
                 [](const RunConfig& c) { return std::string(c.sac.alpha_mode == AlphaMode::fixed ? "fixed" : "auto"); }});
    f.push_back(real("sac", "target_entropy", &RunConfig::sac, &SacConfig::target_entropy));
    f.push_back(real("sac", "gamma", &RunConfig::sac, &SacConfig::gamma));
    f.push_back(real("sac", "learning_rate", &RunConfig::sac, &SacConfig::learning_rate));
    f.push_back(integer("sac", "batch_size", &RunConfig::sac, &SacConfig::batch_size));
    f.push_back(integer("sac", "updates_per_step", &RunConfig::sac, &SacConfig::updates_per_step));
    f.push_back(real("sac", "polyak", &RunConfig::sac, &SacConfig::polyak));
    f.push_back(integer("sac", "hidden_units", &RunConfig::sac, &SacConfig::hidden_units));
    f.push_back(integer("sac", "hidden_layers", &RunConfig::sac, &SacConfig::hidden_layers));
    f.push_back(integer("sac", "buffer_capacity", &RunConfig::sac, &SacConfig::buffer_capacity));
    f.push_back({"sac", "scale_inputs",
                 [](RunConfig& c, const std::string& v) { c.sac.scale_inputs = parse_bool("sac.scale_inputs", v); },
                 [](const RunConfig& c) { return std::string(c.sac.scale_inputs ? "true" : "false"); }});

    f.push_back(real("guidance", "lambda_min", &RunConfig::guidance, &GuidanceConfig::lambda_min));
    f.push_back(real("guidance", "lambda_max", &RunConfig::guidance, &GuidanceConfig::lambda_max));
    f.push_back(integer("guidance", "warmup_steps", &RunConfig::guidance, &GuidanceConfig::warmup_steps));
    f.push_back(integer("guidance", "decay_horizon", &RunConfig::guidance, &GuidanceConfig::decay_horizon));

    f.push_back(integer("ensemble", "size", &RunConfig::ensemble, &EnsembleConfig::size));
    f.push_back(integer("ensemble", "hidden_units", &RunConfig::ensemble, &EnsembleConfig::hidden_units));
    f.push_back(integer("ensemble", "hidden_layers", &RunConfig::ensemble, &EnsembleConfig::hidden_layers));
    f.push_back(integer("ensemble", "batch_size", &RunConfig::ensemble, &EnsembleConfig::batch_size));
    f.push_back({"ensemble", "learning_rate",
                 [](RunConfig& c, const std::string& v) { c.ensemble.adam.learning_rate = parse_double("ensemble.learning_rate", v); },
                 [](const RunConfig& c) { return fmt_double(c.ensemble.adam.learning_rate); }});
    f.push_back({"ensemble", "target_mode",
                 [](RunConfig& c, const std::string& v) { c.ensemble.target_mode = target_mode_from_string(v); },
                 [](const RunConfig& c) { return std::string(to_string(c.ensemble.target_mode)); }});
    f.push_back({"ensemble", "blindness_samples",
                 [](RunConfig& c, const std::string& v) {
                   c.blindness_samples = static_cast<std::size_t>(parse_int("ensemble.blindness_samples", v));
                 },
                 [](const RunConfig& c) { return std::to_string(c.blindness_samples); }});
    return f;
  }();
  return table;
}

}  // namespace

void apply_setting(RunConfig& config, const std::string& section, const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (section == f.section && key == f.key) {
      f.set(config, value);
      return;
    }
  }
  throw ConfigError("unknown configuration key '" + section + "." + key + "'");
}

void RunConfig::validate() const {
  env.validate();
  if (history_length < 1) throw ConfigError("pomdp.history_length must be >= 1");
  if (total_steps < 0) throw ConfigError("schedule.total_steps must be >= 0");
  if (eval_every < 1) throw ConfigError("schedule.eval_every must be >= 1");
  if (eval_episodes < 1) throw ConfigError("schedule.eval_episodes must be >= 1");
  if (!(sac.alpha > 0.0)) throw ConfigError("sac.alpha must be positive");
  if (!(sac.gamma >= 0.0 && sac.gamma < 1.0)) throw ConfigError("sac.gamma must lie in [0, 1)");
  if (!(sac.learning_rate > 0.0)) throw ConfigError("sac.learning_rate must be positive");
  if (sac.batch_size < 1 || sac.updates_per_step < 1) throw ConfigError("sac batch size and updates_per_step must be >= 1");
  if (!(sac.polyak >= 0.0 && sac.polyak <= 1.0)) throw ConfigError("sac.polyak must lie in [0, 1]");
  if (sac.hidden_units < 1 || sac.hidden_layers < 1) throw ConfigError("sac network shape must be positive");
  if (sac.buffer_capacity < 1) throw ConfigError("sac.buffer_capacity must be >= 1");
  if (guidance.warmup_steps < 0) throw ConfigError("guidance.warmup_steps must be >= 0");
  if (guidance.decay_horizon < 0) throw ConfigError("guidance.decay_horizon must be >= 0");
  if (ensemble.size < 1 || ensemble.hidden_units < 1 || ensemble.hidden_layers < 1 || ensemble.batch_size < 1)
    throw ConfigError("ensemble shape must be positive");
  if (!(ensemble.adam.learning_rate > 0.0)) throw ConfigError("ensemble.learning_rate must be positive");
  if (blindness_samples < 1) throw ConfigError("ensemble.blindness_samples must be >= 1");
  if (method == Method::gsac_threshold && ensemble.size < 2)
    throw ConfigError("gsac_threshold needs an ensemble of at least 2 members");
  if (uses_ensemble() && ensemble.size >= 2 && guidance.warmup_steps < 10)
    throw ConfigError("adaptive guidance needs warmup_steps >= 10 for percentile calibration");
  if (method != Method::gsac_fixed && guidance.fixed_lambda != GuidanceConfig{}.fixed_lambda)
    throw ConfigError("method.lambda only applies to gsac_fixed");
  schedule().validate();
}

GuidanceSchedule RunConfig::schedule() const {
  GuidanceSchedule s;
  s.warmup_steps = guidance.warmup_steps;
  switch (method) {
    case Method::vanilla_sac: s.kind = FixedLambda{0.0}; break;
    case Method::gsac_fixed: s.kind = FixedLambda{guidance.fixed_lambda}; break;
    case Method::ba_gsac: {
      AdaptiveLambda a{guidance.lambda_min, guidance.lambda_max, std::nullopt, ensemble.size < 2};
      s.kind = a;
      break;
    }
    case Method::gsac_threshold: s.kind = ThresholdLambda{guidance.lambda_min, guidance.lambda_max, std::nullopt}; break;
    case Method::linear_decay: {
      const std::int64_t horizon = guidance.decay_horizon > 0 ? guidance.decay_horizon : std::max<std::int64_t>(total_steps, 1);
      s.kind = LinearDecayLambda{guidance.lambda_min, guidance.lambda_max, horizon};
      break;
    }
  }
  return s;
}

std::string RunConfig::method_label() const {
  if (method != Method::gsac_fixed) return to_string(method);
  char buf[64];
  std::snprintf(buf, sizeof buf, "gsac_fixed_%g", guidance.fixed_lambda);
  return buf;
}

std::string RunConfig::to_ini() const {
  std::ostringstream out;
  std::string section;
  for (const Field& f : fields()) {
    if (section != f.section) {
      if (!section.empty()) out << "\n";
      section = f.section;
      out << "[" << section << "]\n";
    }
    out << f.key << " = " << f.get(*this) << "\n";
  }
  return out.str();
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_ini())));
  return buf;
}

RunConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  RunConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("top-level key '" + section + "' must live inside a section");
    for (const auto& [key, node] : body) apply_setting(config, section, key, node.data());
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace bagsac
