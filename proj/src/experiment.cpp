#include "bagsac/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "bagsac/errors.hpp"

namespace bagsac {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

double population_std(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size()));
}

double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

EvalRecord finish_record(std::int64_t step, std::vector<double> returns, int collisions) {
  EvalRecord rec;
  rec.step = step;
  rec.mean_return = mean_of(returns);
  rec.return_std = population_std(returns);
  rec.collision_rate = static_cast<double>(collisions) / static_cast<double>(returns.size());
  rec.returns = std::move(returns);
  return rec;
}

template <typename ActionFn>
EvalRecord rollout(ActionFn&& act, const EvalSpec& spec, std::int64_t step) {
  require(spec.episodes >= 1, "evaluate: episodes must be >= 1");
  std::vector<double> returns;
  int collisions = 0;
  for (int e = 0; e < spec.episodes; ++e) {
    const auto ep = static_cast<std::uint64_t>(e);
    HighwayEnv env(spec.env);
    Rng obs_rng = make_stream(spec.run_seed, "eval_observation", {spec.eval_index, ep});
    ObservationHistory history(spec.history_length);
    history.push(observe(env.reset(derive_seed(spec.run_seed, "eval", {spec.eval_index, ep})), spec.level, obs_rng)
                     .observation);
    double ret = 0.0;
    bool collided = false;
    while (true) {
      const Action a = act(history.flatten());
      const StepResult r = env.step(a);
      ret += r.reward;
      if (r.terminated || r.truncated) {
        collided = r.collision;
        break;
      }
      history.push(observe(r.next_state, spec.level, obs_rng).observation);
    }
    returns.push_back(ret);
    if (collided) ++collisions;
  }
  return finish_record(step, std::move(returns), collisions);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("missing artifact: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingArtifact("cannot write " + path.string());
  out << text;
}

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

EvalRecord evaluate(const HistoryPolicy& policy, const EvalSpec& spec, std::int64_t step) {
  return rollout(
      [&](const Vector& h) {
        PrivilegeFirewall guard;
        return policy(h);
      },
      spec, step);
}

EvalRecord evaluate_random(const EvalSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return rollout(
      [&](const Vector&) {
        const double accel = u(rng);
        return Action{accel, u(rng)};
      },
      spec, 0);
}

// ---------------------------------------------------------------- summaries

nlohmann::json to_json(const RunSummary& s) {
  nlohmann::json j;
  j["method"] = s.method;
  j["level"] = s.level;
  j["seed"] = s.seed;
  j["config_hash"] = s.config_hash;
  j["total_steps"] = s.total_steps;
  j["evaluations"] = s.evaluations;
  j["last5_avg"] = s.last5_avg;
  j["last5_std"] = s.last5_std;
  j["collision_rate_last5"] = s.collision_rate_last5;
  j["best"] = s.best;
  j["lambda_activity_fraction"] = s.lambda_activity;
  j["lambda_activity_post_warmup"] = opt_json(s.lambda_activity_post_warmup);
  if (s.disagreement) {
    const DisagreementSummary& d = *s.disagreement;
    j["disagreement"] = {{"count", d.count},   {"mean", d.mean}, {"min", d.min},
                         {"max", d.max},       {"p10", d.p10},   {"p50", d.p50},
                         {"p90", d.p90},       {"warmup_mean", opt_json(d.warmup_mean)},
                         {"post_warmup_mean", opt_json(d.post_warmup_mean)}};
  } else {
    j["disagreement"] = nullptr;
  }
  if (s.calibration) {
    j["calibration"] = {{"u_lo", s.calibration->u_lo},
                        {"u_hi", s.calibration->u_hi},
                        {"degenerate", s.calibration->degenerate}};
  } else {
    j["calibration"] = nullptr;
  }
  j["threshold"] = opt_json(s.threshold);
  j["privileged_reads"] = s.privileged_reads;
  return j;
}

RunSummary summary_from_json(const nlohmann::json& j) {
  RunSummary s;
  try {
    s.method = j.at("method").get<std::string>();
    s.level = j.at("level").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.config_hash = j.at("config_hash").get<std::string>();
    s.total_steps = j.at("total_steps").get<std::int64_t>();
    s.evaluations = j.at("evaluations").get<std::size_t>();
    s.last5_avg = j.at("last5_avg").get<double>();
    s.last5_std = j.at("last5_std").get<double>();
    s.collision_rate_last5 = j.at("collision_rate_last5").get<double>();
    s.best = j.at("best").get<double>();
    s.lambda_activity = j.at("lambda_activity_fraction").get<double>();
    if (!j.at("lambda_activity_post_warmup").is_null())
      s.lambda_activity_post_warmup = j.at("lambda_activity_post_warmup").get<double>();
    s.privileged_reads = j.at("privileged_reads").get<std::uint64_t>();
    auto maybe = [](const nlohmann::json& v) -> std::optional<double> {
      if (v.is_null()) return std::nullopt;
      return v.get<double>();
    };
    if (const auto& d = j.at("disagreement"); !d.is_null()) {
      DisagreementSummary ds;
      ds.count = d.at("count").get<std::size_t>();
      ds.mean = d.at("mean").get<double>();
      ds.min = d.at("min").get<double>();
      ds.max = d.at("max").get<double>();
      ds.p10 = d.at("p10").get<double>();
      ds.p50 = d.at("p50").get<double>();
      ds.p90 = d.at("p90").get<double>();
      ds.warmup_mean = maybe(d.at("warmup_mean"));
      ds.post_warmup_mean = maybe(d.at("post_warmup_mean"));
      s.disagreement = ds;
    }
    if (const auto& c = j.at("calibration"); !c.is_null()) {
      Calibration cal;
      cal.u_lo = c.at("u_lo").get<double>();
      cal.u_hi = c.at("u_hi").get<double>();
      cal.degenerate = c.at("degenerate").get<bool>();
      cal.frozen = true;
      s.calibration = cal;
    }
    s.threshold = maybe(j.at("threshold"));
  } catch (const nlohmann::json::exception& e) {
    throw MissingArtifact(std::string("malformed summary: ") + e.what());
  }
  return s;
}

RunSummary summarize(std::span<const EvalRecord> evals, std::span<const double> lambdas,
                     std::span<const std::optional<double>> disagreements, double lambda_min,
                     std::int64_t warmup_steps) {
  if (evals.size() < 5) {
    throw InsufficientCheckpoints("insufficient checkpoints: " + std::to_string(evals.size()) +
                                  " evaluations, the last-5 summary needs 5");
  }
  RunSummary s;
  s.evaluations = evals.size();
  std::vector<double> last, coll;
  for (std::size_t i = evals.size() - 5; i < evals.size(); ++i) {
    last.push_back(evals[i].mean_return);
    coll.push_back(evals[i].collision_rate);
  }
  s.last5_avg = mean_of(last);
  s.last5_std = population_std(last);
  s.collision_rate_last5 = mean_of(coll);
  s.best = evals.front().mean_return;
  for (const EvalRecord& e : evals) s.best = std::max(s.best, e.mean_return);

  if (!lambdas.empty()) {
    s.lambda_activity = lambda_activity(lambdas, lambda_min);
    const auto w = static_cast<std::size_t>(std::max<std::int64_t>(warmup_steps, 0));
    if (w < lambdas.size()) s.lambda_activity_post_warmup = lambda_activity(lambdas.subspan(w), lambda_min);
  }

  std::vector<double> all, warm, post;
  for (std::size_t t = 0; t < disagreements.size(); ++t) {
    if (!disagreements[t]) continue;
    all.push_back(*disagreements[t]);
    (static_cast<std::int64_t>(t) < warmup_steps ? warm : post).push_back(*disagreements[t]);
  }
  if (!all.empty()) {
    DisagreementSummary d;
    d.count = all.size();
    d.mean = mean_of(all);
    d.min = *std::min_element(all.begin(), all.end());
    d.max = *std::max_element(all.begin(), all.end());
    d.p10 = percentile(all, 0.1);
    d.p50 = percentile(all, 0.5);
    d.p90 = percentile(all, 0.9);
    if (!warm.empty()) d.warmup_mean = mean_of(warm);
    if (!post.empty()) d.post_warmup_mean = mean_of(post);
    s.disagreement = d;
  }
  return s;
}

SeedAggregate aggregate_seeds(std::span<const double> values) {
  require(values.size() >= 2, "aggregate_seeds: need at least 2 seeds");
  SeedAggregate a;
  a.values.assign(values.begin(), values.end());
  a.mean = mean_of(values);
  a.min = *std::min_element(values.begin(), values.end());
  if (a.mean == 0.0) {
    std::cerr << "warning: seed mean is 0, coefficient of variation undefined\n";
  } else {
    a.cv_percent = 100.0 * population_std(values) / a.mean;
  }
  return a;
}

SeedAggregate aggregate_seeds(std::span<const RunSummary> summaries) {
  std::vector<double> v;
  for (const RunSummary& s : summaries) v.push_back(s.last5_avg);
  return aggregate_seeds(v);
}

nlohmann::json to_json(const SeedAggregate& a) {
  return {{"values", a.values}, {"mean", a.mean}, {"cv_percent", opt_json(a.cv_percent)}, {"min", a.min}};
}

// ---------------------------------------------------------------- trainer

Trainer::Trainer(RunConfig config)
    : config_(std::move(config)),
      schedule_(config_.schedule()),
      history_dim_(config_.effective_history() * kFeatureDim),
      env_rng_(make_stream(config_.seed, "env")),
      obs_rng_(make_stream(config_.seed, "observation")),
      agent_rng_(make_stream(config_.seed, "agent")),
      ensemble_rng_(make_stream(config_.seed, "ensemble")),
      env_(config_.env),
      history_(config_.effective_history()),
      replay_(config_.sac.buffer_capacity),
      warmup_(static_cast<std::size_t>(std::max<std::int64_t>(config_.guidance.warmup_steps, 1))),
      temperature_(config_.sac.alpha, config_.sac.alpha_mode, config_.sac.target_entropy, config_.adam()) {
  config_.validate();
  const NetShape shape = config_.net_shape();
  const AdamConfig adam = config_.adam();
  const std::uint64_t s = config_.seed;
  control_ = std::make_unique<StochasticActor>(history_dim_, shape, adam, derive_seed(s, "control_actor"));
  if (config_.guided()) {
    guiding_ = std::make_unique<StochasticActor>(kFeatureDim, shape, adam, derive_seed(s, "guiding_actor"));
    distill_ = std::make_unique<DistillationNet>(history_dim_, shape, adam, derive_seed(s, "distillation"));
    critic_ = std::make_unique<Critic>(kFeatureDim, shape, adam, derive_seed(s, "critic"));
  } else {
    critic_ = std::make_unique<Critic>(history_dim_, shape, adam, derive_seed(s, "critic"));
  }
  if (config_.uses_ensemble()) {
    EnsembleConfig ec = config_.ensemble;
    ec.adam = adam;
    ec.adam.learning_rate = config_.ensemble.adam.learning_rate;
    ensemble_ = std::make_unique<Ensemble>(history_dim_, ec, derive_seed(s, "ensemble"));
  }
  begin_episode();
}

Trainer::~Trainer() = default;

void Trainer::begin_episode() {
  state_ = env_.reset(env_rng_());
  history_.reset();
  history_.push(observe(state_, config_.level, obs_rng_).observation);
}

TrainRow Trainer::advance() {
  TrainRow row;
  row.step = t_;
  const Vector h = history_.flatten();
  const Selection sel = select_action(t_, guiding_.get(), *control_, &state_, h, agent_rng_, false);
  row.tag = sel.tag;

  const StepResult r = env_.step(sel.action);
  const Observed o = observe(r.next_state, config_.level, obs_rng_);
  history_.push(o.observation);

  Transition tr;
  tr.full_state = state_;
  tr.history = h;
  tr.action = sel.action;
  tr.reward = r.reward;
  tr.next_full_state = r.next_state;
  tr.next_history = history_.flatten();
  tr.done = r.terminated;
  tr.occlusion_mask = o.occluded;
  replay_.push(std::move(tr));
  row.reward = r.reward;

  std::optional<double> u;
  if (ensemble_ && ensemble_->size() >= 2) {
    const auto preds = ensemble_->predict(h, sel.action);
    u = disagreement(preds);
  }
  row.disagreement = u;
  const std::int64_t W = config_.guidance.warmup_steps;
  if (t_ < W && u && schedule_.needs_disagreement()) warmup_.push(*u);
  if (t_ == W && schedule_.needs_disagreement()) schedule_.freeze(warmup_);
  const double lambda = lambda_at(schedule_, t_, u);
  row.lambda = lambda;

  if (t_ >= W) {
    try {
      updates(lambda, row);
    } catch (const NumericalError& e) {
      std::ostringstream msg;
      msg << "numerical abort at step " << t_ << ": " << e.what();
      throw NumericalError(msg.str());
    }
  }
  if (ensemble_) {
    const auto losses = ensemble_->update(replay_, ensemble_rng_);
    for (std::size_t i = 0; i < losses.size(); ++i) {
      if (!std::isfinite(losses[i]))
        throw NumericalError("numerical abort at step " + std::to_string(t_) + ": ensemble member " +
                             std::to_string(i) + " loss is not finite");
    }
  }

  if (r.terminated || r.truncated) {
    begin_episode();
  } else {
    state_ = r.next_state;
  }
  ++t_;
  return row;
}

void Trainer::updates(double lambda, TrainRow& row) {
  const auto B = static_cast<std::size_t>(config_.sac.batch_size);
  const double gamma = config_.sac.gamma;
  const bool guided = config_.guided();
  std::string component;
  auto check = [&](double v, const char* what) {
    if (!std::isfinite(v)) throw NumericalError(std::string(what) + " loss is not finite");
  };
  for (int k = 0; k < config_.sac.updates_per_step; ++k) {
    const auto positions = replay_.sample(B, agent_rng_);
    const TransitionBatch b = gather(replay_, positions);
    const Eigen::Index n = b.size();
    const double alpha = temperature_.alpha();
    const Matrix& critic_states = guided ? b.states : b.histories;
    const Matrix& critic_next = guided ? b.next_states : b.next_histories;

    // critic: next actions from the guiding actor on s' (control actor on h' for vanilla)
    const Matrix next_noise = standard_normal(n, kActionDim, agent_rng_);
    const PolicyHead next = guided ? guiding_->head(b.next_states, next_noise) : control_->head(b.next_histories, next_noise);
    Vector y;
    try {
      y = td_target(b.rewards, b.dones, critic_->target_min(critic_next, next.action), next.log_prob, alpha, gamma);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string("critic: ") + e.what());
    }
    const Critic::Losses cl = critic_->update(critic_states, b.actions, y);
    check(cl.q1 + cl.q2, "critic");
    row.critic_loss = 0.5 * (cl.q1 + cl.q2);

    if (guided) {
      const Matrix gn = standard_normal(n, kActionDim, agent_rng_);
      check(guiding_actor_update(*guiding_, b.states, b.states, *critic_, alpha, gn).loss, "guiding actor");
    }
    const Matrix cn = standard_normal(n, kActionDim, agent_rng_);
    const ActorLoss ctrl =
        control_actor_update(*control_, b.histories, critic_states, *critic_, distill_.get(), alpha, lambda, cn);
    check(ctrl.loss, "control actor");
    row.control_loss = ctrl.loss;
    if (guided) {
      const double dl = distillation_update(*distill_, b.histories, b.states, *guiding_);
      check(dl, "distillation");
      row.distill_loss = dl;
    }
    temperature_.update(ctrl.log_probs);
    critic_->soft_update(config_.sac.polyak);
  }
}

EvalRecord Trainer::run_evaluation(std::uint64_t eval_index) {
  EvalSpec spec{config_.env, config_.level, config_.effective_history(), config_.eval_episodes, config_.seed,
                eval_index};
  return evaluate(deployed_policy(), spec, t_);
}

HistoryPolicy Trainer::deployed_policy() const {
  const StochasticActor* actor = control_.get();
  return [actor](const Vector& h) {
    const Matrix a = actor->mean_action(h.transpose());
    return Action{a(0, 0), a(0, 1)};
  };
}

std::optional<BlindnessReport> Trainer::blindness() const {
  if (replay_.empty()) return std::nullopt;
  const std::size_t n = std::min(config_.blindness_samples, replay_.size());
  if (ensemble_) return blindness_report(*ensemble_, replay_, n, config_.level.name);
  return target_report(config_.ensemble.target_mode, replay_, n, config_.level.name);
}

std::string replay_bytes(const ReplayBuffer& buffer, std::size_t count) {
  std::string out;
  for (std::size_t i = 0; i < std::min(count, buffer.size()); ++i) buffer.at(i).append_bytes(out);
  return out;
}

// ---------------------------------------------------------------- run files

namespace {

const char* kTrainHeader = "step,actor_tag,reward,lambda,disagreement,critic_loss,control_loss,distill_loss\n";
const char* kEvalHeader = "step,mean_return,return_std,collision_rate\n";

std::string train_line(const TrainRow& r) {
  std::string s = std::to_string(r.step);
  s += ',';
  s += to_string(r.tag);
  for (const std::string& cell :
       {fmt(r.reward), fmt(r.lambda), fmt(r.disagreement), fmt(r.critic_loss), fmt(r.control_loss),
        fmt(r.distill_loss)}) {
    s += ',';
    s += cell;
  }
  s += '\n';
  return s;
}

std::string eval_line(const EvalRecord& e) {
  return std::to_string(e.step) + "," + fmt(e.mean_return) + "," + fmt(e.return_std) + "," + fmt(e.collision_rate) +
         "\n";
}

nlohmann::json policy_json(const RunConfig& cfg, const StochasticActor& actor) {
  const Vector& p = actor.net().parameters();
  return {{"config_hash", cfg.hash()},
          {"layer_sizes", actor.net().layer_sizes()},
          {"parameters", std::vector<double>(p.data(), p.data() + p.size())}};
}

struct TraceColumns {
  std::vector<double> lambdas;
  std::vector<std::optional<double>> disagreements;
};

TraceColumns read_train_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line + "\n" != kTrainHeader)
    throw MissingArtifact("train.csv has an unexpected header: " + path.string());
  TraceColumns cols;
  while (std::getline(in, line)) {
    const auto cells = split_csv(line);
    if (cells.size() != 8) throw MissingArtifact("train.csv row with " + std::to_string(cells.size()) + " cells");
    cols.lambdas.push_back(std::stod(cells[3]));
    cols.disagreements.push_back(cells[4].empty() ? std::nullopt : std::optional<double>(std::stod(cells[4])));
  }
  return cols;
}

}  // namespace

RunResult train_run(const RunConfig& config, const std::optional<std::filesystem::path>& out_dir) {
  config.validate();
  Trainer trainer(config);
  RunResult result;

  std::ofstream train_csv, eval_csv;
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    write_file(*out_dir / "config.ini", config.to_ini());
    std::filesystem::remove(*out_dir / "summary.json");
    train_csv.open(*out_dir / "train.csv", std::ios::binary | std::ios::trunc);
    eval_csv.open(*out_dir / "eval.csv", std::ios::binary | std::ios::trunc);
    if (!train_csv || !eval_csv) throw MissingArtifact("cannot create trace files in " + out_dir->string());
    train_csv << kTrainHeader;
    eval_csv << kEvalHeader;
  }

  const std::uint64_t reads_before = PrivilegeFirewall::violations();
  std::vector<double> lambdas;
  std::vector<std::optional<double>> disagreements;
  lambdas.reserve(static_cast<std::size_t>(config.total_steps));
  disagreements.reserve(static_cast<std::size_t>(config.total_steps));
  std::uint64_t eval_index = 0;
  TrainRow last{};
  try {
    for (std::int64_t t = 0; t < config.total_steps; ++t) {
      TrainRow row = trainer.advance();
      if (out_dir) train_csv << train_line(row);
      lambdas.push_back(row.lambda);
      disagreements.push_back(row.disagreement);
      last = row;
      result.rows.push_back(row);
      if ((t + 1) % config.eval_every == 0) {
        EvalRecord rec = trainer.run_evaluation(eval_index++);
        if (out_dir) eval_csv << eval_line(rec) << std::flush;
        result.evals.push_back(std::move(rec));
      }
    }
  } catch (const NumericalError& e) {
    if (out_dir) {
      train_csv.flush();
      nlohmann::json snap = {{"error", e.what()},
                             {"step", trainer.step()},
                             {"last_critic_loss", opt_json(last.critic_loss)},
                             {"last_control_loss", opt_json(last.control_loss)},
                             {"last_distill_loss", opt_json(last.distill_loss)}};
      write_file(*out_dir / "abort.json", snap.dump(2) + "\n");
    }
    throw;
  }
  train_csv.close();
  eval_csv.close();

  result.blindness = trainer.blindness();
  if (out_dir) {
    if (result.blindness) write_file(*out_dir / "blindness.json", to_json(*result.blindness).dump(2) + "\n");
    write_file(*out_dir / "policy.json", policy_json(config, trainer.control()).dump() + "\n");
    write_file(*out_dir / "replay_head.bin",
               replay_bytes(trainer.replay(), static_cast<std::size_t>(config.guidance.warmup_steps)));
  }

  RunSummary s = summarize(result.evals, lambdas, disagreements, config.guidance.lambda_min,
                           config.guidance.warmup_steps);
  s.method = config.method_label();
  s.level = config.level.name;
  s.seed = config.seed;
  s.config_hash = config.hash();
  s.total_steps = config.total_steps;
  s.privileged_reads = PrivilegeFirewall::violations() - reads_before;
  if (const auto* a = std::get_if<AdaptiveLambda>(&trainer.schedule().kind)) s.calibration = a->calibration;
  if (const auto* th = std::get_if<ThresholdLambda>(&trainer.schedule().kind)) s.threshold = th->tau;
  result.summary = s;
  if (out_dir) write_file(*out_dir / "summary.json", to_json(s).dump(2) + "\n");
  return result;
}

EvalRecord evaluate_run(const std::filesystem::path& run_dir, int episodes) {
  const RunConfig cfg = load_config(run_dir / "config.ini");
  nlohmann::json pj;
  try {
    pj = nlohmann::json::parse(read_file(run_dir / "policy.json"));
  } catch (const nlohmann::json::exception& e) {
    throw MissingArtifact(std::string("malformed policy.json: ") + e.what());
  }
  StochasticActor actor(cfg.effective_history() * kFeatureDim, cfg.net_shape(), cfg.adam(), 0);
  const auto params = pj.at("parameters").get<std::vector<double>>();
  if (params.size() != actor.net().parameter_count())
    throw MissingArtifact("policy.json does not match the run configuration");
  actor.mutable_net().set_parameters(Eigen::Map<const Vector>(params.data(), static_cast<Eigen::Index>(params.size())));
  EvalSpec spec{cfg.env, cfg.level, cfg.effective_history(), episodes, derive_seed(cfg.seed, "re_evaluate"), 0};
  return evaluate(
      [&](const Vector& h) {
        const Matrix a = actor.mean_action(h.transpose());
        return Action{a(0, 0), a(0, 1)};
      },
      spec, cfg.total_steps);
}

nlohmann::json diagnose(const std::filesystem::path& run_dir) {
  const auto ini = run_dir / "config.ini";
  if (!std::filesystem::exists(ini)) throw MissingArtifact("missing artifact: " + ini.string());
  const RunConfig cfg = load_config(ini);
  const TraceColumns cols = read_train_csv(run_dir / "train.csv");
  if (cols.lambdas.empty()) throw MissingArtifact("train.csv holds no steps: " + (run_dir / "train.csv").string());

  nlohmann::json report;
  report["run"] = run_dir.string();
  report["method"] = cfg.method_label();
  report["level"] = cfg.level.name;
  report["seed"] = cfg.seed;

  const GuidanceSchedule sched = cfg.schedule();
  nlohmann::json lam;
  lam["schedule"] = std::visit(
      [](const auto& k) -> std::string {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, FixedLambda>) return "fixed";
        if constexpr (std::is_same_v<K, AdaptiveLambda>) return "adaptive";
        if constexpr (std::is_same_v<K, ThresholdLambda>) return "threshold";
        return "linear_decay";
      },
      sched.kind);
  lam["constant"] = std::holds_alternative<FixedLambda>(sched.kind);
  lam["lambda_min"] = cfg.guidance.lambda_min;
  lam["activity_threshold"] = cfg.guidance.lambda_min + 0.01;
  lam["activity_fraction"] = lambda_activity(cols.lambdas, cfg.guidance.lambda_min);
  const auto w = static_cast<std::size_t>(cfg.guidance.warmup_steps);
  lam["post_warmup_activity_fraction"] =
      w < cols.lambdas.size()
          ? nlohmann::json(lambda_activity(std::span<const double>(cols.lambdas).subspan(w), cfg.guidance.lambda_min))
          : nlohmann::json(nullptr);
  lam["steps"] = cols.lambdas.size();
  report["lambda"] = lam;

  std::vector<double> u;
  for (const auto& d : cols.disagreements)
    if (d) u.push_back(*d);
  if (u.empty()) {
    report["disagreement"] = nullptr;
  } else {
    report["disagreement"] = {{"count", u.size()},
                              {"mean", mean_of(u)},
                              {"p10", percentile(u, 0.1)},
                              {"p50", percentile(u, 0.5)},
                              {"p90", percentile(u, 0.9)}};
  }

  const auto bpath = run_dir / "blindness.json";
  if (!std::filesystem::exists(bpath)) throw MissingArtifact("missing artifact: " + bpath.string());
  try {
    report["blindness"] = nlohmann::json::parse(read_file(bpath));
  } catch (const nlohmann::json::exception& e) {
    throw MissingArtifact(std::string("malformed blindness.json: ") + e.what());
  }
  return report;
}

}  // namespace bagsac
