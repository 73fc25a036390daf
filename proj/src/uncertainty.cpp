#include "bagsac/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "bagsac/errors.hpp"

namespace bagsac {

const char* to_string(TargetMode mode) { return mode == TargetMode::partial_obs ? "partial_obs" : "full_state"; }

TargetMode target_mode_from_string(const std::string& name) {
  if (name == "partial_obs") return TargetMode::partial_obs;
  if (name == "full_state") return TargetMode::full_state;
  throw ConfigError("unknown ensemble target mode '" + name + "' (expected partial_obs or full_state)");
}

namespace {
std::vector<std::uint64_t> default_seeds(int n, std::uint64_t seed) {
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < n; ++i) seeds.push_back(derive_seed(seed, "ensemble_member", {static_cast<std::uint64_t>(i)}));
  return seeds;
}
}  // namespace

Ensemble::Ensemble(int history_dim, const EnsembleConfig& config, std::uint64_t seed)
    : Ensemble(history_dim, config, default_seeds(config.size, seed)) {}

Ensemble::Ensemble(int history_dim, const EnsembleConfig& config, std::span<const std::uint64_t> member_seeds)
    : history_dim_(history_dim), config_(config), seeds_(member_seeds.begin(), member_seeds.end()) {
  require(!seeds_.empty(), "ensemble needs at least one member");
  config_.size = static_cast<int>(seeds_.size());
  std::vector<int> sizes{history_dim + kActionDim};
  for (int l = 0; l < config.hidden_layers; ++l) sizes.push_back(config.hidden_units);
  sizes.push_back(kFeatureDim);
  for (std::uint64_t s : seeds_) {
    members_.emplace_back(sizes, Activation::relu, s);
    adams_.emplace_back(members_.back().parameter_count(), config.adam);
  }
}

Matrix Ensemble::make_inputs(const Matrix& histories, const Matrix& actions) {
  require(histories.rows() == actions.rows() && actions.cols() == kActionDim, "ensemble inputs: shape mismatch");
  Matrix x(histories.rows(), histories.cols() + kActionDim);
  x << histories, actions;
  return x;
}

std::vector<Vector> Ensemble::predict(const Vector& history, const Action& action) const {
  require(history.size() == history_dim_, "ensemble_predict: history dimension mismatch");
  Matrix x(1, history_dim_ + kActionDim);
  x.leftCols(history_dim_) = history.transpose();
  x(0, history_dim_) = action.accel;
  x(0, history_dim_ + 1) = action.steer;
  std::vector<Vector> out;
  out.reserve(members_.size());
  for (const Mlp& m : members_) out.emplace_back(m.forward(x).row(0).transpose());
  return out;
}

Matrix Ensemble::predict_member(int member, const Matrix& inputs) const {
  return members_.at(static_cast<std::size_t>(member)).forward(inputs);
}

Matrix Ensemble::inputs(const ReplayBuffer& buffer, std::span<const std::size_t> positions) const {
  Matrix x(static_cast<Eigen::Index>(positions.size()), history_dim_ + kActionDim);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const Transition& t = buffer.at(positions[i]);
    const auto r = static_cast<Eigen::Index>(i);
    x.row(r).head(history_dim_) = t.history.transpose();
    x(r, history_dim_) = t.action.accel;
    x(r, history_dim_ + 1) = t.action.steer;
  }
  return x;
}

Matrix Ensemble::targets(const ReplayBuffer& buffer, std::span<const std::size_t> positions) const {
  Matrix y(static_cast<Eigen::Index>(positions.size()), kFeatureDim);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const Transition& t = buffer.at(positions[i]);
    const auto r = static_cast<Eigen::Index>(i);
    if (config_.target_mode == TargetMode::partial_obs) {
      y.row(r) = t.next_observation().transpose();
    } else {
      const Features& f = t.next_full_state.features();
      for (int c = 0; c < kFeatureDim; ++c) y(r, c) = f[static_cast<std::size_t>(c)];
    }
  }
  return y;
}

double Ensemble::member_loss(int member, const Matrix& inputs, const Matrix& targets, Vector* grad) const {
  const Mlp& net = members_.at(static_cast<std::size_t>(member));
  Tape tape;
  const Matrix pred = net.forward(inputs, grad != nullptr ? &tape : nullptr);
  const Matrix diff = pred - targets;
  const double n = static_cast<double>(diff.size());
  const double loss = diff.squaredNorm() / n;
  if (!std::isfinite(loss)) throw NumericalError("ensemble member " + std::to_string(member) + " loss is not finite");
  if (grad != nullptr) net.backward(tape, (2.0 / n) * diff, grad);
  return loss;
}

std::vector<double> Ensemble::update(const ReplayBuffer& buffer, Rng& rng) {
  require(!buffer.empty(), "ensemble_update: empty buffer");
  std::vector<std::vector<std::size_t>> batches;
  batches.reserve(members_.size());
  for (std::size_t i = 0; i < members_.size(); ++i)
    batches.push_back(buffer.sample(static_cast<std::size_t>(config_.batch_size), rng));
  return update_on(buffer, batches);
}

std::vector<double> Ensemble::update_on(const ReplayBuffer& buffer,
                                        const std::vector<std::vector<std::size_t>>& batches) {
  require(batches.size() == members_.size(), "ensemble update: one minibatch per member expected");
  std::vector<double> losses;
  for (std::size_t i = 0; i < members_.size(); ++i) {
    const Matrix x = inputs(buffer, batches[i]);
    const Matrix y = targets(buffer, batches[i]);
    Vector grad;
    losses.push_back(member_loss(static_cast<int>(i), x, y, &grad));
    adams_[i].step(members_[i], grad);
  }
  return losses;
}

double disagreement(std::span<const Vector> predictions) {
  const std::size_t n = predictions.size();
  if (n < 2) throw ContractViolation("disagreement needs at least two ensemble members");
  for (const Vector& p : predictions) require(p.size() == predictions[0].size(), "disagreement: length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) sum += (predictions[i] - predictions[j]).squaredNorm();
  return 2.0 / (static_cast<double>(n) * static_cast<double>(n - 1)) * sum;
}

double percentile(std::vector<double> values, double p) {
  require(!values.empty(), "percentile of an empty set");
  require(p >= 0.0 && p <= 1.0, "percentile: p must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

Calibration calibrate(const WarmupBuffer& warmup) {
  if (warmup.size() < 10) {
    throw ContractViolation("calibrate: need at least 10 warmup values, have " + std::to_string(warmup.size()));
  }
  Calibration c;
  c.u_lo = percentile(warmup.values(), 0.10);
  c.u_hi = percentile(warmup.values(), 0.90);
  c.frozen = true;
  if (!(c.u_hi > c.u_lo)) {
    std::cerr << "warning: degenerate warmup disagreement spread (u_lo = u_hi = " << c.u_lo << "); widening by "
              << kCalibrationEpsilon << "\n";
    c.u_hi = c.u_lo + kCalibrationEpsilon;
    c.degenerate = true;
  }
  return c;
}

namespace {

struct PartitionAccumulator {
  std::vector<double> targets;
  std::array<std::vector<double>, kFeatureCols> by_feature;
  double sq_err = 0.0;
  double abs_pred = 0.0;
  double disagreement = 0.0;

  void add(int feature, double target) {
    targets.push_back(target);
    by_feature[static_cast<std::size_t>(feature)].push_back(target);
  }
};

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

PartitionStats finish(const PartitionAccumulator& acc, bool with_predictions, bool with_disagreement,
                      std::size_t n_samples) {
  PartitionStats s;
  s.entries = acc.targets.size();
  const double n = static_cast<double>(s.entries);
  s.target_mean = mean_of(acc.targets);
  s.target_std = std_of(acc.targets);
  for (std::size_t f = 0; f < kFeatureCols; ++f) s.feature_target_std[f] = std_of(acc.by_feature[f]);
  if (with_predictions && s.entries > 0) {
    s.mse = acc.sq_err / n;
    s.mean_abs_prediction = acc.abs_pred / n;
  }
  if (with_disagreement && s.entries > 0) {
    s.disagreement = acc.disagreement / n;
    s.u_share = acc.disagreement / static_cast<double>(n_samples);
  }
  return s;
}

BlindnessReport build_report(const Ensemble* ensemble, TargetMode mode, const ReplayBuffer& buffer,
                             std::size_t sample_size, const std::string& level) {
  require(sample_size >= 1, "blindness_report: sample size must be >= 1");
  if (buffer.size() < sample_size) {
    throw ContractViolation("blindness_report: buffer holds " + std::to_string(buffer.size()) +
                            " transitions, need " + std::to_string(sample_size));
  }
  std::vector<std::size_t> positions(sample_size);
  for (std::size_t i = 0; i < sample_size; ++i) positions[i] = buffer.size() - sample_size + i;

  Matrix targets(static_cast<Eigen::Index>(sample_size), kFeatureDim);
  for (std::size_t i = 0; i < sample_size; ++i) {
    const Transition& t = buffer.at(positions[i]);
    const auto r = static_cast<Eigen::Index>(i);
    if (mode == TargetMode::partial_obs) {
      targets.row(r) = t.next_observation().transpose();
    } else {
      targets.row(r) = t.next_full_state.to_vector().transpose();
    }
  }

  std::vector<Matrix> preds;
  if (ensemble != nullptr) {
    const Matrix x = ensemble->inputs(buffer, positions);
    for (int m = 0; m < ensemble->size(); ++m) preds.push_back(ensemble->predict_member(m, x));
  }
  const std::size_t members = preds.size();
  const bool with_dis = members >= 2;

  PartitionAccumulator visible, occluded, neighbors;
  for (std::size_t i = 0; i < sample_size; ++i) {
    const OcclusionMask& mask = buffer.at(positions[i]).occlusion_mask;
    const auto r = static_cast<Eigen::Index>(i);
    for (int d = 0; d < kFeatureDim; ++d) {
      const int row = d / kFeatureCols;
      const bool hidden = row > 0 && mask[static_cast<std::size_t>(row - 1)];
      PartitionAccumulator& acc = hidden ? occluded : visible;
      const double target = targets(r, d);
      double sq_err = 0.0, mean_pred = 0.0, dis = 0.0;
      for (const Matrix& p : preds) {
        const double e = p(r, d) - target;
        sq_err += e * e / static_cast<double>(members);
        mean_pred += p(r, d) / static_cast<double>(members);
      }
      if (with_dis) {
        double pair = 0.0;
        for (std::size_t a = 0; a < members; ++a)
          for (std::size_t b = a + 1; b < members; ++b) {
            const double diff = preds[a](r, d) - preds[b](r, d);
            pair += diff * diff;
          }
        dis = 2.0 / (static_cast<double>(members) * static_cast<double>(members - 1)) * pair;
      }
      for (PartitionAccumulator* a : {&acc, (!hidden && row > 0) ? &neighbors : nullptr}) {
        if (a == nullptr) continue;
        a->add(d % kFeatureCols, target);
        a->sq_err += sq_err;
        a->abs_pred += std::abs(mean_pred);
        a->disagreement += dis;
      }
    }
  }

  BlindnessReport report;
  report.mode = mode;
  report.level = level;
  report.n_samples = sample_size;
  report.visible = finish(visible, members > 0, with_dis, sample_size);
  report.visible_neighbors = finish(neighbors, members > 0, with_dis, sample_size);
  if (!occluded.targets.empty()) report.occluded = finish(occluded, members > 0, with_dis, sample_size);
  return report;
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v.has_value() ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json partition_json(const PartitionStats& s) {
  nlohmann::json feature_std = nlohmann::json::object();
  const char* names[kFeatureCols] = {"presence", "x", "y", "vx", "vy"};
  for (std::size_t f = 0; f < kFeatureCols; ++f) feature_std[names[f]] = s.feature_target_std[f];
  return {{"entries", s.entries},
          {"mse", optional_json(s.mse)},
          {"disagreement", optional_json(s.disagreement)},
          {"mean_abs_prediction", optional_json(s.mean_abs_prediction)},
          {"target_mean", s.target_mean},
          {"target_std", s.target_std},
          {"feature_target_std", feature_std},
          {"u_share", optional_json(s.u_share)}};
}

}  // namespace

BlindnessReport blindness_report(const Ensemble& ensemble, const ReplayBuffer& buffer, std::size_t sample_size,
                                 const std::string& level) {
  return build_report(&ensemble, ensemble.target_mode(), buffer, sample_size, level);
}

BlindnessReport target_report(TargetMode mode, const ReplayBuffer& buffer, std::size_t sample_size,
                              const std::string& level) {
  return build_report(nullptr, mode, buffer, sample_size, level);
}

nlohmann::json to_json(const BlindnessReport& report) {
  nlohmann::json j;
  j["mode"] = to_string(report.mode);
  j["level"] = report.level;
  j["n_samples"] = report.n_samples;
  j["visible"] = partition_json(report.visible);
  j["occluded"] = report.occluded ? partition_json(*report.occluded) : nlohmann::json(nullptr);
  j["visible_neighbors"] = partition_json(report.visible_neighbors);
  j["no_occlusion_observed"] = report.no_occlusion_observed();
  if (report.no_occlusion_observed()) j["note"] = "no occlusion observed";
  return j;
}

}  // namespace bagsac
