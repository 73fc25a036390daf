#include "bagsac/guidance.hpp"

#include <algorithm>

#include "bagsac/errors.hpp"

namespace bagsac {

namespace {
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_bounds(double lo, double hi) {
  if (!(lo >= 0.0 && lo <= hi)) throw ConfigError("guidance: need 0 <= lambda_min <= lambda_max");
}
}  // namespace

void GuidanceSchedule::validate() const {
  if (warmup_steps < 0) throw ConfigError("guidance.warmup_steps must be >= 0");
  std::visit(overloaded{[](const FixedLambda& f) {
                          if (!(f.value >= 0.0)) throw ConfigError("guidance: fixed lambda must be >= 0");
                        },
                        [](const AdaptiveLambda& a) { check_bounds(a.lambda_min, a.lambda_max); },
                        [](const ThresholdLambda& a) { check_bounds(a.lambda_min, a.lambda_max); },
                        [](const LinearDecayLambda& a) {
                          check_bounds(a.lambda_min, a.lambda_max);
                          if (a.horizon <= 0) throw ConfigError("guidance: linear decay horizon T must be > 0");
                        }},
             kind);
}

double GuidanceSchedule::lambda_min() const {
  return std::visit(overloaded{[](const FixedLambda& f) { return f.value; }, [](const auto& k) { return k.lambda_min; }},
                    kind);
}

double GuidanceSchedule::lambda_max() const {
  return std::visit(overloaded{[](const FixedLambda& f) { return f.value; }, [](const auto& k) { return k.lambda_max; }},
                    kind);
}

bool GuidanceSchedule::needs_disagreement() const {
  if (const auto* a = std::get_if<AdaptiveLambda>(&kind)) return !a->single_member;
  return std::holds_alternative<ThresholdLambda>(kind);
}

void GuidanceSchedule::freeze(const WarmupBuffer& warmup) {
  if (auto* a = std::get_if<AdaptiveLambda>(&kind)) {
    require(!a->calibration.has_value(), "guidance: calibration already frozen");
    if (!a->single_member) a->calibration = calibrate(warmup);
  } else if (auto* th = std::get_if<ThresholdLambda>(&kind)) {
    require(!th->tau.has_value(), "guidance: threshold already frozen");
    th->tau = threshold_from_warmup(warmup);
  }
}

double lambda_at(const GuidanceSchedule& schedule, std::int64_t t, std::optional<double> u) {
  require(t >= 0, "lambda_at: negative step");
  const bool warm = t < schedule.warmup_steps;
  return std::visit(
      overloaded{
          [](const FixedLambda& f) { return f.value; },
          [&](const AdaptiveLambda& a) {
            if (warm) return a.lambda_max;
            if (a.single_member) return 0.5 * (a.lambda_min + a.lambda_max);
            require(a.calibration.has_value() && a.calibration->frozen,
                    "lambda_at: adaptive schedule queried after warmup without calibration");
            require(u.has_value(), "lambda_at: adaptive schedule needs the disagreement u_t");
            const Calibration& c = *a.calibration;
            const double x = std::clamp((*u - c.u_lo) / (c.u_hi - c.u_lo), 0.0, 1.0);
            return a.lambda_min + (a.lambda_max - a.lambda_min) * x;
          },
          [&](const ThresholdLambda& th) {
            if (warm) return th.lambda_max;
            require(th.tau.has_value(), "lambda_at: threshold schedule queried after warmup without tau");
            require(u.has_value(), "lambda_at: threshold schedule needs the disagreement u_t");
            return *u > *th.tau ? th.lambda_max : th.lambda_min;
          },
          [&](const LinearDecayLambda& d) {
            if (t >= d.horizon) return d.lambda_min;
            const double frac = static_cast<double>(t) / static_cast<double>(d.horizon);
            return d.lambda_max * (1.0 - frac) + d.lambda_min * frac;
          }},
      schedule.kind);
}

double threshold_from_warmup(const WarmupBuffer& warmup) {
  if (warmup.size() == 0) throw ContractViolation("threshold_from_warmup: empty warmup buffer");
  return percentile(warmup.values(), 0.5);
}

double lambda_activity(std::span<const double> trace, double lambda_min) {
  require(!trace.empty(), "lambda_activity: empty trace");
  const double cut = lambda_min + 0.01;
  const auto active = std::count_if(trace.begin(), trace.end(), [&](double l) { return l > cut; });
  return static_cast<double>(active) / static_cast<double>(trace.size());
}

}  // namespace bagsac
