#pragma once

// lambda_t policies: fixed, adaptive (clipped linear map of disagreement),
// threshold gate and linear decay, plus the warmup hold.

#include <cstdint>
#include <optional>
#include <span>
#include <variant>

#include "bagsac/replay.hpp"
#include "bagsac/uncertainty.hpp"

namespace bagsac {

struct FixedLambda {
  double value = 0.1;
};

struct AdaptiveLambda {
  double lambda_min = 0.01;
  double lambda_max = 0.5;
  std::optional<Calibration> calibration;  // set once, at the end of warmup
  /// N = 1 ensemble: disagreement is undefined, so after warmup lambda is the
  /// constant midpoint of [lambda_min, lambda_max].
  bool single_member = false;
};

struct ThresholdLambda {
  double lambda_min = 0.01;
  double lambda_max = 0.5;
  std::optional<double> tau;  // median warmup disagreement
};

struct LinearDecayLambda {
  double lambda_min = 0.01;
  double lambda_max = 0.5;
  std::int64_t horizon = 50000;  // T
};

using GuidanceKind = std::variant<FixedLambda, AdaptiveLambda, ThresholdLambda, LinearDecayLambda>;

struct GuidanceSchedule {
  GuidanceKind kind = FixedLambda{};
  std::int64_t warmup_steps = 800;

  /// Throws ConfigError when the bounds are inconsistent.
  void validate() const;
  double lambda_min() const;
  double lambda_max() const;
  bool needs_disagreement() const;
  /// Freezes calibration (adaptive) or tau (threshold) from the warmup values.
  void freeze(const WarmupBuffer& warmup);
};

/// lambda_t for step t. Adaptive and threshold hold lambda_max while t < W and
/// need `u` (and their frozen calibration) afterwards.
double lambda_at(const GuidanceSchedule& schedule, std::int64_t t, std::optional<double> u);

/// Interpolated median of the warmup values.
double threshold_from_warmup(const WarmupBuffer& warmup);

/// Fraction of steps with lambda_t > lambda_min + 0.01.
double lambda_activity(std::span<const double> trace, double lambda_min);

}  // namespace bagsac
