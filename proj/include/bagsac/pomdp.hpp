#pragma once

// Observation function: i.i.d. per-vehicle occlusion plus Gaussian sensor
// noise, and the fixed-window history fed to the control actor and ensemble.

#include <array>
#include <deque>
#include <string>

#include "bagsac/highway.hpp"
#include "bagsac/numerics.hpp"
#include "bagsac/rng.hpp"

namespace bagsac {

struct PomdpLevel {
  std::string name = "none";
  double noise_sigma = 0.0;
  double occlusion_rate = 0.0;

  static PomdpLevel none() { return {"none", 0.0, 0.0}; }
  static PomdpLevel mild() { return {"mild", 0.02, 0.10}; }
  static PomdpLevel moderate() { return {"moderate", 0.05, 0.25}; }
  static PomdpLevel severe() { return {"severe", 0.10, 0.50}; }
  /// Preset lookup; throws ConfigError for an unknown name.
  static PomdpLevel from_name(const std::string& name);
  static PomdpLevel custom(double noise_sigma, double occlusion_rate);
};

using OcclusionMask = std::array<bool, kNeighbors>;

/// Same 5x5 layout as FullState. Occluded rows are exactly zero.
struct Observation {
  Features features{};
};

struct Observed {
  Observation observation;
  OcclusionMask occluded{};  // neighbour rows hidden by the mask
};

/// Draws one occlusion decision per neighbour row, then adds N(0, sigma^2) to
/// the continuous columns of every visible, present row. The ego row is never
/// occluded and presence flags carry no noise.
Observed observe(const FullState& state, const PomdpLevel& level, Rng& rng);

/// Sliding window of the K most recent observations, oldest first. Slots not
/// yet filled are zero.
class ObservationHistory {
 public:
  explicit ObservationHistory(int k);

  int k() const { return k_; }
  int dim() const { return k_ * kFeatureDim; }
  void push(const Observation& obs);
  void reset();
  const Observation& newest() const { return window_.back(); }
  /// Flattened (oldest ... newest), each row-major; length 25 * K.
  Vector flatten() const;

 private:
  int k_;
  std::deque<Observation> window_;
};

}  // namespace bagsac
