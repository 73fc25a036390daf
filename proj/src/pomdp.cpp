#include "bagsac/pomdp.hpp"

#include "bagsac/errors.hpp"

namespace bagsac {

PomdpLevel PomdpLevel::from_name(const std::string& name) {
  if (name == "none") return none();
  if (name == "mild") return mild();
  if (name == "moderate") return moderate();
  if (name == "severe") return severe();
  throw ConfigError("unknown POMDP level '" + name + "' (expected none, mild, moderate, severe)");
}

PomdpLevel PomdpLevel::custom(double noise_sigma, double occlusion_rate) {
  if (!(noise_sigma >= 0.0)) throw ConfigError("pomdp noise sigma must be >= 0");
  if (!(occlusion_rate >= 0.0 && occlusion_rate <= 1.0)) throw ConfigError("pomdp occlusion rate must lie in [0, 1]");
  return {"custom", noise_sigma, occlusion_rate};
}

Observed observe(const FullState& state, const PomdpLevel& level, Rng& rng) {
  Observed out;
  Features& f = out.observation.features;
  f = state.features();

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int r = 0; r < kNeighbors; ++r) {
    const bool hidden = unit(rng) < level.occlusion_rate;
    out.occluded[static_cast<std::size_t>(r)] = hidden;
    if (hidden) {
      for (int c = 0; c < kFeatureCols; ++c) f[static_cast<std::size_t>((r + 1) * kFeatureCols + c)] = 0.0;
    }
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int r = 0; r < kVehicleRows; ++r) {
    const std::size_t base = static_cast<std::size_t>(r * kFeatureCols);
    if (f[base] != 1.0) continue;  // absent or occluded
    for (int c = 1; c < kFeatureCols; ++c) f[base + static_cast<std::size_t>(c)] += level.noise_sigma * gauss(rng);
  }
  return out;
}

ObservationHistory::ObservationHistory(int k) : k_(k) {
  require(k >= 1, "history length K must be >= 1");
  reset();
}

void ObservationHistory::push(const Observation& obs) {
  window_.pop_front();
  window_.push_back(obs);
}

void ObservationHistory::reset() { window_.assign(static_cast<std::size_t>(k_), Observation{}); }

Vector ObservationHistory::flatten() const {
  Vector out(dim());
  Eigen::Index i = 0;
  for (const Observation& o : window_) {
    for (double v : o.features) out[i++] = v;
  }
  return out;
}

}  // namespace bagsac
