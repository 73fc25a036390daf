#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bagsac/highway.hpp"
#include "bagsac/pomdp.hpp"
#include "bagsac/rng.hpp"

namespace bagsac {

/// One environment step. Full states sit next to histories so the critic and
/// guiding actor can train on privileged input while the control actor only
/// ever sees histories.
struct Transition {
  FullState full_state;
  Vector history;  // before the action, 25 * K
  Action action;
  double reward = 0.0;
  FullState next_full_state;
  Vector next_history;
  bool done = false;            // terminal (collision), not horizon truncation
  OcclusionMask occlusion_mask{};  // neighbour rows occluded in the newest slot of next_history

  /// Newest 25-dim slot of next_history: the observation the ensemble predicts.
  Vector next_observation() const { return next_history.tail(kFeatureDim); }
  /// Raw little-endian dump used for byte comparisons between runs.
  void append_bytes(std::string& out) const;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  /// i-th stored transition counting from the oldest.
  const Transition& at(std::size_t i) const;
  /// Uniform with replacement; returns positions usable with at().
  std::vector<std::size_t> sample(std::size_t batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // index of the oldest item once full
  std::vector<Transition> items_;
};

/// Column-stacked view of sampled transitions. Rows are samples.
struct TransitionBatch {
  Matrix states;
  Matrix histories;
  Matrix actions;
  Vector rewards;
  Matrix next_states;
  Matrix next_histories;
  Vector dones;  // 1.0 when terminal
  std::vector<OcclusionMask> masks;

  Eigen::Index size() const { return rewards.size(); }
};

TransitionBatch gather(const ReplayBuffer& buffer, std::span<const std::size_t> positions);

/// Disagreement values collected during warmup; holds at most `capacity`.
class WarmupBuffer {
 public:
  explicit WarmupBuffer(std::size_t capacity) : capacity_(capacity) {}

  /// Returns false once full (the value is dropped).
  bool push(double u);
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool full() const { return values_.size() >= capacity_; }

 private:
  std::size_t capacity_;
  std::vector<double> values_;
};

}  // namespace bagsac
