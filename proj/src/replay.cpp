#include "bagsac/replay.hpp"

#include <cmath>
#include <cstring>

#include "bagsac/errors.hpp"

namespace bagsac {

namespace {
template <typename T>
void put(std::string& out, const T& value) {
  char raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.append(raw, sizeof(T));
}

void put_vector(std::string& out, const Vector& v) {
  out.append(reinterpret_cast<const char*>(v.data()), static_cast<std::size_t>(v.size()) * sizeof(double));
}

void copy_row(Matrix& m, Eigen::Index row, const Features& f) {
  for (int c = 0; c < kFeatureDim; ++c) m(row, c) = f[static_cast<std::size_t>(c)];
}
}  // namespace

void Transition::append_bytes(std::string& out) const {
  for (double v : full_state.features()) put(out, v);
  put_vector(out, history);
  put(out, action.accel);
  put(out, action.steer);
  put(out, reward);
  for (double v : next_full_state.features()) put(out, v);
  put_vector(out, next_history);
  put(out, static_cast<unsigned char>(done));
  for (bool b : occlusion_mask) put(out, static_cast<unsigned char>(b));
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  require(capacity >= 1, "replay capacity must be >= 1");
  items_.reserve(std::min<std::size_t>(capacity, 1u << 16));
}

void ReplayBuffer::push(Transition t) {
  if (!std::isfinite(t.reward)) throw ContractViolation("replay: non-finite reward");
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  require(i < items_.size(), "replay: index out of range");
  return items_[(head_ + i) % items_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  require(!items_.empty(), "replay: cannot sample from an empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<std::size_t> out(batch);
  for (auto& p : out) p = pick(rng);
  return out;
}

TransitionBatch gather(const ReplayBuffer& buffer, std::span<const std::size_t> positions) {
  require(!positions.empty(), "gather: empty batch");
  const auto n = static_cast<Eigen::Index>(positions.size());
  const Eigen::Index hdim = buffer.at(positions[0]).history.size();
  TransitionBatch b;
  b.states.resize(n, kFeatureDim);
  b.next_states.resize(n, kFeatureDim);
  b.histories.resize(n, hdim);
  b.next_histories.resize(n, hdim);
  b.actions.resize(n, kActionDim);
  b.rewards.resize(n);
  b.dones.resize(n);
  b.masks.resize(positions.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = buffer.at(positions[static_cast<std::size_t>(i)]);
    copy_row(b.states, i, t.full_state.features());
    copy_row(b.next_states, i, t.next_full_state.features());
    b.histories.row(i) = t.history.transpose();
    b.next_histories.row(i) = t.next_history.transpose();
    b.actions(i, 0) = t.action.accel;
    b.actions(i, 1) = t.action.steer;
    b.rewards[i] = t.reward;
    b.dones[i] = t.done ? 1.0 : 0.0;
    b.masks[static_cast<std::size_t>(i)] = t.occlusion_mask;
  }
  return b;
}

bool WarmupBuffer::push(double u) {
  require(u >= 0.0, "warmup buffer: disagreement must be non-negative");
  if (full()) return false;
  values_.push_back(u);
  return true;
}

}  // namespace bagsac
