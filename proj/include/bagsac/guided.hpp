#pragma once

// Dual-actor guided SAC: a guiding actor on full state, a control actor on
// observation history, and a distillation net imitating the guiding actor.

#include <cstdint>

#include "bagsac/highway.hpp"
#include "bagsac/numerics.hpp"
#include "bagsac/sac_core.hpp"

namespace bagsac {

enum class ActorTag { guiding, control };

const char* to_string(ActorTag tag);

struct Selection {
  Action action;
  ActorTag tag = ActorTag::control;
};

/// Training mode: even steps sample the guiding actor on `state`, odd steps the
/// control actor on `history` (always control when `guiding` is null).
/// Deterministic mode: tanh(mean) of the control actor; `state` is not touched.
Selection select_action(std::int64_t step, const StochasticActor* guiding, const StochasticActor& control,
                        const FullState* state, const Vector& history, Rng& rng, bool deterministic);

/// D(h): deterministic imitation of the guiding actor's mean action, output
/// squashed into (-1, 1).
class DistillationNet {
 public:
  DistillationNet(int history_dim, const NetShape& shape, const AdamConfig& adam, std::uint64_t seed);

  Matrix predict(const Matrix& histories) const;
  const Mlp& net() const { return net_; }
  Mlp& mutable_net() { return net_; }
  Adam& optimizer() { return adam_; }
  Matrix prepare(const Matrix& histories) const;

 private:
  Mlp net_;
  Adam adam_;
  bool scale_inputs_;
};

/// mean ||D(h) - target||^2 with the parameter gradient accumulated into `grad`.
double distillation_loss(const DistillationNet& distill, const Matrix& histories, const Matrix& targets, Vector* grad);

/// One Adam step of D towards tanh(mean) of the guiding actor at the stored
/// full states. The guiding actor is read only.
double distillation_update(DistillationNet& distill, const Matrix& histories, const Matrix& states,
                           const StochasticActor& guiding);

/// One Adam step on
///   mean(alpha log pi_c(a|h) - minQ(s, a)) + lambda * mean ||tanh(mu_c(h)) - D(h)||^2
/// where Q sees the stored full state and D(h) is a constant. `distill` may be
/// null (vanilla SAC); lambda must be >= 0.
ActorLoss control_actor_update(StochasticActor& control, const Matrix& histories, const Matrix& critic_states,
                               const Critic& critic, const DistillationNet* distill, double alpha, double lambda,
                               const Matrix& noise);

}  // namespace bagsac
