#pragma once

// Twin-Q critic, TD targets, the reparameterised max-entropy actor loss and
// the entropy temperature. Shared by every method.

#include <cstdint>

#include "bagsac/numerics.hpp"
#include "bagsac/replay.hpp"
#include "bagsac/rng.hpp"

namespace bagsac {

/// Fixed per-column scaling applied to 25-wide kinematics blocks before they
/// enter an actor or critic (presence, x, y, vx, vy). The ensemble does not use
/// it: its inputs and targets stay raw.
Matrix scale_kinematics(const Matrix& raw);

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// Hidden layout shared by actors, critics and the distillation net.
struct NetShape {
  int hidden_units = 128;
  int hidden_layers = 2;
  bool scale_inputs = true;
};

std::vector<int> layer_sizes(int in, const NetShape& shape, int out);

class Critic {
 public:
  Critic(int state_dim, const NetShape& shape, const AdamConfig& adam, std::uint64_t seed);

  int state_dim() const { return state_dim_; }
  /// Network input: scaled state columns followed by the action.
  Matrix input(const Matrix& states, const Matrix& actions) const;

  Vector q(int which, const Matrix& states, const Matrix& actions) const;
  Vector target_q(int which, const Matrix& states, const Matrix& actions) const;
  Vector target_min(const Matrix& states, const Matrix& actions) const;

  struct MinQ {
    Vector value;      // min(Q1, Q2) of the online nets
    Matrix d_action;   // d value / d action, critic parameters untouched
  };
  MinQ min_q_with_action_grad(const Matrix& states, const Matrix& actions) const;

  struct Losses {
    double q1 = 0.0;
    double q2 = 0.0;
  };
  /// One Adam step on each Q net towards `targets`; returns pre-step MSE.
  Losses update(const Matrix& states, const Matrix& actions, const Vector& targets);
  void soft_update(double rho);

  const Mlp& net(int which) const { return which == 1 ? q1_ : q2_; }
  const Mlp& target_net(int which) const { return which == 1 ? target_q1_ : target_q2_; }
  Mlp& mutable_net(int which) { return which == 1 ? q1_ : q2_; }

 private:
  int state_dim_;
  bool scale_inputs_;
  Mlp q1_, q2_, target_q1_, target_q2_;
  Adam adam1_, adam2_;
};

/// mean((Q(x) - y)^2); accumulates its parameter gradient when `grad` is non-null.
double critic_mse(const Mlp& q, const Matrix& inputs, const Vector& targets, Vector* grad);

/// y = r + gamma * (1 - done) * (next_min_q - alpha * next_log_prob).
/// Throws NumericalError naming the first non-finite batch index.
Vector td_target(const Vector& rewards, const Vector& dones, const Vector& next_min_q, const Vector& next_log_probs,
                 double alpha, double gamma);

/// Diagonal squashed-Gaussian policy network with its optimiser.
class StochasticActor {
 public:
  StochasticActor(int input_dim, const NetShape& shape, const AdamConfig& adam, std::uint64_t seed);

  int input_dim() const { return net_.input_size(); }
  Matrix prepare(const Matrix& raw_inputs) const;
  PolicyHead head(const Matrix& raw_inputs, const Matrix& noise, Tape* tape = nullptr) const;
  /// tanh(mean) for every row.
  Matrix mean_action(const Matrix& raw_inputs) const;

  const Mlp& net() const { return net_; }
  Mlp& mutable_net() { return net_; }
  Adam& optimizer() { return adam_; }

 private:
  Mlp net_;
  Adam adam_;
  bool scale_inputs_;
};

struct ActorLoss {
  double loss = 0.0;          // full objective (minimised)
  double distill_term = 0.0;  // mean ||tanh(mean) - D||^2, before lambda
  Vector log_probs;
};

/// mean(alpha * log pi(a|x) - minQ(s, a)) + lambda * mean ||tanh(mu(x)) - D||^2
/// with a = tanh(mu + sigma * noise). The critic is evaluated at `critic_states`
/// and never receives gradient. Pass an empty `distill_targets` for no penalty.
ActorLoss actor_loss(const StochasticActor& actor, const Matrix& actor_inputs, const Matrix& critic_states,
                     const Critic& critic, double alpha, const Matrix& noise, const Matrix& distill_targets,
                     double lambda, Vector* grad);

/// One Adam step on the max-entropy objective with inputs `actor_inputs`.
ActorLoss guiding_actor_update(StochasticActor& actor, const Matrix& actor_inputs, const Matrix& critic_states,
                               const Critic& critic, double alpha, const Matrix& noise);

enum class AlphaMode { fixed, automatic };

class EntropyTemperature {
 public:
  EntropyTemperature(double alpha, AlphaMode mode, double target_entropy, const AdamConfig& adam);

  double alpha() const;
  AlphaMode mode() const { return mode_; }
  double target_entropy() const { return target_entropy_; }
  /// Gradient step on log(alpha) for the loss -log(alpha) * mean(log_pi + target).
  /// No-op in fixed mode.
  void update(const Vector& log_probs);

 private:
  AlphaMode mode_;
  double target_entropy_;
  double log_alpha_;
  Adam adam_;
};

}  // namespace bagsac
