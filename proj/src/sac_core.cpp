#include "bagsac/sac_core.hpp"

#include <cmath>
#include <string>

#include "bagsac/errors.hpp"

namespace bagsac {

namespace {
constexpr double kColumnScale[kFeatureCols] = {1.0, 0.01, 0.1, 1.0 / 30.0, 0.2};
}

Matrix scale_kinematics(const Matrix& raw) {
  require(raw.cols() % kFeatureCols == 0, "scale_kinematics: width must be a multiple of 5");
  Matrix out = raw;
  for (Eigen::Index c = 0; c < raw.cols(); ++c) out.col(c) *= kColumnScale[c % kFeatureCols];
  return out;
}

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix m(rows, cols);
  // Row-major fill so the draw order matches the sample order.
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = gauss(rng);
  return m;
}

std::vector<int> layer_sizes(int in, const NetShape& shape, int out) {
  std::vector<int> sizes{in};
  for (int l = 0; l < shape.hidden_layers; ++l) sizes.push_back(shape.hidden_units);
  sizes.push_back(out);
  return sizes;
}

Critic::Critic(int state_dim, const NetShape& shape, const AdamConfig& adam, std::uint64_t seed)
    : state_dim_(state_dim),
      scale_inputs_(shape.scale_inputs),
      q1_(layer_sizes(state_dim + kActionDim, shape, 1), Activation::relu, derive_seed(seed, "q1")),
      q2_(layer_sizes(state_dim + kActionDim, shape, 1), Activation::relu, derive_seed(seed, "q2")),
      target_q1_(q1_),
      target_q2_(q2_),
      adam1_(q1_.parameter_count(), adam),
      adam2_(q2_.parameter_count(), adam) {}

Matrix Critic::input(const Matrix& states, const Matrix& actions) const {
  require(states.cols() == state_dim_ && actions.cols() == kActionDim && states.rows() == actions.rows(),
          "critic input: shape mismatch");
  Matrix x(states.rows(), state_dim_ + kActionDim);
  x.leftCols(state_dim_) = scale_inputs_ ? scale_kinematics(states) : states;
  x.rightCols(kActionDim) = actions;
  return x;
}

Vector Critic::q(int which, const Matrix& states, const Matrix& actions) const {
  return net(which).forward(input(states, actions)).col(0);
}

Vector Critic::target_q(int which, const Matrix& states, const Matrix& actions) const {
  return target_net(which).forward(input(states, actions)).col(0);
}

Vector Critic::target_min(const Matrix& states, const Matrix& actions) const {
  const Matrix x = input(states, actions);
  const Vector a = target_q1_.forward(x).col(0);
  const Vector b = target_q2_.forward(x).col(0);
  return a.cwiseMin(b);
}

Critic::MinQ Critic::min_q_with_action_grad(const Matrix& states, const Matrix& actions) const {
  const Matrix x = input(states, actions);
  Tape t1, t2;
  const Vector a = q1_.forward(x, &t1).col(0);
  const Vector b = q2_.forward(x, &t2).col(0);
  const Eigen::Index n = x.rows();
  Matrix g1 = Matrix::Zero(n, 1);
  Matrix g2 = Matrix::Zero(n, 1);
  MinQ out;
  out.value.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (a[i] <= b[i]) {
      out.value[i] = a[i];
      g1(i, 0) = 1.0;
    } else {
      out.value[i] = b[i];
      g2(i, 0) = 1.0;
    }
  }
  const Matrix dx = q1_.backward(t1, g1, nullptr) + q2_.backward(t2, g2, nullptr);
  out.d_action = dx.rightCols(kActionDim);
  return out;
}

double critic_mse(const Mlp& q, const Matrix& inputs, const Vector& targets, Vector* grad) {
  Tape tape;
  const Matrix pred = q.forward(inputs, grad != nullptr ? &tape : nullptr);
  const Vector diff = pred.col(0) - targets;
  const double n = static_cast<double>(targets.size());
  const double loss = diff.squaredNorm() / n;
  if (!std::isfinite(loss)) throw NumericalError("critic loss is not finite");
  if (grad != nullptr) {
    Matrix g = (2.0 / n) * diff;
    q.backward(tape, g, grad);
  }
  return loss;
}

Critic::Losses Critic::update(const Matrix& states, const Matrix& actions, const Vector& targets) {
  const Matrix x = input(states, actions);
  Losses out;
  Vector g1, g2;
  out.q1 = critic_mse(q1_, x, targets, &g1);
  out.q2 = critic_mse(q2_, x, targets, &g2);
  adam1_.step(q1_, g1);
  adam2_.step(q2_, g2);
  return out;
}

void Critic::soft_update(double rho) {
  polyak_update(target_q1_, q1_, rho);
  polyak_update(target_q2_, q2_, rho);
}

Vector td_target(const Vector& rewards, const Vector& dones, const Vector& next_min_q, const Vector& next_log_probs,
                 double alpha, double gamma) {
  const Eigen::Index n = rewards.size();
  require(n > 0, "td_target: empty batch");
  require(dones.size() == n && next_min_q.size() == n && next_log_probs.size() == n, "td_target: size mismatch");
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double boot = next_min_q[i] - alpha * next_log_probs[i];
    y[i] = dones[i] != 0.0 ? rewards[i] : rewards[i] + gamma * boot;
    if (!std::isfinite(y[i])) throw NumericalError("td_target: non-finite target at batch index " + std::to_string(i));
  }
  return y;
}

StochasticActor::StochasticActor(int input_dim, const NetShape& shape, const AdamConfig& adam, std::uint64_t seed)
    : net_(layer_sizes(input_dim, shape, 2 * kActionDim), Activation::relu, seed),
      adam_(net_.parameter_count(), adam),
      scale_inputs_(shape.scale_inputs) {}

Matrix StochasticActor::prepare(const Matrix& raw_inputs) const {
  return scale_inputs_ ? scale_kinematics(raw_inputs) : raw_inputs;
}

PolicyHead StochasticActor::head(const Matrix& raw_inputs, const Matrix& noise, Tape* tape) const {
  return policy_head_forward(net_.forward(prepare(raw_inputs), tape), noise);
}

Matrix StochasticActor::mean_action(const Matrix& raw_inputs) const {
  const Matrix out = net_.forward(prepare(raw_inputs));
  return out.leftCols(kActionDim).array().tanh().matrix();
}

ActorLoss actor_loss(const StochasticActor& actor, const Matrix& actor_inputs, const Matrix& critic_states,
                     const Critic& critic, double alpha, const Matrix& noise, const Matrix& distill_targets,
                     double lambda, Vector* grad) {
  require(lambda >= 0.0, "actor_loss: lambda must be >= 0");
  const Eigen::Index n = actor_inputs.rows();
  require(n > 0 && critic_states.rows() == n && noise.rows() == n, "actor_loss: batch size mismatch");
  const bool distill = distill_targets.size() != 0;
  if (distill) require(distill_targets.rows() == n && distill_targets.cols() == kActionDim, "actor_loss: bad D shape");

  Tape tape;
  const PolicyHead h = actor.head(actor_inputs, noise, &tape);
  const Critic::MinQ mq = critic.min_q_with_action_grad(critic_states, h.action);

  ActorLoss out;
  out.log_probs = h.log_prob;
  const double inv_n = 1.0 / static_cast<double>(n);
  double loss = (alpha * h.log_prob - mq.value).sum() * inv_n;
  Matrix d_mean_action;
  if (distill) {
    const Matrix diff = h.mean_action - distill_targets;
    out.distill_term = diff.squaredNorm() * inv_n;
    loss += lambda * out.distill_term;
    d_mean_action = (2.0 * lambda * inv_n) * diff;
  }
  out.loss = loss;
  if (!std::isfinite(loss)) throw NumericalError("actor loss is not finite");

  if (grad != nullptr) {
    const Matrix d_action = -inv_n * mq.d_action;
    const Vector d_log_prob = Vector::Constant(n, alpha * inv_n);
    const Matrix d_out = policy_head_backward(h, d_action, d_log_prob, d_mean_action);
    // Gradient w.r.t. the scaled input is discarded; only parameters matter here.
    actor.net().backward(tape, d_out, grad);
  }
  return out;
}

ActorLoss guiding_actor_update(StochasticActor& actor, const Matrix& actor_inputs, const Matrix& critic_states,
                               const Critic& critic, double alpha, const Matrix& noise) {
  Vector grad;
  ActorLoss out = actor_loss(actor, actor_inputs, critic_states, critic, alpha, noise, Matrix(), 0.0, &grad);
  actor.optimizer().step(actor.mutable_net(), grad);
  return out;
}

EntropyTemperature::EntropyTemperature(double alpha, AlphaMode mode, double target_entropy, const AdamConfig& adam)
    : mode_(mode), target_entropy_(target_entropy), log_alpha_(std::log(alpha)), adam_(1, adam) {
  require(alpha > 0.0, "entropy temperature must be positive");
}

double EntropyTemperature::alpha() const { return std::exp(log_alpha_); }

void EntropyTemperature::update(const Vector& log_probs) {
  if (mode_ == AlphaMode::fixed) return;
  require(log_probs.size() > 0, "entropy update: empty batch");
  const double grad = -(log_probs.mean() + target_entropy_);
  double param = log_alpha_;
  adam_.step(std::span<double>(&param, 1), std::span<const double>(&grad, 1));
  log_alpha_ = param;
}

}  // namespace bagsac
