#include "bagsac/guided.hpp"

#include <cmath>

#include "bagsac/errors.hpp"

namespace bagsac {

const char* to_string(ActorTag tag) { return tag == ActorTag::guiding ? "guiding" : "control"; }

Selection select_action(std::int64_t step, const StochasticActor* guiding, const StochasticActor& control,
                        const FullState* state, const Vector& history, Rng& rng, bool deterministic) {
  Selection out;
  if (deterministic) {
    const Matrix a = control.mean_action(history.transpose());
    out.action = {a(0, 0), a(0, 1)};
    out.tag = ActorTag::control;
    return out;
  }
  const Matrix noise = standard_normal(1, kActionDim, rng);
  PolicyHead h;
  if (guiding != nullptr && step % 2 == 0) {
    require(state != nullptr, "select_action: guiding step needs the full state");
    h = guiding->head(state->to_vector().transpose(), noise);
    out.tag = ActorTag::guiding;
  } else {
    h = control.head(history.transpose(), noise);
    out.tag = ActorTag::control;
  }
  out.action = {h.action(0, 0), h.action(0, 1)};
  return out;
}

DistillationNet::DistillationNet(int history_dim, const NetShape& shape, const AdamConfig& adam, std::uint64_t seed)
    : net_(layer_sizes(history_dim, shape, kActionDim), Activation::relu, seed),
      adam_(net_.parameter_count(), adam),
      scale_inputs_(shape.scale_inputs) {}

Matrix DistillationNet::prepare(const Matrix& histories) const {
  return scale_inputs_ ? scale_kinematics(histories) : histories;
}

Matrix DistillationNet::predict(const Matrix& histories) const {
  return net_.forward(prepare(histories)).array().tanh().matrix();
}

double distillation_loss(const DistillationNet& distill, const Matrix& histories, const Matrix& targets,
                         Vector* grad) {
  require(targets.rows() == histories.rows() && targets.cols() == kActionDim, "distillation: target shape mismatch");
  Tape tape;
  const Matrix out = distill.net().forward(distill.prepare(histories), &tape).array().tanh().matrix();
  const Matrix diff = out - targets;
  const double n = static_cast<double>(histories.rows());
  const double loss = diff.squaredNorm() / n;
  if (!std::isfinite(loss)) throw NumericalError("distillation loss is not finite");
  if (grad != nullptr) {
    const Matrix g = ((2.0 / n) * diff.array() * (1.0 - out.array().square())).matrix();
    distill.net().backward(tape, g, grad);
  }
  return loss;
}

double distillation_update(DistillationNet& distill, const Matrix& histories, const Matrix& states,
                           const StochasticActor& guiding) {
  const Matrix targets = guiding.mean_action(states);
  Vector grad;
  const double loss = distillation_loss(distill, histories, targets, &grad);
  distill.optimizer().step(distill.mutable_net(), grad);
  return loss;
}

ActorLoss control_actor_update(StochasticActor& control, const Matrix& histories, const Matrix& critic_states,
                               const Critic& critic, const DistillationNet* distill, double alpha, double lambda,
                               const Matrix& noise) {
  if (!(lambda >= 0.0)) throw ContractViolation("control_actor_update: lambda must be >= 0");
  const Matrix targets = distill != nullptr ? distill->predict(histories) : Matrix();
  Vector grad;
  ActorLoss out = actor_loss(control, histories, critic_states, critic, alpha, noise, targets, lambda, &grad);
  control.optimizer().step(control.mutable_net(), grad);
  return out;
}

}  // namespace bagsac
