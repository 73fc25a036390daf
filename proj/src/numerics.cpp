#include "bagsac/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "bagsac/errors.hpp"
#include "bagsac/rng.hpp"

namespace bagsac {

bool all_finite(const Matrix& m) { return m.allFinite(); }

Mlp::Mlp(std::vector<int> layer_sizes, Activation hidden, std::uint64_t seed)
    : sizes_(std::move(layer_sizes)), hidden_(hidden) {
  require(sizes_.size() >= 2, "Mlp needs at least an input and an output size");
  for (int s : sizes_) require(s > 0, "Mlp layer sizes must be positive");

  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    weight_offset_.push_back(total);
    total += static_cast<std::size_t>(sizes_[l]) * static_cast<std::size_t>(sizes_[l + 1]);
    bias_offset_.push_back(total);
    total += static_cast<std::size_t>(sizes_[l + 1]);
  }
  params_.resize(static_cast<Eigen::Index>(total));

  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    const std::size_t end = bias_offset_[l] + static_cast<std::size_t>(sizes_[l + 1]);
    for (std::size_t i = weight_offset_[l]; i < end; ++i) params_[static_cast<Eigen::Index>(i)] = dist(rng);
  }
}

void Mlp::set_parameters(const Vector& values) {
  require(values.size() == params_.size(), "set_parameters: size mismatch");
  ++version_;
  params_ = values;
}

Eigen::Map<const Matrix> Mlp::weight(std::size_t layer) const {
  return {params_.data() + weight_offset_[layer], sizes_[layer + 1], sizes_[layer]};
}

Eigen::Map<const Vector> Mlp::bias(std::size_t layer) const {
  return {params_.data() + bias_offset_[layer], sizes_[layer + 1]};
}

std::size_t Mlp::layer_of(std::size_t flat_index) const {
  for (std::size_t l = layer_count(); l-- > 0;) {
    if (flat_index >= weight_offset_[l]) return l;
  }
  return 0;
}

Matrix Mlp::forward(const Matrix& input, Tape* tape) const {
  require(input.cols() == input_size(), "mlp forward: expected input width " + std::to_string(input_size()) +
                                            ", got " + std::to_string(input.cols()));
  if (!input.allFinite()) throw ContractViolation("mlp forward: non-finite input");

  if (tape != nullptr) {
    tape->net = this;
    tape->version = version_;
    tape->inputs.clear();
    tape->pre.clear();
  }
  Matrix x = input;
  const std::size_t layers = layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix z = x * weight(l).transpose();
    z.rowwise() += bias(l).transpose();
    if (tape != nullptr) tape->inputs.push_back(std::move(x));
    if (l + 1 == layers) return z;
    if (tape != nullptr) tape->pre.push_back(z);
    if (hidden_ == Activation::relu) {
      x = z.cwiseMax(0.0);
    } else {
      x = z.array().tanh().matrix();
    }
  }
  return x;  // unreachable: layer_count() >= 1
}

Vector Mlp::forward(const Vector& input) const {
  Matrix row = input.transpose();
  return forward(row, nullptr).row(0).transpose();
}

Matrix Mlp::backward(const Tape& tape, const Matrix& output_grad, Vector* param_grad) const {
  require(tape.net == this && tape.version == version_, "mlp backward: tape does not match this network state");
  const std::size_t layers = layer_count();
  require(tape.inputs.size() == layers, "mlp backward: incomplete tape");
  require(output_grad.cols() == output_size() && output_grad.rows() == tape.inputs.front().rows(),
          "mlp backward: output gradient shape mismatch");

  if (param_grad != nullptr && param_grad->size() != params_.size()) {
    *param_grad = Vector::Zero(params_.size());
  }
  Matrix g = output_grad;
  for (std::size_t l = layers; l-- > 0;) {
    if (l + 1 < layers) {
      const Matrix& z = tape.pre[l];
      if (hidden_ == Activation::relu) {
        g = (z.array() > 0.0).select(g, 0.0);
      } else {
        g = (g.array() * (1.0 - z.array().tanh().square())).matrix();
      }
    }
    const Matrix& x = tape.inputs[l];
    if (param_grad != nullptr) {
      Eigen::Map<Matrix> dw(param_grad->data() + weight_offset_[l], sizes_[l + 1], sizes_[l]);
      Eigen::Map<Vector> db(param_grad->data() + bias_offset_[l], sizes_[l + 1]);
      dw.noalias() += g.transpose() * x;
      db += g.colwise().sum().transpose();
    }
    Matrix next = g * weight(l);
    g = std::move(next);
  }
  return g;
}

Adam::Adam(std::size_t parameter_count, AdamConfig config)
    : config_(config),
      m_(Vector::Zero(static_cast<Eigen::Index>(parameter_count))),
      v_(Vector::Zero(static_cast<Eigen::Index>(parameter_count))) {
  require(config.learning_rate > 0.0, "Adam learning rate must be positive");
}

void Adam::step(Mlp& net, const Vector& grad) {
  require(static_cast<std::size_t>(grad.size()) == net.parameter_count(), "adam: gradient size mismatch");
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw NumericalError("adam: non-finite gradient in layer " +
                           std::to_string(net.layer_of(static_cast<std::size_t>(i))) + " (flat index " +
                           std::to_string(i) + ")");
    }
  }
  Vector& p = net.mutable_parameters();
  apply({p.data(), static_cast<std::size_t>(p.size())}, {grad.data(), static_cast<std::size_t>(grad.size())});
}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  require(params.size() == grad.size(), "adam: gradient size mismatch");
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) throw NumericalError("adam: non-finite gradient at index " + std::to_string(i));
  }
  apply(params, grad);
}

void Adam::apply(std::span<double> params, std::span<const double> grad) {
  require(static_cast<Eigen::Index>(params.size()) == m_.size(), "adam: state/parameter size mismatch");
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    m_[k] = config_.beta1 * m_[k] + (1.0 - config_.beta1) * grad[i];
    v_[k] = config_.beta2 * v_[k] + (1.0 - config_.beta2) * grad[i] * grad[i];
    const double m_hat = m_[k] / c1;
    const double v_hat = v_[k] / c2;
    params[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
  }
}

void polyak_update(Mlp& target, const Mlp& online, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ContractViolation("polyak_update: rho must lie in [0, 1]");
  require(target.parameter_count() == online.parameter_count(), "polyak_update: shape mismatch");
  Vector& t = target.mutable_parameters();
  t = rho * t + (1.0 - rho) * online.parameters();
}

double log_one_minus_tanh_sq(double u) {
  // 1 - tanh(u)^2 = 4 / (e^u + e^-u)^2  =>  2 * (log 2 - |u| - log1p(e^{-2|u|}))
  const double a = std::abs(u);
  return 2.0 * (std::numbers::ln2 - a - std::log1p(std::exp(-2.0 * a)));
}

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)
}

SquashedSample squashed_gaussian_sample(const SquashedGaussianParams& params, const Vector& noise) {
  const Eigen::Index d = params.mean.size();
  require(params.log_std.size() == d && noise.size() == d, "squashed_gaussian_sample: dimension mismatch");
  SquashedSample out;
  out.action.resize(d);
  double lp = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double ls = std::clamp(params.log_std[i], kLogStdMin, kLogStdMax);
    const double u = params.mean[i] + std::exp(ls) * noise[i];
    out.action[i] = std::tanh(u);
    lp += -0.5 * noise[i] * noise[i] - ls - kHalfLog2Pi - log_one_minus_tanh_sq(u);
  }
  out.log_prob = lp;
  return out;
}

PolicyHead policy_head_forward(const Matrix& net_output, const Matrix& noise) {
  const Eigen::Index d = noise.cols();
  require(net_output.cols() == 2 * d && net_output.rows() == noise.rows(), "policy head: shape mismatch");
  PolicyHead h;
  h.mean = net_output.leftCols(d);
  const Matrix raw = net_output.rightCols(d);
  h.log_std = raw.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  h.clamp_open = ((raw.array() > kLogStdMin) && (raw.array() < kLogStdMax)).cast<double>().matrix();
  h.noise = noise;
  h.pre_tanh = h.mean + (h.log_std.array().exp() * noise.array()).matrix();
  h.action = h.pre_tanh.array().tanh().matrix();
  h.mean_action = h.mean.array().tanh().matrix();
  h.log_prob.resize(noise.rows());
  for (Eigen::Index b = 0; b < noise.rows(); ++b) {
    double lp = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      lp += -0.5 * noise(b, i) * noise(b, i) - h.log_std(b, i) - kHalfLog2Pi -
            log_one_minus_tanh_sq(h.pre_tanh(b, i));
    }
    h.log_prob[b] = lp;
  }
  return h;
}

Matrix policy_head_backward(const PolicyHead& head, const Matrix& d_action, const Vector& d_log_prob,
                            const Matrix& d_mean_action) {
  const Eigen::Index n = head.mean.rows();
  const Eigen::Index d = head.mean.cols();
  require(d_action.rows() == n && d_action.cols() == d && d_log_prob.size() == n,
          "policy head backward: shape mismatch");
  Matrix grad(n, 2 * d);
  for (Eigen::Index b = 0; b < n; ++b) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const double a = head.action(b, i);
      // d(log_prob)/du = 2 tanh(u) from the -log(1 - tanh^2 u) term.
      const double du = d_action(b, i) * (1.0 - a * a) + d_log_prob[b] * 2.0 * a;
      double dmean = du;
      if (d_mean_action.size() != 0) {
        const double ma = head.mean_action(b, i);
        dmean += d_mean_action(b, i) * (1.0 - ma * ma);
      }
      const double sigma = std::exp(head.log_std(b, i));
      grad(b, i) = dmean;
      grad(b, d + i) = (du * sigma * head.noise(b, i) - d_log_prob[b]) * head.clamp_open(b, i);
    }
  }
  return grad;
}

}  // namespace bagsac
