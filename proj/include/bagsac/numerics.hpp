#pragma once

// Dense MLP kernel: forward/backward, Adam, Polyak averaging and the
// tanh-squashed Gaussian used by every stochastic policy.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace bagsac {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { relu, tanh };

class Mlp;

/// Activation record of one forward pass. Rows are samples.
struct Tape {
  const Mlp* net = nullptr;
  std::uint64_t version = 0;
  std::vector<Matrix> inputs;  // input of every layer
  std::vector<Matrix> pre;     // pre-activation of every hidden layer
};

/// Fully connected network with a linear output layer. All parameters live in
/// one flat vector: per layer the weight (n_out x n_in, column-major) then the
/// bias, which makes Adam, Polyak averaging and finite differences trivial.
class Mlp {
 public:
  Mlp() = default;
  /// Uniform fan-in initialisation: U(-1/sqrt(n_in), 1/sqrt(n_in)) for weights
  /// and biases, drawn from an RNG seeded with `seed`.
  Mlp(std::vector<int> layer_sizes, Activation hidden, std::uint64_t seed);

  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::size_t layer_count() const { return sizes_.size() - 1; }
  const std::vector<int>& layer_sizes() const { return sizes_; }
  Activation hidden_activation() const { return hidden_; }

  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
  const Vector& parameters() const { return params_; }
  /// Mutable access invalidates every tape recorded so far.
  Vector& mutable_parameters() {
    ++version_;
    return params_;
  }
  void set_parameters(const Vector& values);
  std::uint64_t version() const { return version_; }

  Eigen::Map<const Matrix> weight(std::size_t layer) const;
  Eigen::Map<const Vector> bias(std::size_t layer) const;
  /// Layer owning a flat parameter index.
  std::size_t layer_of(std::size_t flat_index) const;

  /// Batched forward pass; rows of `input` are samples. Rejects non-finite input.
  Matrix forward(const Matrix& input, Tape* tape = nullptr) const;
  Vector forward(const Vector& input) const;

  /// Returns d(loss)/d(input). When `param_grad` is non-null the parameter
  /// gradient is accumulated into it (resized and zeroed if empty).
  Matrix backward(const Tape& tape, const Matrix& output_grad, Vector* param_grad) const;

 private:
  std::vector<int> sizes_;
  Activation hidden_ = Activation::relu;
  Vector params_;
  std::vector<std::size_t> weight_offset_;
  std::vector<std::size_t> bias_offset_;
  std::uint64_t version_ = 0;
};

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction over a flat parameter vector.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t parameter_count, AdamConfig config);

  void step(Mlp& net, const Vector& grad);
  void step(std::span<double> params, std::span<const double> grad);

  std::int64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return config_; }
  const Vector& first_moment() const { return m_; }
  const Vector& second_moment() const { return v_; }

 private:
  void apply(std::span<double> params, std::span<const double> grad);

  AdamConfig config_;
  Vector m_;
  Vector v_;
  std::int64_t step_count_ = 0;
};

/// target <- rho * target + (1 - rho) * online.
void polyak_update(Mlp& target, const Mlp& online, double rho);

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

struct SquashedGaussianParams {
  Vector mean;
  Vector log_std;  // clamped to [kLogStdMin, kLogStdMax] when sampled
};

struct SquashedSample {
  Vector action;  // in (-1, 1)^d
  double log_prob = 0.0;
};

/// action = tanh(mean + exp(log_std) * noise); the log-density includes the
/// tanh Jacobian.
SquashedSample squashed_gaussian_sample(const SquashedGaussianParams& params, const Vector& noise);

/// log(1 - tanh(u)^2), stable for large |u|.
double log_one_minus_tanh_sq(double u);

/// Batched policy head. A policy network emits 2*d columns: the Gaussian mean
/// followed by the raw log-std. Rows are samples.
struct PolicyHead {
  Matrix mean;         // B x d
  Matrix log_std;      // B x d, clamped
  Matrix clamp_open;   // 1 where the raw log-std was inside the clamp range
  Matrix noise;        // B x d
  Matrix pre_tanh;     // mean + std * noise
  Matrix action;       // tanh(pre_tanh)
  Matrix mean_action;  // tanh(mean)
  Vector log_prob;     // B
};

PolicyHead policy_head_forward(const Matrix& net_output, const Matrix& noise);

/// Gradient w.r.t. the raw network output given upstream gradients w.r.t. the
/// sampled action, its log-probability and the deterministic action tanh(mean).
/// `d_mean_action` may be an empty matrix.
Matrix policy_head_backward(const PolicyHead& head, const Matrix& d_action, const Vector& d_log_prob,
                            const Matrix& d_mean_action);

bool all_finite(const Matrix& m);

}  // namespace bagsac
