#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace sawlab {

// Batched quantities are stored column-per-sample: a (dim x batch) matrix.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class OutputActivation { identity, tanh_scaled };

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

/// Dense feed-forward network with relu hidden units.
///
/// `dims` lists the input width, every hidden width and the output width, so
/// a network with dims {4, 256, 256, 1} has three affine layers. The output
/// layer is either the identity or `output_scale * tanh(z)`.
class Mlp {
 public:
  Mlp() = default;

  /// All parameters zero.
  explicit Mlp(std::vector<int> dims,
               OutputActivation output = OutputActivation::identity,
               double output_scale = 1.0);

  /// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
  static Mlp initialized(std::vector<int> dims, std::mt19937_64& rng,
                         OutputActivation output = OutputActivation::identity,
                         double output_scale = 1.0);

  const std::vector<int>& dims() const noexcept { return dims_; }
  int input_dim() const noexcept { return dims_.front(); }
  int output_dim() const noexcept { return dims_.back(); }
  OutputActivation output_activation() const noexcept { return output_; }
  double output_scale() const noexcept { return output_scale_; }

  std::vector<Layer>& layers() noexcept { return layers_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }

  std::size_t parameter_count() const noexcept;
  bool same_architecture(const Mlp& other) const noexcept;
  bool all_finite() const noexcept;

  /// Flat view in checkpoint order: per layer, weights row-major then bias.
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> values);

 private:
  std::vector<int> dims_;
  std::vector<Layer> layers_;
  OutputActivation output_ = OutputActivation::identity;
  double output_scale_ = 1.0;
};

/// Per-parameter gradient with the same layer shapes as an Mlp.
struct Gradient {
  std::vector<Layer> layers;

  static Gradient zeros_like(const Mlp& net);
  bool all_finite() const noexcept;
  double max_abs() const noexcept;
  std::vector<double> flatten() const;
  Gradient& operator+=(const Gradient& other);
};

/// Activations retained by a forward pass so the backward pass can reuse them.
struct ForwardCache {
  std::vector<Matrix> inputs;          // input to layer k
  std::vector<Matrix> pre_activations; // affine output of layer k
  Matrix output;
};

struct BackwardResult {
  Gradient params;
  Matrix input_grad;  // d(summed loss)/d(input), same shape as the input
};

Matrix forward(const Mlp& net, const Matrix& inputs);
Matrix forward(const Mlp& net, const Matrix& inputs, ForwardCache& cache);
std::vector<double> forward(const Mlp& net, std::span<const double> input);

/// Exact gradient of sum_{i,j} upstream(i,j) * output(i,j).
BackwardResult backward(const Mlp& net, const ForwardCache& cache,
                        const Matrix& upstream);
Gradient backward(const Mlp& net, const Matrix& inputs, const Matrix& upstream);

struct AdamState {
  std::uint64_t step_count = 0;
  std::vector<Layer> first_moment;
  std::vector<Layer> second_moment;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_net(const Mlp& net, double learning_rate = 3e-4);
};

/// Bias-corrected Adam update, in place.
void adam_step(Mlp& net, AdamState& state, const Gradient& grad);

/// target <- rate * online + (1 - rate) * target, parameter-wise.
void polyak_update(Mlp& target, const Mlp& online, double rate);

/// Stacks two column blocks vertically: [top; bottom].
Matrix vstack(const Matrix& top, const Matrix& bottom);

}  // namespace sawlab
