#pragma once

#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sawlab/dataset.hpp"
#include "sawlab/nn.hpp"

namespace sawlab {

struct AgentDims {
  int obs_dim = 0;
  int act_dim = 0;
  double action_bound = 1.0;

  /// Throws invalid_argument unless both widths and the bound are positive.
  void validate() const;
};

/// Losses from one training step. Entries an agent does not train stay NaN.
struct StepStats {
  static constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();
  double loss_v = kUnset;
  double loss_q = kUnset;
  double loss_actor = kUnset;
  double loss_fwd = kUnset;
  double loss_pred = kUnset;
  double mean_q = kUnset;
  double max_q = kUnset;
};

/// A loss value together with the gradient for the one network it trains.
struct LossGrad {
  double loss = 0.0;
  Gradient grad;
};

class Agent {
 public:
  virtual ~Agent() = default;

  virtual std::string_view kind() const noexcept = 0;
  virtual const AgentDims& dims() const noexcept = 0;
  virtual StepStats train_step(const Batch& batch) = 0;
  virtual std::vector<double> act(std::span<const double> s) const = 0;

  /// Networks in checkpoint order.
  virtual std::vector<std::pair<std::string, const Mlp*>> networks() const = 0;
  std::vector<std::pair<std::string, Mlp*>> mutable_networks();
};

/// mean_j ||actor(input_j) - a_j||^2, gradient w.r.t. the actor parameters.
LossGrad imitation_loss(const Mlp& actor, const Matrix& input, const Matrix& actions);

/// mean_j w_j ||actor(input_j) - a_j||^2 with the weights held constant.
LossGrad weighted_imitation_loss(const Mlp& actor, const Matrix& input, const Matrix& actions,
                                 const Vector& weights);

/// mean_j ||F(s_j, a_j) - s'_j||^2.
LossGrad next_state_loss(const Mlp& forward_model, const Batch& batch);

/// Mean squared error of a scalar network against a fixed target row.
LossGrad scalar_regression_loss(const Mlp& net, const Matrix& input, const Vector& target);

/// First row of a (1 x n) network output as a vector.
Vector scalar_output(const Mlp& net, const Matrix& input);

void require_finite(double value, std::string_view what);
void require_finite(const Eigen::Ref<const Matrix>& values, std::string_view what);

}  // namespace sawlab
