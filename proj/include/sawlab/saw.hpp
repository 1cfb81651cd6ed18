#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sawlab/agent.hpp"

namespace sawlab::saw {

enum class CriticLoss { mse, expectile };

struct SawHyper {
  double beta = 5.0;           // advantage temperature
  double tau_expectile = 0.7;  // value expectile
  double gamma = 0.99;
  double rho_polyak = 0.005;   // target critic update rate
  bool use_alpha_normalization = true;
  double alpha_fixed = 1.0;    // used when normalization is off
  double alpha_scale = 1.0;    // multiplies the normalized alpha
  double weight_clip = 100.0;
  double learning_rate = 3e-4;
  CriticLoss critic_loss = CriticLoss::mse;
  std::vector<int> hidden{256, 256};

  void validate() const;
};

/// Every network of the state-advantage-weighting agent plus its optimizers.
///
/// value:      V(s)        -> scalar
/// critic1/2:  Q(s, s')    -> scalar, with Polyak-averaged targets
/// forward:    F(s, a)     -> s'
/// prediction: M(s)        -> proposed s'
/// actor:      I(s, s')    -> a (inverse dynamics, tanh-bounded)
struct SawAgent final : Agent {
  SawAgent(AgentDims dims, SawHyper hyper, std::uint64_t seed);

  std::string_view kind() const noexcept override { return "saw"; }
  const AgentDims& dims() const noexcept override { return env_dims; }
  StepStats train_step(const Batch& batch) override;
  std::vector<double> act(std::span<const double> s) const override;
  std::vector<std::pair<std::string, const Mlp*>> networks() const override;

  /// Resets optimizer moments and learning rates from `hyper`.
  void reset_optimizers();

  AgentDims env_dims;
  SawHyper hyper;
  Mlp value, critic1, critic2, target1, target2, forward_model, prediction, actor;
  AdamState value_opt, critic1_opt, critic2_opt, forward_opt, prediction_opt, actor_opt;
};

/// |tau - 1(u < 0)| * u^2
double expectile_loss(double u, double tau);

/// min of the two target critics on (s, s'), one entry per column.
Vector target_q(const SawAgent& agent, const Matrix& s, const Matrix& s_next);

/// A(s, s') = min_i Q'_i(s, s') - V(s), without gradient.
double state_advantage(const SawAgent& agent, std::span<const double> s,
                       std::span<const double> s_next);
Vector state_advantages(const SawAgent& agent, const Matrix& s, const Matrix& s_next);

/// min(exp(beta * A), weight_clip) per column.
Vector advantage_weights(const SawAgent& agent, const Matrix& s, const Matrix& s_next);

/// N / sum_i |q_i|; throws degenerate_critic when the sum is zero.
double alpha_from_q(const Vector& q);

// Loss and gradient for the network each update trains; nothing is mutated.
LossGrad value_loss(const SawAgent& agent, const Batch& batch);
std::pair<LossGrad, LossGrad> critic_losses(const SawAgent& agent, const Batch& batch);
LossGrad actor_loss(const SawAgent& agent, const Batch& batch);
LossGrad forward_loss(const SawAgent& agent, const Batch& batch);
LossGrad prediction_loss(const SawAgent& agent, const Batch& batch);

enum class TargetSync { immediate, deferred };

struct UpdateStats {
  double loss = 0.0;
};

UpdateStats update_value(SawAgent& agent, const Batch& batch);
/// Both critics step toward r + gamma (1 - d) V(s'). With immediate sync the
/// target critics are Polyak-updated right after.
UpdateStats update_critics(SawAgent& agent, const Batch& batch,
                           TargetSync sync = TargetSync::immediate);
UpdateStats update_actor(SawAgent& agent, const Batch& batch);
UpdateStats update_forward(SawAgent& agent, const Batch& batch);
UpdateStats update_prediction(SawAgent& agent, const Batch& batch);
void update_targets(SawAgent& agent);

/// a = I(s, M(s)).
std::vector<double> act(const SawAgent& agent, std::span<const double> s);

/// value, critics, actor, forward, prediction, then target critics.
StepStats train_step(SawAgent& agent, const Batch& batch);

}  // namespace sawlab::saw
