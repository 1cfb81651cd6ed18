#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sawlab/agent.hpp"

namespace sawlab::baselines {

struct D3gHyper {
  double gamma = 0.99;
  double rho_polyak = 0.005;
  double learning_rate = 3e-4;
  std::vector<int> hidden{256, 256};
};

/// Deterministic-dynamics QSS learner: double critics Q(s, s'), a prediction
/// model proposing s' (with a target copy), inverse and forward dynamics.
struct D3gAgent final : Agent {
  D3gAgent(AgentDims dims, D3gHyper hyper, std::uint64_t seed);

  std::string_view kind() const noexcept override { return "d3g"; }
  const AgentDims& dims() const noexcept override { return env_dims; }
  StepStats train_step(const Batch& batch) override;
  std::vector<double> act(std::span<const double> s) const override;
  std::vector<std::pair<std::string, const Mlp*>> networks() const override;
  void reset_optimizers();

  AgentDims env_dims;
  D3gHyper hyper;
  Mlp critic1, critic2, target1, target2, prediction, prediction_target, inverse, forward_model;
  AdamState critic1_opt, critic2_opt, prediction_opt, inverse_opt, forward_opt;
};

/// r + gamma (1 - d) min_i Q'_i(s', P'(s')).
Vector d3g_critic_target(const D3gAgent& agent, const Batch& batch);

std::pair<LossGrad, LossGrad> d3g_critic_losses(const D3gAgent& agent, const Batch& batch);
LossGrad d3g_actor_loss(const D3gAgent& agent, const Batch& batch);
LossGrad d3g_forward_loss(const D3gAgent& agent, const Batch& batch);
/// -mean Q1(s, s_f) + mean ||s_hat - s_f||^2, s_hat = P(s), s_f = f(s, I(s, s_hat)).
LossGrad d3g_prediction_loss(const D3gAgent& agent, const Batch& batch);

struct D3gCriticStats {
  double loss = 0.0;
  double max_abs_q = 0.0;  // divergence monitor over the batch
};

D3gCriticStats d3g_update_critic(D3gAgent& agent, const Batch& batch, bool sync_targets = true);
double d3g_update_actor(D3gAgent& agent, const Batch& batch);
double d3g_update_forward(D3gAgent& agent, const Batch& batch);
double d3g_update_prediction(D3gAgent& agent, const Batch& batch);
void d3g_update_targets(D3gAgent& agent);
std::vector<double> d3g_act(const D3gAgent& agent, std::span<const double> s);
StepStats d3g_train_step(D3gAgent& agent, const Batch& batch);

struct BcHyper {
  double learning_rate = 3e-4;
  std::vector<int> hidden{256, 256};
};

/// Plain state-to-action regression.
struct BcAgent final : Agent {
  BcAgent(AgentDims dims, BcHyper hyper, std::uint64_t seed);

  std::string_view kind() const noexcept override { return "bc"; }
  const AgentDims& dims() const noexcept override { return env_dims; }
  StepStats train_step(const Batch& batch) override;
  std::vector<double> act(std::span<const double> s) const override;
  std::vector<std::pair<std::string, const Mlp*>> networks() const override;
  void reset_optimizers();

  AgentDims env_dims;
  BcHyper hyper;
  Mlp policy;
  AdamState policy_opt;
};

LossGrad bc_loss(const BcAgent& agent, const Batch& batch);
double bc_update(BcAgent& agent, const Batch& batch);
std::vector<double> bc_act(const BcAgent& agent, std::span<const double> s);

}  // namespace sawlab::baselines
