#include "sawlab/baselines.hpp"

#include <random>

#include "sawlab/error.hpp"

namespace sawlab::baselines {

namespace {

std::vector<int> layer_dims(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}

Matrix as_column(std::span<const double> s) {
  return Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size()));
}

}  // namespace

// --- D3G -------------------------------------------------------------------

D3gAgent::D3gAgent(AgentDims dims, D3gHyper hyper_in, std::uint64_t seed)
    : env_dims(dims), hyper(std::move(hyper_in)) {
  dims.validate();
  if (!(hyper.gamma > 0.0 && hyper.gamma < 1.0) ||
      !(hyper.rho_polyak > 0.0 && hyper.rho_polyak <= 1.0)) {
    throw Error(ErrorKind::invalid_argument, "d3g: gamma in (0,1) and rho in (0,1] required");
  }
  std::mt19937_64 rng(seed);
  const int obs = dims.obs_dim;
  const int act = dims.act_dim;
  const auto& h = hyper.hidden;
  critic1 = Mlp::initialized(layer_dims(2 * obs, h, 1), rng);
  critic2 = Mlp::initialized(layer_dims(2 * obs, h, 1), rng);
  target1 = critic1;
  target2 = critic2;
  prediction = Mlp::initialized(layer_dims(obs, h, obs), rng);
  prediction_target = prediction;
  inverse = Mlp::initialized(layer_dims(2 * obs, h, act), rng, OutputActivation::tanh_scaled,
                             dims.action_bound);
  forward_model = Mlp::initialized(layer_dims(obs + act, h, obs), rng);
  reset_optimizers();
}

void D3gAgent::reset_optimizers() {
  const double lr = hyper.learning_rate;
  critic1_opt = AdamState::for_net(critic1, lr);
  critic2_opt = AdamState::for_net(critic2, lr);
  prediction_opt = AdamState::for_net(prediction, lr);
  inverse_opt = AdamState::for_net(inverse, lr);
  forward_opt = AdamState::for_net(forward_model, lr);
}

StepStats D3gAgent::train_step(const Batch& batch) { return d3g_train_step(*this, batch); }

std::vector<double> D3gAgent::act(std::span<const double> s) const { return d3g_act(*this, s); }

std::vector<std::pair<std::string, const Mlp*>> D3gAgent::networks() const {
  return {{"critic1", &critic1},       {"critic2", &critic2},
          {"target1", &target1},       {"target2", &target2},
          {"prediction", &prediction}, {"prediction_target", &prediction_target},
          {"inverse", &inverse},       {"forward", &forward_model}};
}

Vector d3g_critic_target(const D3gAgent& agent, const Batch& batch) {
  const Matrix proposal = forward(agent.prediction_target, batch.s_next);
  const Matrix pair = vstack(batch.s_next, proposal);
  const Vector q_next =
      scalar_output(agent.target1, pair).cwiseMin(scalar_output(agent.target2, pair));
  return batch.r + agent.hyper.gamma * ((1.0 - batch.done.array()) * q_next.array()).matrix();
}

std::pair<LossGrad, LossGrad> d3g_critic_losses(const D3gAgent& agent, const Batch& batch) {
  const Vector y = d3g_critic_target(agent, batch);
  require_finite(y, "d3g critic target");
  const Matrix pair = vstack(batch.s, batch.s_next);
  return {scalar_regression_loss(agent.critic1, pair, y),
          scalar_regression_loss(agent.critic2, pair, y)};
}

LossGrad d3g_actor_loss(const D3gAgent& agent, const Batch& batch) {
  return imitation_loss(agent.inverse, vstack(batch.s, batch.s_next), batch.a);
}

LossGrad d3g_forward_loss(const D3gAgent& agent, const Batch& batch) {
  return next_state_loss(agent.forward_model, batch);
}

LossGrad d3g_prediction_loss(const D3gAgent& agent, const Batch& batch) {
  const Eigen::Index n_obs = agent.env_dims.obs_dim;
  const Eigen::Index n_act = agent.env_dims.act_dim;
  const double n = static_cast<double>(batch.size());

  ForwardCache p_cache, i_cache, f_cache, q_cache;
  const Matrix s_hat = forward(agent.prediction, batch.s, p_cache);
  const Matrix a_prop = forward(agent.inverse, vstack(batch.s, s_hat), i_cache);
  const Matrix s_f = forward(agent.forward_model, vstack(batch.s, a_prop), f_cache);
  const Matrix q = forward(agent.critic1, vstack(batch.s, s_f), q_cache);

  const Matrix gap = s_hat - s_f;
  const double loss = (-q.sum() + gap.colwise().squaredNorm().sum()) / n;
  require_finite(loss, "d3g prediction loss");

  const Matrix q_seed = Matrix::Constant(1, batch.size(), -1.0 / n);
  Matrix g_sf = backward(agent.critic1, q_cache, q_seed).input_grad.bottomRows(n_obs);
  g_sf -= 2.0 * gap / n;
  Matrix g_s_hat = 2.0 * gap / n;

  const Matrix g_fwd_in = backward(agent.forward_model, f_cache, g_sf).input_grad;
  const Matrix g_inv_in =
      backward(agent.inverse, i_cache, g_fwd_in.bottomRows(n_act)).input_grad;
  g_s_hat += g_inv_in.bottomRows(n_obs);
  return {loss, backward(agent.prediction, p_cache, g_s_hat).params};
}

D3gCriticStats d3g_update_critic(D3gAgent& agent, const Batch& batch, bool sync_targets) {
  auto [c1, c2] = d3g_critic_losses(agent, batch);
  adam_step(agent.critic1, agent.critic1_opt, c1.grad);
  adam_step(agent.critic2, agent.critic2_opt, c2.grad);
  if (sync_targets) d3g_update_targets(agent);
  const Matrix pair = vstack(batch.s, batch.s_next);
  const double max_abs = std::max(scalar_output(agent.critic1, pair).cwiseAbs().maxCoeff(),
                                  scalar_output(agent.critic2, pair).cwiseAbs().maxCoeff());
  return {0.5 * (c1.loss + c2.loss), max_abs};
}

double d3g_update_actor(D3gAgent& agent, const Batch& batch) {
  auto lg = d3g_actor_loss(agent, batch);
  adam_step(agent.inverse, agent.inverse_opt, lg.grad);
  return lg.loss;
}

double d3g_update_forward(D3gAgent& agent, const Batch& batch) {
  auto lg = d3g_forward_loss(agent, batch);
  adam_step(agent.forward_model, agent.forward_opt, lg.grad);
  return lg.loss;
}

double d3g_update_prediction(D3gAgent& agent, const Batch& batch) {
  auto lg = d3g_prediction_loss(agent, batch);
  adam_step(agent.prediction, agent.prediction_opt, lg.grad);
  return lg.loss;
}

void d3g_update_targets(D3gAgent& agent) {
  polyak_update(agent.target1, agent.critic1, agent.hyper.rho_polyak);
  polyak_update(agent.target2, agent.critic2, agent.hyper.rho_polyak);
  polyak_update(agent.prediction_target, agent.prediction, agent.hyper.rho_polyak);
}

std::vector<double> d3g_act(const D3gAgent& agent, std::span<const double> s) {
  const Matrix sm = as_column(s);
  const Matrix proposal = forward(agent.prediction, sm);
  const Matrix a = forward(agent.inverse, vstack(sm, proposal));
  return {a.data(), a.data() + a.size()};
}

StepStats d3g_train_step(D3gAgent& agent, const Batch& batch) {
  if (batch.size() == 0) throw Error(ErrorKind::invalid_argument, "train_step: empty batch");
  StepStats stats;
  const Matrix pair = vstack(batch.s, batch.s_next);
  const Vector q = scalar_output(agent.target1, pair).cwiseMin(scalar_output(agent.target2, pair));
  stats.mean_q = q.mean();
  stats.max_q = q.maxCoeff();
  stats.loss_q = d3g_update_critic(agent, batch, false).loss;
  stats.loss_actor = d3g_update_actor(agent, batch);
  stats.loss_fwd = d3g_update_forward(agent, batch);
  stats.loss_pred = d3g_update_prediction(agent, batch);
  d3g_update_targets(agent);
  return stats;
}

// --- Behavior cloning ------------------------------------------------------

BcAgent::BcAgent(AgentDims dims, BcHyper hyper_in, std::uint64_t seed)
    : env_dims(dims), hyper(std::move(hyper_in)) {
  dims.validate();
  std::mt19937_64 rng(seed);
  policy = Mlp::initialized(layer_dims(dims.obs_dim, hyper.hidden, dims.act_dim), rng,
                            OutputActivation::tanh_scaled, dims.action_bound);
  reset_optimizers();
}

void BcAgent::reset_optimizers() { policy_opt = AdamState::for_net(policy, hyper.learning_rate); }

StepStats BcAgent::train_step(const Batch& batch) {
  StepStats stats;
  stats.loss_actor = bc_update(*this, batch);
  return stats;
}

std::vector<double> BcAgent::act(std::span<const double> s) const { return bc_act(*this, s); }

std::vector<std::pair<std::string, const Mlp*>> BcAgent::networks() const {
  return {{"policy", &policy}};
}

LossGrad bc_loss(const BcAgent& agent, const Batch& batch) {
  return imitation_loss(agent.policy, batch.s, batch.a);
}

double bc_update(BcAgent& agent, const Batch& batch) {
  auto lg = bc_loss(agent, batch);
  adam_step(agent.policy, agent.policy_opt, lg.grad);
  return lg.loss;
}

std::vector<double> bc_act(const BcAgent& agent, std::span<const double> s) {
  return forward(agent.policy, s);
}

}  // namespace sawlab::baselines
