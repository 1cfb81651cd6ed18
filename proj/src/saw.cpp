#include "sawlab/saw.hpp"

#include <cmath>
#include <random>

#include "sawlab/error.hpp"

namespace sawlab::saw {

namespace {

std::vector<int> layer_dims(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}

double expectile_weight(double u, double tau) { return u < 0.0 ? 1.0 - tau : tau; }

}  // namespace

void SawHyper::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::invalid_argument, msg); };
  if (!(beta >= 0.0)) fail("beta must be non-negative");
  if (!(tau_expectile > 0.0 && tau_expectile < 1.0)) fail("tau_expectile must be in (0, 1)");
  if (!(gamma > 0.0 && gamma < 1.0)) fail("gamma must be in (0, 1)");
  if (!(rho_polyak > 0.0 && rho_polyak <= 1.0)) fail("rho_polyak must be in (0, 1]");
  if (!(weight_clip > 0.0)) fail("weight_clip must be positive");
  if (!(alpha_scale >= 0.0) || !std::isfinite(alpha_scale)) fail("alpha_scale must be non-negative");
  if (!std::isfinite(alpha_fixed)) fail("alpha_fixed must be finite");
  if (!(learning_rate >= 0.0)) fail("learning_rate must be non-negative");
  for (int h : hidden) {
    if (h <= 0) fail("hidden widths must be positive");
  }
}

SawAgent::SawAgent(AgentDims dims, SawHyper hyper_in, std::uint64_t seed)
    : env_dims(dims), hyper(std::move(hyper_in)) {
  dims.validate();
  hyper.validate();
  std::mt19937_64 rng(seed);
  const int obs = dims.obs_dim;
  const int act = dims.act_dim;
  const auto& h = hyper.hidden;
  value = Mlp::initialized(layer_dims(obs, h, 1), rng);
  critic1 = Mlp::initialized(layer_dims(2 * obs, h, 1), rng);
  critic2 = Mlp::initialized(layer_dims(2 * obs, h, 1), rng);
  target1 = critic1;
  target2 = critic2;
  forward_model = Mlp::initialized(layer_dims(obs + act, h, obs), rng);
  prediction = Mlp::initialized(layer_dims(obs, h, obs), rng);
  actor = Mlp::initialized(layer_dims(2 * obs, h, act), rng, OutputActivation::tanh_scaled,
                           dims.action_bound);
  reset_optimizers();
}

void SawAgent::reset_optimizers() {
  const double lr = hyper.learning_rate;
  value_opt = AdamState::for_net(value, lr);
  critic1_opt = AdamState::for_net(critic1, lr);
  critic2_opt = AdamState::for_net(critic2, lr);
  forward_opt = AdamState::for_net(forward_model, lr);
  prediction_opt = AdamState::for_net(prediction, lr);
  actor_opt = AdamState::for_net(actor, lr);
}

StepStats SawAgent::train_step(const Batch& batch) { return saw::train_step(*this, batch); }

std::vector<double> SawAgent::act(std::span<const double> s) const { return saw::act(*this, s); }

std::vector<std::pair<std::string, const Mlp*>> SawAgent::networks() const {
  return {{"value", &value},           {"critic1", &critic1}, {"critic2", &critic2},
          {"target1", &target1},       {"target2", &target2}, {"forward", &forward_model},
          {"prediction", &prediction}, {"actor", &actor}};
}

double expectile_loss(double u, double tau) { return expectile_weight(u, tau) * u * u; }

Vector target_q(const SawAgent& agent, const Matrix& s, const Matrix& s_next) {
  const Matrix pair = vstack(s, s_next);
  return scalar_output(agent.target1, pair).cwiseMin(scalar_output(agent.target2, pair));
}

Vector state_advantages(const SawAgent& agent, const Matrix& s, const Matrix& s_next) {
  return target_q(agent, s, s_next) - scalar_output(agent.value, s);
}

double state_advantage(const SawAgent& agent, std::span<const double> s,
                       std::span<const double> s_next) {
  const Matrix sm = Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size()));
  const Matrix nm =
      Eigen::Map<const Vector>(s_next.data(), static_cast<Eigen::Index>(s_next.size()));
  return state_advantages(agent, sm, nm)(0);
}

Vector advantage_weights(const SawAgent& agent, const Matrix& s, const Matrix& s_next) {
  const Vector adv = state_advantages(agent, s, s_next);
  require_finite(adv, "state advantage");
  const double beta = agent.hyper.beta;
  const double clip = agent.hyper.weight_clip;
  return adv.unaryExpr([beta, clip](double a) { return std::min(std::exp(beta * a), clip); });
}

double alpha_from_q(const Vector& q) {
  const double total = q.cwiseAbs().sum();
  if (total == 0.0) {
    throw Error(ErrorKind::degenerate_critic, "alpha normalization: sum of |Q| is zero");
  }
  return static_cast<double>(q.size()) / total;
}

LossGrad value_loss(const SawAgent& agent, const Batch& batch) {
  const Vector q = target_q(agent, batch.s, batch.s_next);
  ForwardCache cache;
  const Vector v = forward(agent.value, batch.s, cache).row(0).transpose();
  const double tau = agent.hyper.tau_expectile;
  const double n = static_cast<double>(batch.size());
  double loss = 0.0;
  Matrix upstream(1, batch.size());
  for (Eigen::Index j = 0; j < batch.size(); ++j) {
    const double u = q(j) - v(j);
    loss += expectile_loss(u, tau);
    upstream(0, j) = -2.0 * expectile_weight(u, tau) * u / n;
  }
  loss /= n;
  require_finite(loss, "value loss");
  return {loss, backward(agent.value, cache, upstream).params};
}

std::pair<LossGrad, LossGrad> critic_losses(const SawAgent& agent, const Batch& batch) {
  const Vector v_next = scalar_output(agent.value, batch.s_next);
  const Vector y =
      batch.r + agent.hyper.gamma *
                    ((1.0 - batch.done.array()) * v_next.array()).matrix();
  require_finite(y, "critic target");
  const Matrix pair = vstack(batch.s, batch.s_next);
  if (agent.hyper.critic_loss == CriticLoss::mse) {
    return {scalar_regression_loss(agent.critic1, pair, y),
            scalar_regression_loss(agent.critic2, pair, y)};
  }
  const double tau = agent.hyper.tau_expectile;
  const double n = static_cast<double>(batch.size());
  auto expectile_fit = [&](const Mlp& critic) {
    ForwardCache cache;
    const Matrix q = forward(critic, pair, cache);
    double loss = 0.0;
    Matrix upstream(1, batch.size());
    for (Eigen::Index j = 0; j < batch.size(); ++j) {
      const double u = y(j) - q(0, j);
      loss += expectile_loss(u, tau);
      upstream(0, j) = -2.0 * expectile_weight(u, tau) * u / n;
    }
    loss /= n;
    require_finite(loss, "critic loss");
    return LossGrad{loss, backward(critic, cache, upstream).params};
  };
  return {expectile_fit(agent.critic1), expectile_fit(agent.critic2)};
}

LossGrad actor_loss(const SawAgent& agent, const Batch& batch) {
  const Vector w = advantage_weights(agent, batch.s, batch.s_next);
  return weighted_imitation_loss(agent.actor, vstack(batch.s, batch.s_next), batch.a, w);
}

LossGrad forward_loss(const SawAgent& agent, const Batch& batch) {
  return next_state_loss(agent.forward_model, batch);
}

LossGrad prediction_loss(const SawAgent& agent, const Batch& batch) {
  const Eigen::Index n_obs = agent.env_dims.obs_dim;
  const Eigen::Index n_act = agent.env_dims.act_dim;
  const double n = static_cast<double>(batch.size());
  const Vector w = advantage_weights(agent, batch.s, batch.s_next);
  const double alpha = agent.hyper.use_alpha_normalization
                           ? agent.hyper.alpha_scale * alpha_from_q(target_q(agent, batch.s, batch.s_next))
                           : agent.hyper.alpha_fixed;

  // s_hat = M(s); a' = I(s, s_hat); s_f = F(s, a'); value read at s_f.
  ForwardCache m_cache, i_cache, f_cache, v_cache;
  const Matrix s_hat = forward(agent.prediction, batch.s, m_cache);
  const Matrix a_prop = forward(agent.actor, vstack(batch.s, s_hat), i_cache);
  const Matrix s_f = forward(agent.forward_model, vstack(batch.s, a_prop), f_cache);
  const Matrix v = forward(agent.value, s_f, v_cache);

  const Matrix diff = s_f - batch.s_next;
  const Vector sq = diff.colwise().squaredNorm().transpose();
  const double loss = ((w.array() * sq.array()).sum() - alpha * v.sum()) / n;
  require_finite(loss, "prediction loss");

  Matrix g_sf = 2.0 * diff;
  g_sf.array().rowwise() *= w.transpose().array();
  g_sf /= n;
  const Matrix v_seed = Matrix::Constant(1, batch.size(), -alpha / n);
  g_sf += backward(agent.value, v_cache, v_seed).input_grad;

  const Matrix g_fwd_in = backward(agent.forward_model, f_cache, g_sf).input_grad;
  const Matrix g_actor_in =
      backward(agent.actor, i_cache, g_fwd_in.bottomRows(n_act)).input_grad;
  const Matrix g_s_hat = g_actor_in.bottomRows(n_obs);
  return {loss, backward(agent.prediction, m_cache, g_s_hat).params};
}

UpdateStats update_value(SawAgent& agent, const Batch& batch) {
  auto lg = value_loss(agent, batch);
  adam_step(agent.value, agent.value_opt, lg.grad);
  return {lg.loss};
}

UpdateStats update_critics(SawAgent& agent, const Batch& batch, TargetSync sync) {
  auto [c1, c2] = critic_losses(agent, batch);
  adam_step(agent.critic1, agent.critic1_opt, c1.grad);
  adam_step(agent.critic2, agent.critic2_opt, c2.grad);
  if (sync == TargetSync::immediate) update_targets(agent);
  return {0.5 * (c1.loss + c2.loss)};
}

UpdateStats update_actor(SawAgent& agent, const Batch& batch) {
  auto lg = actor_loss(agent, batch);
  adam_step(agent.actor, agent.actor_opt, lg.grad);
  return {lg.loss};
}

UpdateStats update_forward(SawAgent& agent, const Batch& batch) {
  auto lg = forward_loss(agent, batch);
  adam_step(agent.forward_model, agent.forward_opt, lg.grad);
  return {lg.loss};
}

UpdateStats update_prediction(SawAgent& agent, const Batch& batch) {
  auto lg = prediction_loss(agent, batch);
  adam_step(agent.prediction, agent.prediction_opt, lg.grad);
  return {lg.loss};
}

void update_targets(SawAgent& agent) {
  polyak_update(agent.target1, agent.critic1, agent.hyper.rho_polyak);
  polyak_update(agent.target2, agent.critic2, agent.hyper.rho_polyak);
}

std::vector<double> act(const SawAgent& agent, std::span<const double> s) {
  const Matrix sm = Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size()));
  const Matrix proposal = forward(agent.prediction, sm);
  const Matrix a = forward(agent.actor, vstack(sm, proposal));
  return {a.data(), a.data() + a.size()};
}

StepStats train_step(SawAgent& agent, const Batch& batch) {
  if (batch.size() == 0) throw Error(ErrorKind::invalid_argument, "train_step: empty batch");
  StepStats stats;
  const Vector q = target_q(agent, batch.s, batch.s_next);
  stats.mean_q = q.mean();
  stats.max_q = q.maxCoeff();
  stats.loss_v = update_value(agent, batch).loss;
  stats.loss_q = update_critics(agent, batch, TargetSync::deferred).loss;
  stats.loss_actor = update_actor(agent, batch).loss;
  stats.loss_fwd = update_forward(agent, batch).loss;
  stats.loss_pred = update_prediction(agent, batch).loss;
  update_targets(agent);
  return stats;
}

}  // namespace sawlab::saw
