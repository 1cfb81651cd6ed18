#include "sawlab/agent.hpp"

#include <cmath>
#include <string>

#include "sawlab/error.hpp"

namespace sawlab {

void AgentDims::validate() const {
  if (obs_dim <= 0 || act_dim <= 0 || !(action_bound > 0.0) || !std::isfinite(action_bound)) {
    throw Error(ErrorKind::invalid_argument, "agent dims: widths and action bound must be positive");
  }
}

std::vector<std::pair<std::string, Mlp*>> Agent::mutable_networks() {
  std::vector<std::pair<std::string, Mlp*>> out;
  for (auto& [name, net] : networks()) out.emplace_back(name, const_cast<Mlp*>(net));
  return out;
}

void require_finite(double value, std::string_view what) {
  if (!std::isfinite(value)) {
    throw Error(ErrorKind::non_finite, std::string(what) + " is not finite");
  }
}

void require_finite(const Eigen::Ref<const Matrix>& values, std::string_view what) {
  if (!values.allFinite()) {
    throw Error(ErrorKind::non_finite, std::string(what) + " has non-finite entries");
  }
}

LossGrad imitation_loss(const Mlp& actor, const Matrix& input, const Matrix& actions) {
  ForwardCache cache;
  const Matrix pred = forward(actor, input, cache);
  if (pred.rows() != actions.rows() || pred.cols() != actions.cols()) {
    throw Error(ErrorKind::shape, "imitation_loss: action shape mismatch");
  }
  const double n = static_cast<double>(input.cols());
  const Matrix diff = pred - actions;
  const double loss = diff.colwise().squaredNorm().sum() / n;
  require_finite(loss, "imitation loss");
  const Matrix upstream = 2.0 * diff / n;
  return {loss, backward(actor, cache, upstream).params};
}

LossGrad weighted_imitation_loss(const Mlp& actor, const Matrix& input, const Matrix& actions,
                                 const Vector& weights) {
  ForwardCache cache;
  const Matrix pred = forward(actor, input, cache);
  if (pred.rows() != actions.rows() || pred.cols() != actions.cols() ||
      weights.size() != input.cols()) {
    throw Error(ErrorKind::shape, "weighted_imitation_loss: shape mismatch");
  }
  require_finite(weights, "imitation weights");
  const double n = static_cast<double>(input.cols());
  const Matrix diff = pred - actions;
  const double loss = (diff.colwise().squaredNorm().transpose().array() * weights.array()).sum() / n;
  require_finite(loss, "weighted imitation loss");
  Matrix upstream = 2.0 * diff;
  upstream.array().rowwise() *= weights.transpose().array();
  upstream /= n;
  return {loss, backward(actor, cache, upstream).params};
}

LossGrad next_state_loss(const Mlp& forward_model, const Batch& batch) {
  ForwardCache cache;
  const Matrix pred = forward(forward_model, vstack(batch.s, batch.a), cache);
  const double n = static_cast<double>(batch.size());
  const Matrix diff = pred - batch.s_next;
  const double loss = diff.colwise().squaredNorm().sum() / n;
  require_finite(loss, "forward model loss");
  return {loss, backward(forward_model, cache, 2.0 * diff / n).params};
}

LossGrad scalar_regression_loss(const Mlp& net, const Matrix& input, const Vector& target) {
  ForwardCache cache;
  const Matrix pred = forward(net, input, cache);
  const double n = static_cast<double>(input.cols());
  const Matrix diff = pred - target.transpose();
  const double loss = diff.squaredNorm() / n;
  require_finite(loss, "regression loss");
  return {loss, backward(net, cache, 2.0 * diff / n).params};
}

Vector scalar_output(const Mlp& net, const Matrix& input) {
  return forward(net, input).row(0).transpose();
}

}  // namespace sawlab
