#include "sawlab/nn.hpp"

#include <cmath>
#include <string>

#include "sawlab/error.hpp"

namespace sawlab {

namespace {

void check_dims(const std::vector<int>& dims) {
  if (dims.size() < 2) {
    throw Error(ErrorKind::shape, "mlp needs at least input and output dims");
  }
  for (int d : dims) {
    if (d <= 0) throw Error(ErrorKind::shape, "mlp dims must be positive");
  }
}

template <typename Fn>
void for_each_pair(std::vector<Layer>& a, const std::vector<Layer>& b, Fn fn) {
  for (std::size_t k = 0; k < a.size(); ++k) {
    fn(a[k].weight, b[k].weight);
    fn(a[k].bias, b[k].bias);
  }
}

std::vector<Layer> zero_layers(const Mlp& net) {
  std::vector<Layer> out;
  out.reserve(net.layers().size());
  for (const auto& l : net.layers()) {
    out.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()),
                   Vector::Zero(l.bias.size())});
  }
  return out;
}

bool shapes_match(const std::vector<Layer>& a, const std::vector<Layer>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].weight.rows() != b[k].weight.rows() ||
        a[k].weight.cols() != b[k].weight.cols() ||
        a[k].bias.size() != b[k].bias.size()) {
      return false;
    }
  }
  return true;
}

}  // namespace

Mlp::Mlp(std::vector<int> dims, OutputActivation output, double output_scale)
    : dims_(std::move(dims)), output_(output), output_scale_(output_scale) {
  check_dims(dims_);
  layers_.reserve(dims_.size() - 1);
  for (std::size_t k = 0; k + 1 < dims_.size(); ++k) {
    layers_.push_back({Matrix::Zero(dims_[k + 1], dims_[k]),
                       Vector::Zero(dims_[k + 1])});
  }
}

Mlp Mlp::initialized(std::vector<int> dims, std::mt19937_64& rng,
                     OutputActivation output, double output_scale) {
  Mlp net(std::move(dims), output, output_scale);
  for (auto& layer : net.layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        layer.weight(r, c) = dist(rng);
      }
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = dist(rng);
  }
  return net;
}

std::size_t Mlp::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

bool Mlp::same_architecture(const Mlp& other) const noexcept {
  return dims_ == other.dims_ && output_ == other.output_ &&
         output_scale_ == other.output_scale_;
}

bool Mlp::all_finite() const noexcept {
  for (const auto& l : layers_) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

std::vector<double> Mlp::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out.push_back(l.weight(r, c));
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) out.push_back(l.bias(r));
  }
  return out;
}

void Mlp::unflatten(std::span<const double> values) {
  if (values.size() != parameter_count()) {
    throw Error(ErrorKind::shape, "parameter count mismatch: expected " +
                                      std::to_string(parameter_count()) + ", got " +
                                      std::to_string(values.size()));
  }
  std::size_t i = 0;
  for (auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = values[i++];
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = values[i++];
  }
}

Gradient Gradient::zeros_like(const Mlp& net) { return {zero_layers(net)}; }

bool Gradient::all_finite() const noexcept {
  for (const auto& l : layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

double Gradient::max_abs() const noexcept {
  double m = 0.0;
  for (const auto& l : layers) {
    if (l.weight.size() > 0) m = std::max(m, l.weight.cwiseAbs().maxCoeff());
    if (l.bias.size() > 0) m = std::max(m, l.bias.cwiseAbs().maxCoeff());
  }
  return m;
}

std::vector<double> Gradient::flatten() const {
  std::vector<double> out;
  for (const auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out.push_back(l.weight(r, c));
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) out.push_back(l.bias(r));
  }
  return out;
}

Gradient& Gradient::operator+=(const Gradient& other) {
  if (!shapes_match(layers, other.layers)) {
    throw Error(ErrorKind::shape, "gradient shape mismatch");
  }
  for_each_pair(layers, other.layers, [](auto& a, const auto& b) { a += b; });
  return *this;
}

Matrix forward(const Mlp& net, const Matrix& inputs, ForwardCache& cache) {
  if (inputs.rows() != net.input_dim()) {
    throw Error(ErrorKind::shape, "forward: input has " + std::to_string(inputs.rows()) +
                                      " rows, network expects " +
                                      std::to_string(net.input_dim()));
  }
  const auto& layers = net.layers();
  cache.inputs.resize(layers.size());
  cache.pre_activations.resize(layers.size());
  Matrix x = inputs;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    cache.inputs[k] = x;
    Matrix z = layers[k].weight * x;
    z.colwise() += layers[k].bias;
    cache.pre_activations[k] = z;
    if (k + 1 < layers.size()) {
      x = z.cwiseMax(0.0);
    } else if (net.output_activation() == OutputActivation::tanh_scaled) {
      x = net.output_scale() * z.array().tanh();
    } else {
      x = std::move(z);
    }
  }
  cache.output = x;
  return x;
}

Matrix forward(const Mlp& net, const Matrix& inputs) {
  ForwardCache cache;
  return forward(net, inputs, cache);
}

std::vector<double> forward(const Mlp& net, std::span<const double> input) {
  Matrix x = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()));
  Matrix y = forward(net, x);
  return {y.data(), y.data() + y.size()};
}

BackwardResult backward(const Mlp& net, const ForwardCache& cache,
                        const Matrix& upstream) {
  const auto& layers = net.layers();
  if (cache.pre_activations.size() != layers.size() ||
      upstream.rows() != net.output_dim() ||
      upstream.cols() != cache.output.cols()) {
    throw Error(ErrorKind::shape, "backward: upstream gradient shape mismatch");
  }
  if (!upstream.allFinite()) {
    throw Error(ErrorKind::non_finite, "backward: non-finite upstream gradient");
  }

  BackwardResult result{Gradient::zeros_like(net), {}};
  Matrix delta = upstream;
  if (net.output_activation() == OutputActivation::tanh_scaled) {
    const auto t = cache.pre_activations.back().array().tanh();
    delta = (delta.array() * net.output_scale() * (1.0 - t * t)).matrix();
  }
  for (std::size_t k = layers.size(); k-- > 0;) {
    auto& g = result.params.layers[k];
    g.weight.noalias() = delta * cache.inputs[k].transpose();
    g.bias = delta.rowwise().sum();
    Matrix below = layers[k].weight.transpose() * delta;
    if (k > 0) {
      const auto& z = cache.pre_activations[k - 1];
      delta = (below.array() * (z.array() > 0.0).cast<double>()).matrix();
    } else {
      result.input_grad = std::move(below);
    }
  }
  return result;
}

Gradient backward(const Mlp& net, const Matrix& inputs, const Matrix& upstream) {
  ForwardCache cache;
  forward(net, inputs, cache);
  return backward(net, cache, upstream).params;
}

AdamState AdamState::for_net(const Mlp& net, double learning_rate) {
  AdamState s;
  s.first_moment = zero_layers(net);
  s.second_moment = zero_layers(net);
  s.learning_rate = learning_rate;
  return s;
}

void adam_step(Mlp& net, AdamState& state, const Gradient& grad) {
  if (!shapes_match(net.layers(), grad.layers) ||
      !shapes_match(net.layers(), state.first_moment) ||
      !shapes_match(net.layers(), state.second_moment)) {
    throw Error(ErrorKind::shape, "adam_step: shape mismatch");
  }
  if (!grad.all_finite()) {
    throw Error(ErrorKind::non_finite, "adam_step: non-finite gradient");
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    param.array() -= state.learning_rate * (m.array() / c1) /
                     ((v.array() / c2).sqrt() + state.epsilon);
  };
  auto& layers = net.layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    update(layers[k].weight, state.first_moment[k].weight,
           state.second_moment[k].weight, grad.layers[k].weight);
    update(layers[k].bias, state.first_moment[k].bias, state.second_moment[k].bias,
           grad.layers[k].bias);
  }
}

void polyak_update(Mlp& target, const Mlp& online, double rate) {
  if (!target.same_architecture(online)) {
    throw Error(ErrorKind::shape, "polyak_update: architecture mismatch");
  }
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw Error(ErrorKind::invalid_argument, "polyak_update: rate must be in [0, 1]");
  }
  for_each_pair(target.layers(), online.layers(), [rate](auto& t, const auto& o) {
    t = rate * o + (1.0 - rate) * t;
  });
}

Matrix vstack(const Matrix& top, const Matrix& bottom) {
  if (top.cols() != bottom.cols()) {
    throw Error(ErrorKind::shape, "vstack: column count mismatch");
  }
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

}  // namespace sawlab
