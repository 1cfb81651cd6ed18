#include <doctest.h>

#include <cmath>
#include <random>

#include "oracle.hpp"
#include "sawlab/error.hpp"
#include "sawlab/nn.hpp"

using namespace sawlab;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

}  // namespace

TEST_CASE("forward matches the scalar reference evaluation") {
  std::mt19937_64 rng(3);
  for (auto output : {OutputActivation::identity, OutputActivation::tanh_scaled}) {
    const Mlp net = Mlp::initialized({3, 7, 5, 2}, rng, output, 2.5);
    const Matrix x = random_matrix(3, 6, 11);
    const Matrix y = forward(net, x);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const auto ref = oracle::mlp(net, oracle::column(x, j));
      for (Eigen::Index i = 0; i < 2; ++i) CHECK(y(i, j) == doctest::Approx(ref[i]).epsilon(1e-13));
    }
  }
}

TEST_CASE("zero network outputs zero and tanh output is bounded") {
  const Mlp zero({4, 8, 1});
  CHECK(forward(zero, random_matrix(4, 3, 1)).isZero());
  std::mt19937_64 rng(5);
  Mlp big = Mlp::initialized({2, 4, 2}, rng, OutputActivation::tanh_scaled, 0.5);
  for (auto& l : big.layers()) l.weight *= 100.0;
  const Matrix y = forward(big, random_matrix(2, 50, 2));
  CHECK(y.cwiseAbs().maxCoeff() <= 0.5);
}

TEST_CASE("initialization stays within the fan-in bound") {
  std::mt19937_64 rng(9);
  const Mlp net = Mlp::initialized({16, 32, 4}, rng);
  CHECK(net.layers()[0].weight.cwiseAbs().maxCoeff() <= 0.25);
  CHECK(net.layers()[1].weight.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(32.0));
  CHECK(net.parameter_count() == 16 * 32 + 32 + 32 * 4 + 4);
}

TEST_CASE("flatten and unflatten round trip exactly") {
  std::mt19937_64 rng(1);
  const Mlp net = Mlp::initialized({3, 4, 2}, rng);
  Mlp copy({3, 4, 2});
  copy.unflatten(net.flatten());
  CHECK(copy.flatten() == net.flatten());
  CHECK_THROWS_AS(copy.unflatten(std::vector<double>(3)), Error);
}

TEST_CASE("parameter and input gradients agree with finite differences") {
  std::mt19937_64 rng(21);
  for (auto output : {OutputActivation::identity, OutputActivation::tanh_scaled}) {
    Mlp net = Mlp::initialized({3, 6, 5, 2}, rng, output, 1.5);
    const Matrix x = random_matrix(3, 4, 8);
    const Matrix w = random_matrix(2, 4, 9);
    auto loss = [&] {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const auto y = oracle::mlp(net, oracle::column(x, j));
        acc += w(0, j) * y[0] + w(1, j) * y[1];
      }
      return acc;
    };
    ForwardCache cache;
    forward(net, x, cache);
    const auto result = backward(net, cache, w);
    const auto fd = oracle::finite_difference(net, loss, result.params);
    CHECK(fd.rel_error < 1e-6);
    CHECK(fd.checked > 0);

    Matrix xp = x;
    const double h = 1e-6;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double v[2];
        for (int side = 0; side < 2; ++side) {
          xp(i, j) = x(i, j) + (side == 0 ? h : -h);
          v[side] = (w.array() * forward(net, xp).array()).sum();
        }
        xp(i, j) = x(i, j);
        CHECK(result.input_grad(i, j) == doctest::Approx((v[0] - v[1]) / (2 * h)).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("backward rejects bad shapes and non-finite upstream") {
  const Mlp net({2, 3, 1});
  ForwardCache cache;
  forward(net, Matrix::Ones(2, 4), cache);
  CHECK_THROWS_AS(backward(net, cache, Matrix::Ones(2, 4)), Error);
  Matrix bad = Matrix::Ones(1, 4);
  bad(0, 2) = std::nan("");
  try {
    backward(net, cache, bad);
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::non_finite);
  }
  CHECK_THROWS_AS(forward(net, Matrix::Ones(3, 2)), Error);
}

TEST_CASE("adam first step equals the hand computation") {
  Mlp net({1, 1});
  net.layers()[0].weight(0, 0) = 0.5;
  net.layers()[0].bias(0) = -1.0;
  auto state = AdamState::for_net(net, 0.1);
  Gradient g = Gradient::zeros_like(net);
  g.layers[0].weight(0, 0) = 2.0;
  g.layers[0].bias(0) = -0.01;
  adam_step(net, state, g);
  // m_hat = g and v_hat = g^2 after bias correction, so the step is lr * g / (|g| + eps).
  CHECK(net.layers()[0].weight(0, 0) == doctest::Approx(0.5 - 0.1 * 2.0 / (2.0 + 1e-8)).epsilon(1e-14));
  CHECK(net.layers()[0].bias(0) == doctest::Approx(-1.0 + 0.1 * 0.01 / (0.01 + 1e-8)).epsilon(1e-14));

  // Second step by hand.
  const double m = 0.9 * 0.1 * 2.0 + 0.1 * 1.0;
  const double v = 0.999 * 0.001 * 4.0 + 0.001 * 1.0;
  const double expected = net.layers()[0].weight(0, 0) -
                          0.1 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
  g.layers[0].weight(0, 0) = 1.0;
  adam_step(net, state, g);
  CHECK(net.layers()[0].weight(0, 0) == doctest::Approx(expected).epsilon(1e-13));
  CHECK(state.step_count == 2);
}

TEST_CASE("adam with zero learning rate leaves parameters untouched") {
  std::mt19937_64 rng(2);
  Mlp net = Mlp::initialized({2, 3, 1}, rng);
  const auto before = net.flatten();
  auto state = AdamState::for_net(net, 0.0);
  Gradient g = Gradient::zeros_like(net);
  g.layers[0].weight.setConstant(3.0);
  adam_step(net, state, g);
  CHECK(net.flatten() == before);
  g.layers[1].bias(0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(adam_step(net, state, g), Error);
}

TEST_CASE("polyak update endpoints and convex combination") {
  std::mt19937_64 rng(4);
  const Mlp online = Mlp::initialized({2, 5, 1}, rng);
  const Mlp start = Mlp::initialized({2, 5, 1}, rng);

  Mlp target = start;
  polyak_update(target, online, 0.0);
  CHECK(target.flatten() == start.flatten());
  polyak_update(target, online, 1.0);
  CHECK(target.flatten() == online.flatten());

  for (double rate : {0.005, 0.3, 0.75}) {
    target = start;
    polyak_update(target, online, rate);
    const auto t = target.flatten(), o = online.flatten(), s = start.flatten();
    for (std::size_t i = 0; i < t.size(); ++i) {
      CHECK(t[i] == doctest::Approx(rate * o[i] + (1 - rate) * s[i]).epsilon(1e-15));
      CHECK(t[i] >= std::min(o[i], s[i]) - 1e-15);
      CHECK(t[i] <= std::max(o[i], s[i]) + 1e-15);
    }
  }

  // Repeated updates contract the distance geometrically.
  target = start;
  for (int k = 0; k < 200; ++k) polyak_update(target, online, 0.1);
  const auto t = target.flatten(), o = online.flatten(), s = start.flatten();
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(std::abs(t[i] - o[i]) <= std::pow(0.9, 200) * std::abs(s[i] - o[i]) + 1e-14);
  }

  Mlp other({2, 4, 1});
  CHECK_THROWS_AS(polyak_update(other, online, 0.5), Error);
  CHECK_THROWS_AS(polyak_update(target, online, 1.5), Error);
}
