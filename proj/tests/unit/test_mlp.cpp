#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "ndiff/mlp.hpp"

using namespace ndiff;

namespace {

Mlp formula_mlp() {
  Mlp net(MlpShape{5, 4, 2, 3});
  auto params = net.params();
  for (std::size_t i = 0; i < params.size(); ++i) params[i] = 0.5 * std::sin(0.37 * static_cast<double>(i) + 0.1);
  return net;
}

std::vector<double> formula_input() {
  std::vector<double> x(5);
  for (int j = 0; j < 5; ++j) x[j] = std::cos(0.7 * j);
  return x;
}

}  // namespace

TEST_CASE("parameter layout") {
  const Mlp net(MlpShape{5, 4, 2, 3});
  // (5*4 + 4*3) + (4*4 + 4*3) + (4*3 + 3)
  CHECK(net.param_count() == 75);
  const auto groups = net.param_groups();
  CHECK(groups.size() == 10);
  CHECK(groups.front().name == "block0.weight");
  CHECK(groups.back().name == "output.bias");
  std::size_t total = 0;
  for (const auto& g : groups) total += g.size;
  CHECK(total == net.param_count());
}

TEST_CASE("zero weights give zero output") {
  const Mlp net(MlpShape{6, 8, 3, 4});
  std::vector<double> out(4, 1.0);
  net.forward(std::vector<double>(6, 0.3), out);
  for (double v : out) CHECK(v == 0.0);
}

TEST_CASE("output layer is linear") {
  Rng rng(1);
  Mlp net = Mlp::initialized(MlpShape{4, 8, 2, 3}, rng);
  const std::vector<double> x = {0.1, -0.4, 0.9, 0.2};
  std::vector<double> y1(3), y2(3);
  net.forward(x, y1);
  const auto& out = net.layers().back();
  for (std::size_t i = 0; i < static_cast<std::size_t>(out.in * out.out); ++i) net.params()[out.weight + i] *= 2.0;
  for (int i = 0; i < out.out; ++i) net.params()[out.bias + static_cast<std::size_t>(i)] *= 2.0;
  net.forward(x, y2);
  for (int r = 0; r < 3; ++r) CHECK(y2[r] == doctest::Approx(2.0 * y1[r]).epsilon(1e-13));
}

TEST_CASE("forward pass golden value") {
  // Independent reference evaluation of the same parameter formula.
  const Mlp net = formula_mlp();
  std::vector<double> y(3);
  net.forward(formula_input(), y);
  CHECK(y[0] == doctest::Approx(0.145564790181).epsilon(1e-10));
  CHECK(y[1] == doctest::Approx(0.271143773700459).epsilon(1e-10));
  CHECK(y[2] == doctest::Approx(0.6766872787488873).epsilon(1e-10));
}

TEST_CASE("shape mismatch throws") {
  const Mlp net(MlpShape{3, 4, 1, 2});
  std::vector<double> out(2);
  CHECK_THROWS_AS(net.forward(std::vector<double>(4), out), std::invalid_argument);
  CHECK_THROWS_AS(Mlp(MlpShape{0, 4, 1, 2}), std::invalid_argument);
}

TEST_CASE("initialization is seeded and bounded by fan-in") {
  Rng a(5), b(5);
  const auto n1 = Mlp::initialized(MlpShape{9, 16, 2, 2}, a);
  const auto n2 = Mlp::initialized(MlpShape{9, 16, 2, 2}, b);
  CHECK(std::equal(n1.params().begin(), n1.params().end(), n2.params().begin()));
  const auto& first = n1.layers().front();
  for (std::size_t i = 0; i < 9 * 16; ++i) CHECK(std::abs(n1.params()[first.weight + i]) <= 1.0 / 3.0);
  for (int i = 0; i < 16; ++i) CHECK(n1.params()[first.gain + static_cast<std::size_t>(i)] == 1.0);
}

TEST_CASE("backward pass matches central differences of a linear functional") {
  for (int depth = 1; depth <= 3; ++depth) {
    Rng rng(static_cast<std::uint64_t>(depth));
    Mlp net = Mlp::initialized(MlpShape{5, 6, depth, 3}, rng);
    // Perturb gains and shifts away from their defaults so they get tested.
    for (auto& g : net.param_groups())
      if (g.name.find("gain") != std::string::npos || g.name.find("shift") != std::string::npos)
        for (std::size_t i = 0; i < g.size; ++i) net.params()[g.offset + i] += 0.3 * (2.0 * uniform01(rng) - 1.0);
    const std::vector<double> x = {0.3, -1.0, 0.5, 0.25, -0.7};
    const std::vector<double> c = {0.7, -1.3, 0.4};
    auto f = [&]() {
      std::vector<double> y(3);
      net.forward(x, y);
      return c[0] * y[0] + c[1] * y[1] + c[2] * y[2];
    };
    MlpWorkspace ws;
    std::vector<double> y(3), grad(net.param_count(), 0.0);
    net.forward(x, y, ws);
    net.backward(c, ws, grad);
    const double h = 1e-5;
    for (std::size_t i = 0; i < net.param_count(); ++i) {
      const double keep = net.params()[i];
      net.params()[i] = keep + h;
      const double up = f();
      net.params()[i] = keep - h;
      const double down = f();
      net.params()[i] = keep;
      CHECK(grad[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-6).scale(1.0));
    }
  }
}
