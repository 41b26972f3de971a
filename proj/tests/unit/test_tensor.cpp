#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "hygnn/ops.hpp"
#include "hygnn/tensor.hpp"
#include "oracle.hpp"

using namespace hygnn;

TEST_CASE("tensor construction is row-major") {
  Tensor t({2, 2}, {1, 2, 3, 4});
  CHECK(t.at({1, 0}) == 3.0);
  CHECK(t.at({0, 1}) == 2.0);
  CHECK(t.numel() == 4);
  CHECK(t.rank() == 2);
}

TEST_CASE("tensor construction edge cases") {
  Tensor z({3}, {0, 0, 0});
  for (double v : z.data()) CHECK(v == 0.0);
  CHECK_THROWS_AS(Tensor({2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor({0, 2}, {}), ShapeError);
  CHECK_THROWS_AS(z.at({3}), ShapeError);
  CHECK_THROWS_AS(z.item(), ShapeError);
  CHECK(Tensor::scalar(2.5).item() == 2.5);
}

TEST_CASE("only leaves may be mutated") {
  Tensor x({2}, {1, 2}, true);
  x.mutable_data()[0] = 5.0;
  CHECK(x.data()[0] == 5.0);
  Tensor y = scale(x, 2.0);
  CHECK_THROWS_AS(y.mutable_data(), AutogradError);
}

TEST_CASE("gradient of a plain sum is ones") {
  Tensor x({3}, {0.3, -1, 7}, true);
  auto g = backward(sum(x));
  for (double v : g[x].data()) CHECK(v == 1.0);
}

TEST_CASE("gradient of sum of squares matches finite differences") {
  Tensor x({3}, {1, -2, 3}, true);
  auto g = backward(sum(mul(x, x)));
  auto fd = finite_diff_grad([](const Tensor& t) { return sum(mul(t, t)); }, x, 1e-6);
  const double expected[] = {2, -4, 6};
  for (int i = 0; i < 3; ++i) {
    CHECK(g[x].data()[i] == doctest::Approx(expected[i]).epsilon(1e-12));
    CHECK(std::abs(g[x].data()[i] - fd.data()[i]) < 1e-8);
  }
}

TEST_CASE("subtraction routes opposite gradients") {
  Tensor a({2, 2}, {1, 2, 3, 4}, true);
  Tensor b({2, 2}, {0, 1, 0, 1}, true);
  auto g = backward(sum(sub(a, b)));
  for (double v : g[a].data()) CHECK(v == 1.0);
  for (double v : g[b].data()) CHECK(v == -1.0);
}

TEST_CASE("finite differences") {
  Tensor one({1}, {1.0});
  auto sq = finite_diff_grad([](const Tensor& t) { return sum(mul(t, t)); }, one, 1e-6);
  CHECK(std::abs(sq.item() - 2.0) < 1e-9);

  Tensor x({4}, {0.1, -3, 2, 9});
  auto ones = finite_diff_grad([](const Tensor& t) { return sum(t); }, x, 1e-6);
  for (double v : ones.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));

  Tensor zero({1}, {0.0});
  auto sg = finite_diff_grad([](const Tensor& t) { return sum(sigmoid(t)); }, zero, 1e-6);
  CHECK(std::abs(sg.item() - 0.25) < 1e-10);

  CHECK_THROWS(finite_diff_grad([](const Tensor& t) { return sum(t); }, x, 0.0));
  CHECK_THROWS(finite_diff_grad([](const Tensor& t) { return t; }, x, 1e-6));
}

TEST_CASE("fan-out accumulates gradients") {
  Tensor x({2}, {1.5, -0.5}, true);
  // x feeds three uses: d/dx (x + x*x + 3x) = 4 + 2x
  auto loss = sum(add(add(x, mul(x, x)), scale(x, 3.0)));
  auto g = backward(loss);
  CHECK(g[x].data()[0] == doctest::Approx(4 + 3.0));
  CHECK(g[x].data()[1] == doctest::Approx(4 - 1.0));
}

TEST_CASE("gradient of a sum of losses is the sum of gradients") {
  std::mt19937_64 rng(3);
  auto x = oracle::random_tensor(rng, {2, 3}, -1, 1, true);
  auto y = oracle::random_tensor(rng, {2, 3}, -1, 1, true);
  auto l1 = sum(mul(sigmoid(x), y));
  auto l2 = sum(tanh(mul(x, x)));
  auto joint = backward(add(l1, l2));
  auto parts = backward(l1);
  parts += backward(l2);
  for (const auto* t : {&x, &y}) {
    CHECK(oracle::max_abs_diff(joint[*t].data(), parts[*t].data()) < 1e-14);
  }
}

TEST_CASE("replaying a tape is bitwise identical") {
  std::mt19937_64 rng(4);
  auto x = oracle::random_tensor(rng, {1, 2, 4, 4}, -1, 1, true);
  auto loss = sum(tanh(pyramid_pool(x, 2)));
  Tape tape(loss);
  CHECK(tape.size() > 1);
  auto a = tape.backward();
  auto b = tape.backward();
  CHECK(std::memcmp(a[x].data().data(), b[x].data().data(), x.numel() * sizeof(double)) == 0);
}

TEST_CASE("backward preconditions") {
  Tensor x({2}, {1, 2}, true);
  CHECK_THROWS_AS(backward(mul(x, x)), AutogradError);
  Tensor c({1}, {2.0});
  CHECK_THROWS_AS(backward(c), AutogradError);
}

TEST_CASE("untouched leaves receive zero gradients and detach cuts the graph") {
  Tensor x({2}, {1, 2}, true);
  Tensor y({2}, {3, 4}, true);
  auto g = backward(sum(add(x, y.detach())));
  CHECK(g[y].numel() == 2);
  for (double v : g[y].data()) CHECK(v == 0.0);
  CHECK_FALSE(y.detach().requires_grad());
}

TEST_CASE("reshape is differentiable") {
  Tensor x({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  Tensor w({3, 2}, {1, 0, 2, 0, 3, 0});
  auto g = backward(sum(mul(x.reshape({3, 2}), w)));
  CHECK(g[x].shape() == Shape{2, 3});
  CHECK(g[x].data()[2] == 2.0);
  CHECK_THROWS_AS(x.reshape({4}), ShapeError);
}
