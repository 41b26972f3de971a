#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "hygnn/init.hpp"
#include "hygnn/ops.hpp"
#include "oracle.hpp"

using namespace hygnn;

namespace {

ConvParams zero_conv(std::size_t out, std::size_t in, std::size_t k) {
  return {Tensor::zeros({out, in, k, k}), Tensor::zeros({out}), 1, (k - 1) / 2, 1};
}

ConvGruParams zero_gru(std::size_t c) { return {zero_conv(c, 2 * c, 3), zero_conv(c, 2 * c, 3), zero_conv(c, 2 * c, 3)}; }

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("conv2d hand examples") {
  ConvParams scale2{Tensor::full({1, 1, 1, 1}, 2.0), Tensor::zeros({1})};
  auto y = conv2d(Tensor::full({1, 1, 3, 3}, 1.0), scale2);
  CHECK(y.shape() == Shape{1, 1, 3, 3});
  for (double v : y.data()) CHECK(v == 2.0);

  ConvParams ones3{Tensor::full({1, 1, 3, 3}, 1.0), Tensor::zeros({1})};
  auto s = conv2d(Tensor({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9}), ones3);
  CHECK(s.shape() == Shape{1, 1, 1, 1});
  CHECK(s.item() == 45.0);

  ConvParams dil{Tensor::full({1, 1, 3, 3}, 1.0), Tensor::zeros({1}), 1, 0, 2};
  auto d = conv2d(Tensor::full({1, 1, 5, 5}, 1.0), dil);
  CHECK(d.shape() == Shape{1, 1, 1, 1});
  CHECK(d.item() == 9.0);
}

TEST_CASE("conv2d is cross-correlation") {
  // A kernel with a single 1 at its top-left picks the input's top-left neighbour.
  std::vector<double> k(9, 0.0);
  k[0] = 1.0;
  ConvParams p{Tensor({1, 1, 3, 3}, k), Tensor::zeros({1})};
  auto y = conv2d(Tensor({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9}), p);
  CHECK(y.item() == 1.0);
}

TEST_CASE("conv2d matches the dense-loop oracle") {
  std::mt19937_64 rng(11);
  struct Case {
    std::size_t b, cin, cout, h, w, k, stride, pad, dil;
  };
  for (auto c : {Case{2, 3, 2, 6, 5, 3, 1, 1, 1}, Case{1, 2, 3, 7, 7, 3, 2, 0, 1},
                 Case{2, 2, 2, 6, 6, 3, 1, 2, 2}, Case{1, 3, 4, 4, 5, 1, 1, 0, 1},
                 Case{1, 1, 2, 6, 6, 5, 1, 2, 1}, Case{2, 2, 1, 5, 5, 3, 2, 1, 2}}) {
    ConvParams p{oracle::random_tensor(rng, {c.cout, c.cin, c.k, c.k}), oracle::random_tensor(rng, {c.cout}),
                 c.stride, c.pad, c.dil};
    auto x = oracle::random_tensor(rng, {c.b, c.cin, c.h, c.w});
    auto y = conv2d(x, p);
    auto ref = oracle::conv2d(oracle::Map4(x), oracle::from_params(p));
    REQUIRE(y.shape() == Shape{ref.b, ref.c, ref.h, ref.w});
    CHECK(oracle::max_abs_diff(y, ref) < 1e-12);
  }
}

TEST_CASE("same padding preserves spatial size for odd kernels") {
  std::mt19937_64 rng(12);
  for (std::size_t k : {1, 3, 5, 7})
    for (std::size_t dil : {1, 2, 3}) {
      ConvParams p{oracle::random_tensor(rng, {2, 2, k, k}), Tensor::zeros({2}), 1, dil * (k - 1) / 2, dil};
      auto y = conv2d(oracle::random_tensor(rng, {1, 2, 5, 6}), p);
      CHECK(y.shape() == Shape{1, 2, 5, 6});
    }
}

TEST_CASE("conv2d rejects mismatched channels") {
  ConvParams p{Tensor::zeros({1, 2, 3, 3}), Tensor::zeros({1}), 1, 1, 1};
  CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 3, 4, 4}), p), ShapeError);
}

TEST_CASE("bilinear resize") {
  auto c = bilinear_resize(Tensor::full({1, 2, 3, 5}, 0.7), 8, 2);
  for (double v : c.data()) CHECK(v == 0.7);

  std::mt19937_64 rng(13);
  auto x = oracle::random_tensor(rng, {2, 2, 3, 4});
  CHECK(bitwise_equal(bilinear_resize(x, 3, 4), x));

  auto row = bilinear_resize(Tensor({1, 1, 1, 2}, {0, 1}), 1, 4);
  CHECK(row.data()[0] == 0.0);
  CHECK(row.data()[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(row.data()[2] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(row.data()[3] == 1.0);

  auto plane = oracle::random_tensor(rng, {1, 1, 3, 4});
  auto up = bilinear_resize(plane, 7, 5);
  auto ref = oracle::bilinear({plane.data().begin(), plane.data().end()}, 3, 4, 7, 5);
  CHECK(oracle::max_abs_diff(up.data(), ref) < 1e-14);
}

TEST_CASE("adaptive average pooling and pyramid pooling") {
  std::mt19937_64 rng(14);
  auto x = oracle::random_tensor(rng, {1, 1, 4, 4});
  double mean = 0.0;
  for (double v : x.data()) mean += v;
  mean /= 16.0;
  auto g = pyramid_pool(x, 1);
  CHECK(g.shape() == x.shape());
  for (double v : g.data()) CHECK(std::abs(v - mean) < 1e-15);

  for (std::size_t bins : {1, 2, 3, 4}) {
    auto c = pyramid_pool(Tensor::full({1, 2, 4, 4}, -1.25), bins);
    for (double v : c.data()) CHECK(v == -1.25);
  }

  auto y = oracle::random_tensor(rng, {2, 3, 5, 5});
  CHECK(bitwise_equal(pyramid_pool(y, 5), y));
  CHECK_THROWS(pyramid_pool(y, 6));

  // Windows [floor(iH/b), ceil((i+1)H/b)): with H = 5 and 2 bins the two windows share row 2.
  auto p = adaptive_avg_pool(Tensor({1, 1, 1, 5}, {1, 2, 3, 4, 5}), 1);
  CHECK(p.item() == doctest::Approx(3.0));
  auto q = adaptive_avg_pool(Tensor({1, 1, 5, 2}, {1, 1, 2, 2, 3, 3, 4, 4, 5, 5}), 2);
  CHECK(q.shape() == Shape{1, 1, 2, 2});
  CHECK(q.data()[0] == doctest::Approx(2.0));
  CHECK(q.data()[1] == doctest::Approx(2.0));
  CHECK(q.data()[2] == doctest::Approx(4.0));
  CHECK(q.data()[3] == doctest::Approx(4.0));
}

TEST_CASE("pyramid pooling keeps the channel mean for one, two and full-size bins") {
  std::mt19937_64 rng(15);
  auto x = oracle::random_tensor(rng, {1, 2, 8, 8});
  for (std::size_t bins : {1, 2, 8}) {
    auto y = pyramid_pool(x, bins);
    for (std::size_t c = 0; c < 2; ++c) {
      double a = 0.0, b = 0.0;
      for (std::size_t i = 0; i < 64; ++i) {
        a += x.data()[c * 64 + i];
        b += y.data()[c * 64 + i];
      }
      CHECK(std::abs(a - b) / 64.0 < 1e-12);
    }
  }
}

TEST_CASE("max pooling") {
  auto y = max_pool2x2(Tensor({1, 1, 2, 4}, {1, 5, 2, 2, 3, 4, 7, 0}));
  CHECK(y.shape() == Shape{1, 1, 1, 2});
  CHECK(y.data()[0] == 5.0);
  CHECK(y.data()[1] == 7.0);

  // Ties route the gradient to the first maximum only.
  Tensor t({1, 1, 2, 2}, {3, 3, 3, 3}, true);
  auto g = backward(sum(max_pool2x2(t)));
  CHECK(g[t].data()[0] == 1.0);
  CHECK(g[t].data()[1] == 0.0);
  CHECK_THROWS(max_pool2x2(Tensor::zeros({1, 1, 3, 4})));
}

TEST_CASE("sigmoid") {
  CHECK(sigmoid(Tensor({1}, {0.0})).item() == 0.5);
  CHECK(std::abs(sigmoid(Tensor({1}, {40.0})).item() - 1.0) < 1e-9);
  CHECK(std::isfinite(sigmoid(Tensor({1}, {-800.0})).item()));
  std::mt19937_64 rng(16);
  auto x = oracle::random_tensor(rng, {32}, -10, 10);
  auto pos = sigmoid(x);
  auto neg = sigmoid(scale(x, -1.0));
  for (std::size_t i = 0; i < 32; ++i) CHECK(std::abs(neg.data()[i] - (1.0 - pos.data()[i])) < 1e-15);
}

TEST_CASE("conv GRU hand-evaluated fixed points") {
  std::mt19937_64 rng(17);
  auto s = oracle::random_tensor(rng, {1, 3, 4, 4});
  auto x = oracle::random_tensor(rng, {1, 3, 4, 4});
  auto y = conv_gru_step(s, x, zero_gru(3));
  for (std::size_t i = 0; i < s.numel(); ++i) CHECK(y.data()[i] == 0.5 * s.data()[i]);

  auto z = conv_gru_step(Tensor::zeros({1, 3, 4, 4}), Tensor::zeros({1, 3, 4, 4}), zero_gru(3));
  for (double v : z.data()) CHECK(v == 0.0);
}

TEST_CASE("conv GRU matches the step-by-step oracle") {
  Rng rng(18);
  auto gru = make_conv_gru(rng, 2);
  std::mt19937_64 data(19);
  auto s = oracle::random_tensor(data, {2, 2, 4, 5});
  auto x = oracle::random_tensor(data, {2, 2, 4, 5});
  auto y = conv_gru_step(s, x, gru);
  CHECK(y.shape() == s.shape());
  auto ref = oracle::gru_step(oracle::Map4(s), oracle::Map4(x), oracle::from_params(gru));
  CHECK(oracle::max_abs_diff(y, ref) < 1e-12);
}

TEST_CASE("dynamic convolution") {
  std::mt19937_64 rng(20);
  auto x = oracle::random_tensor(rng, {2, 3, 2, 2});
  std::vector<double> eye(2 * 9, 0.0);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t c = 0; c < 3; ++c) eye[b * 9 + c * 3 + c] = 1.0;
  CHECK(bitwise_equal(dynamic_conv(x, Tensor({2, 3, 3, 1, 1}, eye)), x));

  auto zero = dynamic_conv(x, Tensor::zeros({2, 3, 3, 1, 1}));
  for (double v : zero.data()) CHECK(v == 0.0);

  auto two = oracle::random_tensor(rng, {1, 2, 2, 3});
  auto swapped = dynamic_conv(two, Tensor({1, 2, 2, 1, 1}, {0, 1, 1, 0}));
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(swapped.data()[i] == two.data()[6 + i]);
    CHECK(swapped.data()[6 + i] == two.data()[i]);
  }

  auto k = oracle::random_tensor(rng, {2, 3, 3, 1, 1});
  auto ref = oracle::dynamic_conv(oracle::Map4(x), {k.data().begin(), k.data().end()});
  CHECK(oracle::max_abs_diff(dynamic_conv(x, k), ref) < 1e-14);
  CHECK_THROWS_AS(dynamic_conv(x, Tensor::zeros({1, 3, 3, 1, 1})), ShapeError);
}

TEST_CASE("channel concatenation") {
  std::mt19937_64 rng(21);
  auto a = oracle::random_tensor(rng, {2, 4, 3, 3});
  CHECK(bitwise_equal(concat_channels({a}), a));
  auto b = oracle::random_tensor(rng, {2, 4, 3, 3});
  auto c = oracle::random_tensor(rng, {2, 4, 3, 3});
  auto abc = concat_channels({a, b, c});
  CHECK(abc.shape() == Shape{2, 12, 3, 3});
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t ch = 0; ch < 4; ++ch)
      for (std::size_t y = 0; y < 3; ++y)
        for (std::size_t x = 0; x < 3; ++x) CHECK(abc.at({n, 4 + ch, y, x}) == b.at({n, ch, y, x}));
  CHECK_THROWS_AS(concat_channels({a, Tensor::zeros({2, 1, 2, 3})}), ShapeError);
}

TEST_CASE("channel gating, pooling and dense layers") {
  std::mt19937_64 rng(22);
  auto g = oracle::random_tensor(rng, {2, 1, 3, 3});
  auto x = oracle::random_tensor(rng, {2, 4, 3, 3});
  CHECK(oracle::max_abs_diff(gate_channels(g, x), oracle::gate(oracle::Map4(g), oracle::Map4(x))) == 0.0);

  auto m = global_avg_pool(Tensor({1, 2, 1, 2}, {1, 3, -2, 6}));
  CHECK(m.shape() == Shape{1, 2});
  CHECK(m.data()[0] == 2.0);
  CHECK(m.data()[1] == 2.0);

  auto y = linear(Tensor({1, 2}, {1, 2}), Tensor({3, 2}, {1, 0, 0, 1, 1, 1}), Tensor({3}, {0, 0, 10}));
  CHECK(y.data()[0] == 1.0);
  CHECK(y.data()[1] == 2.0);
  CHECK(y.data()[2] == 13.0);
}

TEST_CASE("mean squared error") {
  std::mt19937_64 rng(23);
  auto t = oracle::random_tensor(rng, {2, 3});
  CHECK(mse_loss(t, t).item() == 0.0);
  CHECK(mse_loss(Tensor({2}, {1, 2}), Tensor({2}, {0, 0})).item() == 2.5);
  CHECK(sse_loss(Tensor({2}, {1, 2}), Tensor({2}, {0, 0})).item() == 5.0);

  auto p = oracle::random_tensor(rng, {2, 3}, -1, 1, true);
  auto g = backward(mse_loss(p, t));
  auto fd = finite_diff_grad([&](const Tensor& q) { return mse_loss(q, t); }, p, 1e-6);
  for (std::size_t i = 0; i < 6; ++i) {
    const double expected = 2.0 * (p.data()[i] - t.data()[i]) / 6.0;
    CHECK(std::abs(g[p].data()[i] - expected) < 1e-15);
    CHECK(std::abs(fd.data()[i] - expected) < 1e-9);
  }
  CHECK_THROWS_AS(mse_loss(t, p), AutogradError);
  CHECK_THROWS_AS(mse_loss(t, Tensor::zeros({3, 2})), ShapeError);
}
