// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

using namespace discond;
using test::pattern_tensor;

namespace {

// sum(f(x) * r) with a fixed weighting r, so every output element matters.
Tensor weighted(const Tensor& y, double a = 0.29, double b = 0.4) {
  return sum(mul(y, pattern_tensor(y.shape(), a, b)));
}

constexpr double kGradTol = 5e-3;

}  // namespace

TEST_CASE("broadcasting follows numpy alignment") {
  const Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor row({3}, {10, 20, 30});
  const Tensor col({2, 1}, {100, 200});
  CHECK(add(a, row).to_vector() == std::vector<float>{11, 22, 33, 14, 25, 36});
  CHECK(add(a, col).to_vector() == std::vector<float>{101, 102, 103, 204, 205, 206});
  CHECK(mul(col, row).shape() == Shape{2, 3});
  CHECK_THROWS_AS(add(a, Tensor({2})), ShapeError);
}

TEST_CASE("binary op gradients reduce over broadcast axes") {
  Tensor a = pattern_tensor({3, 4}, 0.3, 0.1, 1.0, true);
  Tensor b = pattern_tensor({4}, 0.7, 0.2, 1.0, true);
  Tensor c = pattern_tensor({3, 1}, 0.5, 1.3, 1.0, true);
  for (int i = 0; i < 3; ++i) c.values()[i] += 2.0f;  // keep division well away from 0
  CHECK(test::gradient_error({a, b}, [&] { return weighted(add(a, b)); }) < kGradTol);
  CHECK(test::gradient_error({a, b}, [&] { return weighted(sub(a, b)); }) < kGradTol);
  CHECK(test::gradient_error({a, b}, [&] { return weighted(mul(a, b)); }) < kGradTol);
  CHECK(test::gradient_error({a, c}, [&] { return weighted(div(a, c)); }) < kGradTol);
  CHECK(test::gradient_error({a}, [&] { return weighted(a * 3.0f - 1.5f); }) < kGradTol);
}

TEST_CASE("unary op gradients") {
  Tensor x = pattern_tensor({5, 3}, 0.41, 0.3, 2.0, true);
  Tensor pos = pattern_tensor({5, 3}, 0.41, 0.3, 1.0, true);
  for (float& v : pos.values()) v += 1.5f;
  CHECK(test::gradient_error({x}, [&] { return weighted(neg(x)); }) < kGradTol);
  CHECK(test::gradient_error({x}, [&] { return weighted(exp(x)); }) < kGradTol);
  CHECK(test::gradient_error({pos}, [&] { return weighted(log(pos)); }) < kGradTol);
  CHECK(test::gradient_error({x}, [&] { return weighted(square(x)); }) < kGradTol);
  CHECK(test::gradient_error({x}, [&] { return weighted(sigmoid(x)); }) < kGradTol);
  CHECK(test::gradient_error({x}, [&] { return weighted(softmax(x)); }) < kGradTol);
  CHECK(test::gradient_error({x}, [&] { return weighted(log_softmax(x)); }) < kGradTol);
  // Kinked ops: pattern values avoid the kinks by more than the step.
  CHECK(test::gradient_error({x}, [&] { return weighted(relu(x)); }) < kGradTol);
  CHECK(test::gradient_error({x}, [&] { return weighted(abs(x)); }) < kGradTol);
}

TEST_CASE("abs and relu take the zero subgradient at the kink") {
  Tensor x({3}, {-1.0f, 0.0f, 2.0f}, true);
  backward(sum(abs(x)));
  CHECK(x.to_vector() == std::vector<float>{-1.0f, 0.0f, 2.0f});
  CHECK(std::vector<float>(x.grad().begin(), x.grad().end()) == std::vector<float>{-1.0f, 0.0f, 1.0f});
  x.zero_grad();
  backward(sum(relu(x)));
  CHECK(std::vector<float>(x.grad().begin(), x.grad().end()) == std::vector<float>{0.0f, 0.0f, 1.0f});
}

TEST_CASE("log_softmax matches the oracle on wide-range logits") {
  const Tensor s = pattern_tensor({2, 5}, 0.9, 0.4, 50.0);
  CHECK(test::normwise_error(log_softmax(s).values(), test::oracle("log_softmax.y")) < 1e-6);
  const Tensor p = softmax(s);
  for (std::size_t r = 0; r < 2; ++r) {
    double total = 0.0;
    for (std::size_t j = 0; j < 5; ++j) total += p.values()[r * 5 + j];
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
  }
  const Tensor big({1, 2}, {1000.0f, 1000.0f});
  CHECK(softmax(big).to_vector() == std::vector<float>{0.5f, 0.5f});
}

TEST_CASE("sigmoid is stable at large magnitudes") {
  const Tensor x({4}, {-200.0f, -30.0f, 30.0f, 200.0f});
  const auto y = sigmoid(x).to_vector();
  CHECK(y[0] == 0.0f);
  CHECK(y[1] > 0.0f);
  CHECK(y[2] == doctest::Approx(1.0));
  CHECK(y[3] == 1.0f);
}

TEST_CASE("reductions") {
  Tensor x = pattern_tensor({2, 3, 4}, 0.37, 0.2, 1.0, true);
  double total = 0.0;
  for (float v : x.values()) total += v;
  CHECK(sum(x).item() == doctest::Approx(total).epsilon(1e-6));
  CHECK(mean(x).item() == doctest::Approx(total / 24.0).epsilon(1e-6));
  const Tensor s1 = sum(x, 1);
  CHECK(s1.shape() == Shape{2, 4});
  CHECK(s1.values()[0] == doctest::Approx(x.values()[0] + x.values()[4] + x.values()[8]));
  CHECK(mean(x, 2).shape() == Shape{2, 3});
  for (std::size_t axis = 0; axis < 3; ++axis) {
    CHECK(test::gradient_error({x}, [&] { return weighted(sum(x, axis)); }) < kGradTol);
    CHECK(test::gradient_error({x}, [&] { return weighted(mean(x, axis)); }) < kGradTol);
  }
  CHECK_THROWS_AS(sum(x, 3), ShapeError);
}

TEST_CASE("layout ops route gradients") {
  Tensor a = pattern_tensor({2, 3}, 0.3, 0.1, 1.0, true);
  Tensor b = pattern_tensor({2, 2}, 0.6, 0.5, 1.0, true);
  const Tensor c = concat({a, b}, 1);
  CHECK(c.shape() == Shape{2, 5});
  CHECK(c.values()[3] == b.values()[0]);
  CHECK(test::gradient_error({a, b}, [&] { return weighted(concat({a, b}, 1)); }) < kGradTol);
  CHECK(test::gradient_error({a}, [&] { return weighted(concat({a, a}, 0)); }) < kGradTol);
  CHECK(test::gradient_error({a}, [&] { return weighted(slice(a, 1, 1, 2)); }) < kGradTol);
  CHECK(test::gradient_error({a}, [&] { return weighted(reshape(a, {3, 2})); }) < kGradTol);
  CHECK_THROWS_AS(reshape(a, {4, 2}), ShapeError);
  CHECK_THROWS_AS(slice(a, 1, 2, 2), ShapeError);
  CHECK_THROWS_AS(concat({a, Tensor({3, 3})}, 1), ShapeError);
}

TEST_CASE("linear matches the oracle") {
  Tensor x = pattern_tensor({3, 5}, 0.41, 0.2, 1.0, true);
  Tensor w = pattern_tensor({4, 5}, 0.29, 0.8, 1.0, true);
  Tensor b = pattern_tensor({4}, 0.7, 0.1, 1.0, true);
  const Tensor y = linear(x, w, b);
  CHECK(test::normwise_error(y.values(), test::oracle("linear.y")) < 1e-6);
  backward(sum(mul(y, pattern_tensor({3, 4}, 0.53, 0.3))));
  CHECK(test::normwise_error(x.grad(), test::oracle("linear.gx")) < 1e-6);
  CHECK(test::normwise_error(w.grad(), test::oracle("linear.gw")) < 1e-6);
  CHECK(test::normwise_error(b.grad(), test::oracle("linear.gb")) < 1e-6);
  CHECK_THROWS_AS(linear(x, Tensor({4, 6}), b), ShapeError);
}

TEST_CASE("bce_with_logits matches the oracle per example") {
  Tensor z = pattern_tensor({3, 8}, 0.77, 0.2, 6.0, true);
  std::vector<float> t = test::pattern(24, 0.61, 1.3);
  for (float& v : t) v = static_cast<float>((static_cast<double>(v) + 1.0) / 2.0);
  const Tensor target({3, 8}, t);
  const Tensor loss = bce_with_logits(z, target);
  CHECK(loss.shape() == Shape{3});
  CHECK(test::normwise_error(loss.values(), test::oracle("bce.loss")) < 1e-6);
  backward(sum(loss));
  CHECK(test::normwise_error(z.grad(), test::oracle("bce.gz")) < 1e-6);
  // Saturated logits stay finite.
  const Tensor extreme({1, 2}, {-500.0f, 500.0f});
  const Tensor y({1, 2}, {1.0f, 0.0f});
  CHECK(bce_with_logits(extreme, y).item() == doctest::Approx(1000.0));
}

TEST_CASE("mode gather and scatter are adjoint") {
  Tensor x = pattern_tensor({3, 4, 2}, 0.3, 0.3, 1.0, true);
  const std::vector<std::size_t> idx{2, 0, 3};
  const Tensor g = gather_mode(x, idx);
  CHECK(g.shape() == Shape{3, 2});
  CHECK(g.values()[0] == x.values()[0 * 8 + 2 * 2]);
  CHECK(g.values()[5] == x.values()[2 * 8 + 3 * 2 + 1]);
  CHECK(test::gradient_error({x}, [&] { return weighted(gather_mode(x, idx)); }) < kGradTol);

  Tensor w = pattern_tensor({3, 2}, 0.8, 0.1, 1.0, true);
  const Tensor s = scatter_mode(w, idx, 4);
  CHECK(s.shape() == Shape{3, 8});
  // <scatter(w), r> == <w, gather(r)>
  const Tensor r = pattern_tensor({3, 8}, 0.2, 0.9);
  const double lhs = sum(mul(s, r)).item();
  const double rhs = sum(mul(w, gather_mode(reshape(r, {3, 4, 2}), idx))).item();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
  CHECK(test::gradient_error({w}, [&] { return weighted(scatter_mode(w, idx, 4)); }) < kGradTol);
  CHECK_THROWS(gather_mode(x, std::vector<std::size_t>{0, 4, 1}));
}

TEST_CASE("one_hot and argmax with lowest-index ties") {
  const std::vector<std::size_t> idx{1, 0, 2};
  CHECK(one_hot(idx, 3).to_vector() == std::vector<float>{0, 1, 0, 1, 0, 0, 0, 0, 1});
  const Tensor x({3, 3}, {0.2f, 0.5f, 0.5f, 1.0f, 1.0f, 1.0f, -3.0f, -1.0f, -2.0f});
  CHECK(argmax_rows(x) == std::vector<std::size_t>{1, 0, 1});
}

TEST_CASE("no-grad guard suppresses graph recording") {
  Tensor x({2}, {1.0f, 2.0f}, true);
  {
    NoGradGuard guard;
    CHECK_FALSE(grad_enabled());
    CHECK_FALSE(mul(x, x).requires_grad());
  }
  CHECK(grad_enabled());
  CHECK(mul(x, x).requires_grad());
}

TEST_CASE("backward accumulates into leaves across calls") {
  Tensor x({1}, {3.0f}, true);
  backward(square(x));
  backward(square(x));
  CHECK(x.grad()[0] == doctest::Approx(12.0f));
}

TEST_CASE("shared subexpressions receive summed gradients") {
  Tensor x({1}, {2.0f}, true);
  const Tensor y = mul(x, x);
  backward(add(y, y));  // d/dx 2x^2 = 4x
  CHECK(x.grad()[0] == doctest::Approx(8.0f));
}

TEST_CASE("non-finite values are reported with the op name") {
  Tensor x({1}, {-1.0f}, true);
  const Tensor y = log(x);
  try {
    backward(sum(y));
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("log") != std::string::npos);
  }
  CHECK_THROWS_AS(backward(x * 1.0f + Tensor({2})), ShapeError);
}
