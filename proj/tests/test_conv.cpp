// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

using namespace discond;
using test::pattern_tensor;

namespace {

// Direct nested-loop convolution in f64.
std::vector<double> direct_conv(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
                                std::size_t pad) {
  const std::size_t B = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
  const std::size_t O = w.size(0), k = w.size(2);
  const std::size_t Ho = (H + 2 * pad - k) / stride + 1, Wo = (W + 2 * pad - k) / stride + 1;
  std::vector<double> y(B * O * Ho * Wo);
  for (std::size_t n = 0; n < B; ++n)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t oy = 0; oy < Ho; ++oy)
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          double acc = b.values()[o];
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long iy = long(oy * stride + ky) - long(pad), ix = long(ox * stride + kx) - long(pad);
                if (iy < 0 || ix < 0 || iy >= long(H) || ix >= long(W)) continue;
                acc += double(x.values()[((n * C + c) * H + iy) * W + ix]) *
                       w.values()[((o * C + c) * k + ky) * k + kx];
              }
          y[((n * O + o) * Ho + oy) * Wo + ox] = acc;
        }
  return y;
}

// Direct transposed convolution: every input pixel scatters its kernel.
std::vector<double> direct_deconv(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
                                  std::size_t pad) {
  const std::size_t B = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
  const std::size_t O = w.size(1), k = w.size(2);
  const std::size_t Ho = (H - 1) * stride + k - 2 * pad, Wo = (W - 1) * stride + k - 2 * pad;
  std::vector<double> y(B * O * Ho * Wo);
  for (std::size_t n = 0; n < B; ++n)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t i = 0; i < Ho * Wo; ++i) y[(n * O + o) * Ho * Wo + i] = b.values()[o];
  for (std::size_t n = 0; n < B; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t iy = 0; iy < H; ++iy)
        for (std::size_t ix = 0; ix < W; ++ix)
          for (std::size_t o = 0; o < O; ++o)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long oy = long(iy * stride + ky) - long(pad), ox = long(ix * stride + kx) - long(pad);
                if (oy < 0 || ox < 0 || oy >= long(Ho) || ox >= long(Wo)) continue;
                y[((n * O + o) * Ho + oy) * Wo + ox] += double(x.values()[((n * C + c) * H + iy) * W + ix]) *
                                                        w.values()[((c * O + o) * k + ky) * k + kx];
              }
  return y;
}

}  // namespace

TEST_CASE("conv2d matches the oracle values and gradients") {
  Tensor x = pattern_tensor({2, 3, 7, 7}, 0.37, 0.1, 1.0, true);
  Tensor w = pattern_tensor({4, 3, 4, 4}, 0.23, 0.7, 0.5, true);
  Tensor b = pattern_tensor({4}, 1.1, 0.2, 1.0, true);
  const Tensor y = conv2d(x, w, b, 2, 1);
  CHECK(y.shape() == Shape{2, 4, 3, 3});
  CHECK(test::normwise_error(y.values(), test::oracle("conv2d.y")) < 1e-6);
  backward(sum(mul(y, pattern_tensor(y.shape(), 0.17, 0.4))));
  CHECK(test::normwise_error(x.grad(), test::oracle("conv2d.gx")) < 1e-6);
  CHECK(test::normwise_error(w.grad(), test::oracle("conv2d.gw")) < 1e-6);
  CHECK(test::normwise_error(b.grad(), test::oracle("conv2d.gb")) < 1e-6);
}

TEST_CASE("conv_transpose2d matches the oracle values and gradients") {
  Tensor x = pattern_tensor({2, 3, 4, 4}, 0.31, 0.5, 1.0, true);
  Tensor w = pattern_tensor({3, 2, 4, 4}, 0.19, 0.9, 0.5, true);
  Tensor b = pattern_tensor({2}, 0.8, 0.3, 1.0, true);
  const Tensor y = conv_transpose2d(x, w, b, 2, 1);
  CHECK(y.shape() == Shape{2, 2, 8, 8});
  CHECK(test::normwise_error(y.values(), test::oracle("deconv.y")) < 1e-6);
  backward(sum(mul(y, pattern_tensor(y.shape(), 0.13, 0.6))));
  CHECK(test::normwise_error(x.grad(), test::oracle("deconv.gx")) < 1e-6);
  CHECK(test::normwise_error(w.grad(), test::oracle("deconv.gw")) < 1e-6);
  CHECK(test::normwise_error(b.grad(), test::oracle("deconv.gb")) < 1e-6);
}

TEST_CASE("conv layers agree with direct loops across geometries") {
  struct Case {
    std::size_t batch, in, out, extent, kernel, stride, pad;
  };
  for (const Case& c : {Case{1, 1, 2, 5, 3, 1, 0}, Case{3, 2, 3, 9, 3, 2, 1}, Case{2, 4, 5, 8, 4, 2, 1},
                        Case{1, 3, 2, 6, 2, 2, 0}, Case{2, 2, 2, 5, 5, 1, 2}}) {
    const Tensor x = pattern_tensor({c.batch, c.in, c.extent, c.extent}, 0.21, 0.3);
    const Tensor w = pattern_tensor({c.out, c.in, c.kernel, c.kernel}, 0.43, 0.6);
    const Tensor b = pattern_tensor({c.out}, 0.9, 0.2);
    INFO("conv in=" << c.in << " extent=" << c.extent << " k=" << c.kernel << " s=" << c.stride);
    CHECK(test::normwise_error(conv2d(x, w, b, c.stride, c.pad).values(), direct_conv(x, w, b, c.stride, c.pad)) <
          1e-6);
    const Tensor wt = pattern_tensor({c.in, c.out, c.kernel, c.kernel}, 0.43, 0.6);
    if ((c.extent - 1) * c.stride + c.kernel > 2 * c.pad) {
      CHECK(test::normwise_error(conv_transpose2d(x, wt, b, c.stride, c.pad).values(),
                                 direct_deconv(x, wt, b, c.stride, c.pad)) < 1e-6);
    }
  }
}

TEST_CASE("conv gradients agree with finite differences") {
  Tensor x = pattern_tensor({2, 2, 6, 6}, 0.27, 0.1, 1.0, true);
  Tensor w = pattern_tensor({3, 2, 4, 4}, 0.33, 0.4, 0.5, true);
  Tensor b = pattern_tensor({3}, 0.5, 0.5, 1.0, true);
  const Tensor r = pattern_tensor({2, 3, 3, 3}, 0.71, 0.2);
  CHECK(test::gradient_error({x, w, b}, [&] { return sum(mul(conv2d(x, w, b, 2, 1), r)); }) < 5e-3);
  Tensor wt = pattern_tensor({2, 3, 4, 4}, 0.33, 0.4, 0.5, true);
  const Tensor rt = pattern_tensor({2, 3, 12, 12}, 0.71, 0.2);
  CHECK(test::gradient_error({x, wt, b}, [&] { return sum(mul(conv_transpose2d(x, wt, b, 2, 1), rt)); }) < 5e-3);
}

TEST_CASE("conv shape errors name the op and extents") {
  const Tensor x({1, 2, 8, 8});
  try {
    conv2d(x, Tensor({4, 3, 4, 4}), Tensor({4}), 2, 1);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("conv2d") != std::string::npos);
  }
  CHECK_THROWS_AS(conv2d(Tensor({2, 8, 8}), Tensor({4, 2, 4, 4}), Tensor({4}), 2, 1), ShapeError);
  CHECK_THROWS_AS(conv_transpose2d(x, Tensor({3, 4, 4, 4}), Tensor({4}), 2, 1), ShapeError);
  CHECK_THROWS_AS(conv2d(Tensor({1, 1, 2, 2}), Tensor({1, 1, 5, 5}), Tensor({1}), 1, 0), ShapeError);
}
