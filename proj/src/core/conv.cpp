// SPDX-License-Identifier: Apache-2.0
//
// Convolutions lowered to GEMM. Patches of the whole batch are unrolled into
// one column matrix [C*k*k, B*Ho*Wo] so each layer costs a single GEMM per
// pass.
#include <algorithm>
#include <string>

#include "discond/kernels.hpp"
#include "discond/ops.hpp"

namespace discond {

using detail::Node;

namespace {

struct Geometry {
  std::size_t batch, channels, height, width;  // image side
  std::size_t kernel, stride, padding;
  std::size_t out_h, out_w;                    // patch grid side
  std::size_t rows() const { return channels * kernel * kernel; }
  std::size_t cols() const { return batch * out_h * out_w; }
};

// Output columns [lo, hi) whose input column ox*stride + k - padding is inside
// [0, extent).
struct Span {
  std::size_t lo, hi;
};

Span valid_span(std::size_t k, std::size_t stride, std::size_t padding, std::size_t extent, std::size_t out) {
  std::size_t lo = 0;
  if (padding > k) lo = (padding - k + stride - 1) / stride;
  if (extent + padding <= k) return {0, 0};
  const std::size_t hi = std::min(out, (extent + padding - k - 1) / stride + 1);
  return {std::min(lo, hi), hi};
}

void im2col(const Geometry& g, const float* image, float* col) {
  const std::size_t grid = g.out_h * g.out_w;
  const std::size_t ncols = g.cols();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      const Span ys = valid_span(ky, g.stride, g.padding, g.height, g.out_h);
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const Span xs = valid_span(kx, g.stride, g.padding, g.width, g.out_w);
        float* row = col + ((c * g.kernel + ky) * g.kernel + kx) * ncols;
        for (std::size_t b = 0; b < g.batch; ++b) {
          const float* plane = image + (b * g.channels + c) * g.height * g.width;
          float* dst = row + b * grid;
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            float* out = dst + oy * g.out_w;
            if (oy < ys.lo || oy >= ys.hi) {
              std::fill_n(out, g.out_w, 0.0f);
              continue;
            }
            const float* src = plane + (oy * g.stride + ky - g.padding) * g.width;
            std::fill(out, out + xs.lo, 0.0f);
            for (std::size_t ox = xs.lo; ox < xs.hi; ++ox) out[ox] = src[ox * g.stride + kx - g.padding];
            std::fill(out + xs.hi, out + g.out_w, 0.0f);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds columns back into the image.
void col2im(const Geometry& g, const float* col, float* image) {
  const std::size_t grid = g.out_h * g.out_w;
  const std::size_t ncols = g.cols();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      const Span ys = valid_span(ky, g.stride, g.padding, g.height, g.out_h);
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const Span xs = valid_span(kx, g.stride, g.padding, g.width, g.out_w);
        const float* row = col + ((c * g.kernel + ky) * g.kernel + kx) * ncols;
        for (std::size_t b = 0; b < g.batch; ++b) {
          float* plane = image + (b * g.channels + c) * g.height * g.width;
          const float* src = row + b * grid;
          for (std::size_t oy = ys.lo; oy < ys.hi; ++oy) {
            float* dst = plane + (oy * g.stride + ky - g.padding) * g.width;
            const float* in = src + oy * g.out_w;
            for (std::size_t ox = xs.lo; ox < xs.hi; ++ox) dst[ox * g.stride + kx - g.padding] += in[ox];
          }
        }
      }
    }
  }
}

// [B, C, HW] <-> [C, B*HW]
void batch_to_channel_major(const float* src, std::size_t batch, std::size_t channels, std::size_t plane,
                            float* dst) {
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      std::copy_n(src + (b * channels + c) * plane, plane, dst + (c * batch + b) * plane);
    }
  }
}

void channel_major_to_batch(const float* src, std::size_t batch, std::size_t channels, std::size_t plane,
                            float* dst, bool accumulate) {
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      const float* s = src + (c * batch + b) * plane;
      float* d = dst + (b * channels + c) * plane;
      if (accumulate) {
        for (std::size_t i = 0; i < plane; ++i) d[i] += s[i];
      } else {
        std::copy_n(s, plane, d);
      }
    }
  }
}

void add_channel_bias(std::span<const float> bias, std::size_t batch, std::size_t plane, float* out) {
  const std::size_t channels = bias.size();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      float* p = out + (b * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] += bias[c];
    }
  }
}

void accumulate_channel_bias_grad(const float* gout, std::size_t batch, std::size_t channels, std::size_t plane,
                                  float* gb) {
  for (std::size_t c = 0; c < channels; ++c) {
    double acc = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const float* p = gout + (b * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
    }
    gb[c] += static_cast<float>(acc);
  }
}

void check_conv_operands(std::string_view op, const Tensor& x, const Tensor& weight, const Tensor& bias,
                         std::size_t weight_in_axis, std::size_t weight_out_axis) {
  if (!x.defined() || !weight.defined()) throw std::invalid_argument(std::string(op) + ": undefined operand");
  if (x.rank() != 4 || weight.rank() != 4 || weight.shape()[2] != weight.shape()[3]) {
    throw ShapeError(std::string(op) + ": expected input [B, C, H, W] and square kernel, got " +
                     shape_str(x.shape()) + " and " + shape_str(weight.shape()));
  }
  if (x.shape()[1] != weight.shape()[weight_in_axis]) {
    throw ShapeError(std::string(op) + ": input channels of " + shape_str(x.shape()) + " do not match weight " +
                     shape_str(weight.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.shape()[0] != weight.shape()[weight_out_axis])) {
    throw ShapeError(std::string(op) + ": bias " + shape_str(bias.shape()) + " does not match weight " +
                     shape_str(weight.shape()));
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride, std::size_t padding) {
  check_conv_operands("conv2d", x, weight, bias, 1, 0);
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  const Shape& xs = x.shape();
  const std::size_t k = weight.shape()[2];
  const std::size_t out_ch = weight.shape()[0];
  if (xs[2] + 2 * padding < k || xs[3] + 2 * padding < k) {
    throw ShapeError("conv2d: kernel " + std::to_string(k) + " larger than padded input " + shape_str(xs));
  }
  Geometry g{xs[0], xs[1], xs[2], xs[3], k, stride, padding,
             (xs[2] + 2 * padding - k) / stride + 1, (xs[3] + 2 * padding - k) / stride + 1};
  const std::size_t plane = g.out_h * g.out_w;
  auto col = std::make_shared<std::vector<float>>(g.rows() * g.cols());
  im2col(g, x.values().data(), col->data());
  std::vector<float> mat(out_ch * g.cols());
  kernels::gemm(kernels::Trans::no, kernels::Trans::no, out_ch, g.cols(), g.rows(), 1.0f, weight.values().data(),
                g.rows(), col->data(), g.cols(), 0.0f, mat.data(), g.cols());
  std::vector<float> out(mat.size());
  channel_major_to_batch(mat.data(), g.batch, out_ch, plane, out.data(), false);
  if (bias.defined()) add_channel_bias(bias.values(), g.batch, plane, out.data());

  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  const bool has_bias = bias.defined();
  return detail::make_result(
      "conv2d", {g.batch, out_ch, g.out_h, g.out_w}, std::move(out), std::move(inputs),
      [g, col, out_ch, plane, has_bias](Node& self) {
        std::vector<float> gmat(out_ch * g.cols());
        batch_to_channel_major(self.grad.data(), g.batch, out_ch, plane, gmat.data());
        const auto& w = self.inputs[1]->value;
        if (self.inputs[1]->requires_grad) {
          kernels::gemm(kernels::Trans::no, kernels::Trans::yes, out_ch, g.rows(), g.cols(), 1.0f, gmat.data(),
                        g.cols(), col->data(), g.cols(), 1.0f, self.inputs[1]->grad.data(), g.rows());
        }
        if (self.inputs[0]->requires_grad) {
          std::vector<float> gcol(g.rows() * g.cols());
          kernels::gemm(kernels::Trans::yes, kernels::Trans::no, g.rows(), g.cols(), out_ch, 1.0f, w.data(),
                        g.rows(), gmat.data(), g.cols(), 0.0f, gcol.data(), g.cols());
          col2im(g, gcol.data(), self.inputs[0]->grad.data());
        }
        if (has_bias && self.inputs[2]->requires_grad) {
          accumulate_channel_bias_grad(self.grad.data(), g.batch, out_ch, plane, self.inputs[2]->grad.data());
        }
      });
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
                        std::size_t padding) {
  check_conv_operands("conv_transpose2d", x, weight, bias, 0, 1);
  if (stride == 0) throw ShapeError("conv_transpose2d: stride must be positive");
  const Shape& xs = x.shape();
  const std::size_t in_ch = xs[1];
  const std::size_t out_ch = weight.shape()[1];
  const std::size_t k = weight.shape()[2];
  if ((xs[2] - 1) * stride + k < 2 * padding + 1 || (xs[3] - 1) * stride + k < 2 * padding + 1) {
    throw ShapeError("conv_transpose2d: padding " + std::to_string(padding) + " leaves an empty output for " +
                     shape_str(xs));
  }
  const std::size_t out_h = (xs[2] - 1) * stride + k - 2 * padding;
  const std::size_t out_w = (xs[3] - 1) * stride + k - 2 * padding;
  // The adjoint of a conv from [O, out_h, out_w] onto the [Cin, H, W] grid.
  Geometry g{xs[0], out_ch, out_h, out_w, k, stride, padding, xs[2], xs[3]};
  const std::size_t in_plane = xs[2] * xs[3];
  const std::size_t out_plane = out_h * out_w;

  auto xm = std::make_shared<std::vector<float>>(in_ch * g.cols());
  batch_to_channel_major(x.values().data(), g.batch, in_ch, in_plane, xm->data());
  std::vector<float> col(g.rows() * g.cols());
  kernels::gemm(kernels::Trans::yes, kernels::Trans::no, g.rows(), g.cols(), in_ch, 1.0f, weight.values().data(),
                g.rows(), xm->data(), g.cols(), 0.0f, col.data(), g.cols());
  std::vector<float> out(g.batch * out_ch * out_plane, 0.0f);
  col2im(g, col.data(), out.data());
  if (bias.defined()) add_channel_bias(bias.values(), g.batch, out_plane, out.data());

  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  const bool has_bias = bias.defined();
  return detail::make_result(
      "conv_transpose2d", {g.batch, out_ch, out_h, out_w}, std::move(out), std::move(inputs),
      [g, xm, in_ch, in_plane, out_plane, has_bias](Node& self) {
        std::vector<float> gcol(g.rows() * g.cols());
        im2col(g, self.grad.data(), gcol.data());
        const auto& w = self.inputs[1]->value;
        if (self.inputs[0]->requires_grad) {
          std::vector<float> gxm(in_ch * g.cols());
          kernels::gemm(kernels::Trans::no, kernels::Trans::no, in_ch, g.cols(), g.rows(), 1.0f, w.data(),
                        g.rows(), gcol.data(), g.cols(), 0.0f, gxm.data(), g.cols());
          channel_major_to_batch(gxm.data(), g.batch, in_ch, in_plane, self.inputs[0]->grad.data(), true);
        }
        if (self.inputs[1]->requires_grad) {
          kernels::gemm(kernels::Trans::no, kernels::Trans::yes, in_ch, g.rows(), g.cols(), 1.0f, xm->data(),
                        g.cols(), gcol.data(), g.cols(), 1.0f, self.inputs[1]->grad.data(), g.rows());
        }
        if (has_bias && self.inputs[2]->requires_grad) {
          accumulate_channel_bias_grad(self.grad.data(), g.batch, g.channels, out_plane,
                                       self.inputs[2]->grad.data());
        }
      });
}

}  // namespace discond
