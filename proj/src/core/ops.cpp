// SPDX-License-Identifier: Apache-2.0
#include "discond/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "discond/kernels.hpp"

namespace discond {

using detail::Node;

namespace {

/// Gradient buffer of input i, or nullptr when it takes no gradient.
float* input_grad(Node& self, std::size_t i) {
  auto& in = self.inputs[i];
  return (in && in->requires_grad) ? in->grad.data() : nullptr;
}

const std::vector<float>& input_value(const Node& self, std::size_t i) { return self.inputs[i]->value; }

void require_defined(std::string_view op, const Tensor& t) {
  if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined operand");
}

struct BroadcastPlan {
  Shape out;
  bool same = false;
  std::vector<std::uint32_t> index_a;
  std::vector<std::uint32_t> index_b;
};

BroadcastPlan plan_broadcast(std::string_view op, const Shape& a, const Shape& b) {
  BroadcastPlan plan;
  if (a == b) {
    plan.out = a;
    plan.same = true;
    return plan;
  }
  const std::size_t rank = std::max(a.size(), b.size());
  Shape pa(rank, 1), pb(rank, 1);
  std::copy(a.begin(), a.end(), pa.begin() + static_cast<std::ptrdiff_t>(rank - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + static_cast<std::ptrdiff_t>(rank - b.size()));
  plan.out.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    if (pa[i] != pb[i] && pa[i] != 1 && pb[i] != 1) {
      throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " + shape_str(b) +
                       " (axis " + std::to_string(i) + ": " + std::to_string(pa[i]) + " vs " +
                       std::to_string(pb[i]) + ")");
    }
    plan.out[i] = std::max(pa[i], pb[i]);
  }
  // Row-major strides with 0 on stretched axes.
  std::vector<std::size_t> sa(rank, 0), sb(rank, 0);
  std::size_t acc_a = 1, acc_b = 1;
  for (std::size_t i = rank; i-- > 0;) {
    sa[i] = pa[i] == 1 ? 0 : acc_a;
    sb[i] = pb[i] == 1 ? 0 : acc_b;
    acc_a *= pa[i];
    acc_b *= pb[i];
  }
  const std::size_t n = shape_numel(plan.out);
  plan.index_a.resize(n);
  plan.index_b.resize(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t off_a = 0, off_b = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    plan.index_a[flat] = static_cast<std::uint32_t>(off_a);
    plan.index_b[flat] = static_cast<std::uint32_t>(off_b);
    for (std::size_t ax = rank; ax-- > 0;) {
      ++idx[ax];
      off_a += sa[ax];
      off_b += sb[ax];
      if (idx[ax] < plan.out[ax]) break;
      off_a -= sa[ax] * idx[ax];
      off_b -= sb[ax] * idx[ax];
      idx[ax] = 0;
    }
  }
  return plan;
}

// f(a, b) -> y; da(a, b, y) and db(a, b, y) are local partials.
template <class F, class DA, class DB>
Tensor binary_op(std::string_view op, const Tensor& a, const Tensor& b, F f, DA da, DB db) {
  require_defined(op, a);
  require_defined(op, b);
  auto plan = std::make_shared<BroadcastPlan>(plan_broadcast(op, a.shape(), b.shape()));
  const auto av = a.values();
  const auto bv = b.values();
  const std::size_t n = shape_numel(plan->out);
  std::vector<float> out(n);
  if (plan->same) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(av[i], bv[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(av[plan->index_a[i]], bv[plan->index_b[i]]);
  }
  return detail::make_result(op, plan->out, std::move(out), {a, b}, [plan, da, db](Node& self) {
    const auto& x = input_value(self, 0);
    const auto& y = input_value(self, 1);
    float* gx = input_grad(self, 0);
    float* gy = input_grad(self, 1);
    const std::size_t count = self.value.size();
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t ia = plan->same ? i : plan->index_a[i];
      const std::size_t ib = plan->same ? i : plan->index_b[i];
      const float g = self.grad[i];
      if (gx) gx[ia] += g * da(x[ia], y[ib], self.value[i]);
      if (gy) gy[ib] += g * db(x[ia], y[ib], self.value[i]);
    }
  });
}

// f(x) -> y; df(x, y) is the local derivative.
template <class F, class DF>
Tensor unary_op(std::string_view op, const Tensor& x, F f, DF df) {
  require_defined(op, x);
  const auto xv = x.values();
  std::vector<float> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return detail::make_result(op, x.shape(), std::move(out), {x}, [df](Node& self) {
    const auto& in = input_value(self, 0);
    float* gx = input_grad(self, 0);
    if (!gx) return;
    for (std::size_t i = 0; i < in.size(); ++i) gx[i] += self.grad[i] * df(in[i], self.value[i]);
  });
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(std::string_view op, const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                     shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

std::size_t last_extent(std::string_view op, const Tensor& x) {
  if (x.rank() == 0 || x.shape().back() == 0) {
    throw ShapeError(std::string(op) + ": needs a non-empty last axis, got shape " + shape_str(x.shape()));
  }
  return x.shape().back();
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](float x, float y) { return x + y; }, [](float, float, float) { return 1.0f; },
      [](float, float, float) { return 1.0f; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](float x, float y) { return x - y; }, [](float, float, float) { return 1.0f; },
      [](float, float, float) { return -1.0f; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](float x, float y) { return x * y; }, [](float, float y, float) { return y; },
      [](float x, float, float) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      "div", a, b, [](float x, float y) { return x / y; }, [](float, float y, float) { return 1.0f / y; },
      [](float, float y, float out) { return -out / y; });
}

Tensor add_scalar(const Tensor& x, float s) {
  return unary_op("add_scalar", x, [s](float v) { return v + s; }, [](float, float) { return 1.0f; });
}

Tensor mul_scalar(const Tensor& x, float s) {
  return unary_op("mul_scalar", x, [s](float v) { return v * s; }, [s](float, float) { return s; });
}

Tensor neg(const Tensor& x) {
  return unary_op("neg", x, [](float v) { return -v; }, [](float, float) { return -1.0f; });
}

Tensor exp(const Tensor& x) {
  return unary_op("exp", x, [](float v) { return std::exp(v); }, [](float, float y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary_op("log", x, [](float v) { return std::log(v); }, [](float v, float) { return 1.0f / v; });
}

Tensor square(const Tensor& x) {
  return unary_op("square", x, [](float v) { return v * v; }, [](float v, float) { return 2.0f * v; });
}

Tensor abs(const Tensor& x) {
  return unary_op(
      "abs", x, [](float v) { return std::fabs(v); },
      [](float v, float) { return v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f); });
}

Tensor relu(const Tensor& x) {
  require_defined("relu", x);
  std::vector<float> out(x.numel());
  kernels::relu(x.values(), out);
  return detail::make_result("relu", x.shape(), std::move(out), {x}, [](Node& self) {
    float* gx = input_grad(self, 0);
    if (!gx) return;
    const auto& in = input_value(self, 0);
    kernels::relu_backward(in, self.grad, std::span<float>(gx, in.size()));
  });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      "sigmoid", x,
      [](float v) {
        if (v >= 0.0f) return 1.0f / (1.0f + std::exp(-v));
        const float e = std::exp(v);
        return e / (1.0f + e);
      },
      [](float, float y) { return y * (1.0f - y); });
}

Tensor softmax(const Tensor& x) {
  require_defined("softmax", x);
  const std::size_t d = last_extent("softmax", x);
  const std::size_t rows = x.numel() / d;
  const auto xv = x.values();
  std::vector<float> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const float* in = xv.data() + r * d;
    float* o = out.data() + r * d;
    const float mx = *std::max_element(in, in + d);
    double total = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      o[i] = std::exp(in[i] - mx);
      total += o[i];
    }
    const float inv = static_cast<float>(1.0 / total);
    for (std::size_t i = 0; i < d; ++i) o[i] *= inv;
  }
  return detail::make_result("softmax", x.shape(), std::move(out), {x}, [d](Node& self) {
    float* gx = input_grad(self, 0);
    if (!gx) return;
    const std::size_t rows_n = self.value.size() / d;
    for (std::size_t r = 0; r < rows_n; ++r) {
      const float* y = self.value.data() + r * d;
      const float* gy = self.grad.data() + r * d;
      double dot = 0.0;
      for (std::size_t i = 0; i < d; ++i) dot += static_cast<double>(gy[i]) * y[i];
      for (std::size_t i = 0; i < d; ++i) gx[r * d + i] += y[i] * (gy[i] - static_cast<float>(dot));
    }
  });
}

Tensor log_softmax(const Tensor& x) {
  require_defined("log_softmax", x);
  const std::size_t d = last_extent("log_softmax", x);
  const std::size_t rows = x.numel() / d;
  const auto xv = x.values();
  std::vector<float> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const float* in = xv.data() + r * d;
    const float mx = *std::max_element(in, in + d);
    double total = 0.0;
    for (std::size_t i = 0; i < d; ++i) total += std::exp(static_cast<double>(in[i] - mx));
    const float lse = mx + static_cast<float>(std::log(total));
    for (std::size_t i = 0; i < d; ++i) out[r * d + i] = in[i] - lse;
  }
  return detail::make_result("log_softmax", x.shape(), std::move(out), {x}, [d](Node& self) {
    float* gx = input_grad(self, 0);
    if (!gx) return;
    const std::size_t rows_n = self.value.size() / d;
    for (std::size_t r = 0; r < rows_n; ++r) {
      const float* y = self.value.data() + r * d;
      const float* gy = self.grad.data() + r * d;
      double total = 0.0;
      for (std::size_t i = 0; i < d; ++i) total += gy[i];
      for (std::size_t i = 0; i < d; ++i) {
        gx[r * d + i] += gy[i] - std::exp(y[i]) * static_cast<float>(total);
      }
    }
  });
}

Tensor sum(const Tensor& x) {
  require_defined("sum", x);
  const float total = static_cast<float>(kernels::sum(x.values()));
  return detail::make_result("sum", {1}, {total}, {x}, [](Node& self) {
    float* gx = input_grad(self, 0);
    if (!gx) return;
    const float g = self.grad[0];
    const std::size_t n = self.inputs[0]->value.size();
    for (std::size_t i = 0; i < n; ++i) gx[i] += g;
  });
}

Tensor sum(const Tensor& x, std::size_t axis) {
  require_defined("sum", x);
  const AxisSplit s = split_axis("sum", x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (out_shape.empty()) out_shape = {1};
  const auto xv = x.values();
  std::vector<float> out(s.outer * s.inner);
  std::vector<double> acc(s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t e = 0; e < s.extent; ++e) {
      const float* row = xv.data() + (o * s.extent + e) * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) acc[i] += row[i];
    }
    for (std::size_t i = 0; i < s.inner; ++i) out[o * s.inner + i] = static_cast<float>(acc[i]);
  }
  return detail::make_result("sum_axis", std::move(out_shape), std::move(out), {x}, [s](Node& self) {
    float* gx = input_grad(self, 0);
    if (!gx) return;
    for (std::size_t o = 0; o < s.outer; ++o) {
      const float* g = self.grad.data() + o * s.inner;
      for (std::size_t e = 0; e < s.extent; ++e) {
        float* dst = gx + (o * s.extent + e) * s.inner;
        for (std::size_t i = 0; i < s.inner; ++i) dst[i] += g[i];
      }
    }
  });
}

Tensor mean(const Tensor& x) {
  require_defined("mean", x);
  if (x.numel() == 0) throw ShapeError("mean: empty tensor");
  return mul_scalar(sum(x), static_cast<float>(1.0 / static_cast<double>(x.numel())));
}

Tensor mean(const Tensor& x, std::size_t axis) {
  const std::size_t n = x.size(axis);
  if (n == 0) throw ShapeError("mean: empty axis");
  return mul_scalar(sum(x, axis), static_cast<float>(1.0 / static_cast<double>(n)));
}

Tensor reshape(const Tensor& x, Shape shape) {
  require_defined("reshape", x);
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<float> out(x.values().begin(), x.values().end());
  return detail::make_result("reshape", std::move(shape), std::move(out), {x}, [](Node& self) {
    float* gx = input_grad(self, 0);
    if (!gx) return;
    kernels::axpy(1.0f, self.grad, std::span<float>(gx, self.grad.size()));
  });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  for (const Tensor& p : parts) require_defined("concat", p);
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) {
    throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for shape " + shape_str(first));
  }
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> widths;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    if (!ok) {
      throw ShapeError("concat: shape " + shape_str(s) + " does not conform to " + shape_str(first) +
                       " along axis " + std::to_string(axis));
    }
    out_shape[axis] += s[axis];
  }
  const AxisSplit total = split_axis("concat", out_shape, axis);
  for (const Tensor& p : parts) widths.push_back(p.shape()[axis] * total.inner);
  const std::size_t row = total.extent * total.inner;
  std::vector<float> out(shape_numel(out_shape));
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto pv = parts[k].values();
    for (std::size_t o = 0; o < total.outer; ++o) {
      std::copy_n(pv.data() + o * widths[k], widths[k], out.data() + o * row + offset);
    }
    offset += widths[k];
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return detail::make_result("concat", std::move(out_shape), std::move(out), std::move(inputs),
                             [widths, row, outer = total.outer](Node& self) {
                               std::size_t off = 0;
                               for (std::size_t k = 0; k < widths.size(); ++k) {
                                 if (float* g = input_grad(self, k)) {
                                   for (std::size_t o = 0; o < outer; ++o) {
                                     const float* src = self.grad.data() + o * row + off;
                                     float* dst = g + o * widths[k];
                                     for (std::size_t i = 0; i < widths[k]; ++i) dst[i] += src[i];
                                   }
                                 }
                                 off += widths[k];
                               }
                             });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  require_defined("slice", x);
  const AxisSplit s = split_axis("slice", x.shape(), axis);
  if (start + length > s.extent) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") exceeds extent " + std::to_string(s.extent) + " of shape " + shape_str(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  const std::size_t width = length * s.inner;
  const std::size_t row = s.extent * s.inner;
  const std::size_t off = start * s.inner;
  const auto xv = x.values();
  std::vector<float> out(s.outer * width);
  for (std::size_t o = 0; o < s.outer; ++o) std::copy_n(xv.data() + o * row + off, width, out.data() + o * width);
  return detail::make_result("slice", std::move(out_shape), std::move(out), {x},
                             [width, row, off, outer = s.outer](Node& self) {
                               float* gx = input_grad(self, 0);
                               if (!gx) return;
                               for (std::size_t o = 0; o < outer; ++o) {
                                 const float* src = self.grad.data() + o * width;
                                 float* dst = gx + o * row + off;
                                 for (std::size_t i = 0; i < width; ++i) dst[i] += src[i];
                               }
                             });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_defined("linear", x);
  require_defined("linear", weight);
  if (x.rank() != 2 || weight.rank() != 2 || x.shape()[1] != weight.shape()[1]) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                     shape_str(weight.shape()) + " (expected [B, in] and [out, in])");
  }
  const std::size_t batch = x.shape()[0];
  const std::size_t in = x.shape()[1];
  const std::size_t out_features = weight.shape()[0];
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.shape()[0] != out_features)) {
    throw ShapeError("linear: bias " + shape_str(bias.shape()) + " does not match " +
                     std::to_string(out_features) + " output features");
  }
  std::vector<float> out(batch * out_features);
  kernels::gemm(kernels::Trans::no, kernels::Trans::yes, batch, out_features, in, 1.0f, x.values().data(), in,
                weight.values().data(), in, 0.0f, out.data(), out_features);
  if (has_bias) {
    const auto bv = bias.values();
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < out_features; ++j) out[b * out_features + j] += bv[j];
    }
  }
  std::vector<Tensor> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return detail::make_result(
      "linear", {batch, out_features}, std::move(out), std::move(inputs),
      [batch, in, out_features, has_bias](Node& self) {
        const float* gy = self.grad.data();
        if (float* gx = input_grad(self, 0)) {
          kernels::gemm(kernels::Trans::no, kernels::Trans::no, batch, in, out_features, 1.0f, gy, out_features,
                        input_value(self, 1).data(), in, 1.0f, gx, in);
        }
        if (float* gw = input_grad(self, 1)) {
          kernels::gemm(kernels::Trans::yes, kernels::Trans::no, out_features, in, batch, 1.0f, gy, out_features,
                        input_value(self, 0).data(), in, 1.0f, gw, in);
        }
        if (has_bias) {
          if (float* gb = input_grad(self, 2)) {
            for (std::size_t j = 0; j < out_features; ++j) {
              double acc = 0.0;
              for (std::size_t b = 0; b < batch; ++b) acc += gy[b * out_features + j];
              gb[j] += static_cast<float>(acc);
            }
          }
        }
      });
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& target) {
  require_defined("bce_with_logits", logits);
  require_defined("bce_with_logits", target);
  if (logits.shape() != target.shape() || logits.rank() < 1) {
    throw ShapeError("bce_with_logits: logits " + shape_str(logits.shape()) + " vs target " +
                     shape_str(target.shape()));
  }
  const std::size_t batch = logits.shape()[0];
  const std::size_t per = batch == 0 ? 0 : logits.numel() / batch;
  const auto z = logits.values();
  const auto t = target.values();
  std::vector<float> out(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    double acc = 0.0;
    for (std::size_t i = b * per; i < (b + 1) * per; ++i) {
      // max(z,0) - z t + log(1 + exp(-|z|))
      const float zi = z[i];
      acc += static_cast<double>(std::max(zi, 0.0f) - zi * t[i]) + std::log1p(std::exp(-std::fabs(zi)));
    }
    out[b] = static_cast<float>(acc);
  }
  return detail::make_result("bce_with_logits", {batch}, std::move(out), {logits, target}, [per](Node& self) {
    const auto& zv = input_value(self, 0);
    const auto& tv = input_value(self, 1);
    float* gz = input_grad(self, 0);
    float* gt = input_grad(self, 1);
    for (std::size_t i = 0; i < zv.size(); ++i) {
      const float g = self.grad[i / per];
      if (gz) {
        const float zi = zv[i];
        const float s = zi >= 0.0f ? 1.0f / (1.0f + std::exp(-zi)) : std::exp(zi) / (1.0f + std::exp(zi));
        gz[i] += g * (s - tv[i]);
      }
      if (gt) gt[i] -= g * zv[i];
    }
  });
}

Tensor gather_mode(const Tensor& x, std::span<const std::size_t> index) {
  require_defined("gather_mode", x);
  if (x.rank() != 3 || index.size() != x.shape()[0]) {
    throw ShapeError("gather_mode: expected [B, d, P] with B indices, got " + shape_str(x.shape()) + " and " +
                     std::to_string(index.size()) + " indices");
  }
  const std::size_t batch = x.shape()[0], modes = x.shape()[1], width = x.shape()[2];
  std::vector<std::size_t> idx(index.begin(), index.end());
  for (std::size_t j : idx) {
    if (j >= modes) throw ShapeError("gather_mode: index " + std::to_string(j) + " >= modes " + std::to_string(modes));
  }
  const auto xv = x.values();
  std::vector<float> out(batch * width);
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy_n(xv.data() + (b * modes + idx[b]) * width, width, out.data() + b * width);
  }
  return detail::make_result("gather_mode", {batch, width}, std::move(out), {x},
                             [idx, modes, width](Node& self) {
                               float* gx = input_grad(self, 0);
                               if (!gx) return;
                               for (std::size_t b = 0; b < idx.size(); ++b) {
                                 float* dst = gx + (b * modes + idx[b]) * width;
                                 const float* src = self.grad.data() + b * width;
                                 for (std::size_t i = 0; i < width; ++i) dst[i] += src[i];
                               }
                             });
}

Tensor scatter_mode(const Tensor& x, std::span<const std::size_t> index, std::size_t modes) {
  require_defined("scatter_mode", x);
  if (x.rank() != 2 || index.size() != x.shape()[0]) {
    throw ShapeError("scatter_mode: expected [B, P] with B indices, got " + shape_str(x.shape()) + " and " +
                     std::to_string(index.size()) + " indices");
  }
  const std::size_t batch = x.shape()[0], width = x.shape()[1];
  std::vector<std::size_t> idx(index.begin(), index.end());
  for (std::size_t j : idx) {
    if (j >= modes) throw ShapeError("scatter_mode: index " + std::to_string(j) + " >= modes " + std::to_string(modes));
  }
  const auto xv = x.values();
  std::vector<float> out(batch * modes * width, 0.0f);
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy_n(xv.data() + b * width, width, out.data() + (b * modes + idx[b]) * width);
  }
  return detail::make_result("scatter_mode", {batch, modes * width}, std::move(out), {x},
                             [idx, modes, width](Node& self) {
                               float* gx = input_grad(self, 0);
                               if (!gx) return;
                               for (std::size_t b = 0; b < idx.size(); ++b) {
                                 const float* src = self.grad.data() + (b * modes + idx[b]) * width;
                                 float* dst = gx + b * width;
                                 for (std::size_t i = 0; i < width; ++i) dst[i] += src[i];
                               }
                             });
}

Tensor one_hot(std::span<const std::size_t> index, std::size_t classes) {
  std::vector<float> out(index.size() * classes, 0.0f);
  for (std::size_t b = 0; b < index.size(); ++b) {
    if (index[b] >= classes) {
      throw ShapeError("one_hot: index " + std::to_string(index[b]) + " >= classes " + std::to_string(classes));
    }
    out[b * classes + index[b]] = 1.0f;
  }
  return Tensor({index.size(), classes}, std::move(out));
}

std::size_t argmax_lowest(std::span<const float> row) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

std::vector<std::size_t> argmax_rows(const Tensor& x) {
  require_defined("argmax_rows", x);
  const std::size_t d = last_extent("argmax_rows", x);
  const auto xv = x.values();
  std::vector<std::size_t> out(xv.size() / d);
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = argmax_lowest(xv.subspan(r * d, d));
  return out;
}

}  // namespace discond
