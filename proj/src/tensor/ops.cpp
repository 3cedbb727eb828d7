#include "immf/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "immf/common/error.hpp"

namespace immf::tensor {

namespace {

template <typename T>
using NodeT = detail::Node<T>;

template <typename T>
using BackwardFn = std::function<void(NodeT<T>&)>;

template <typename T>
void check_finite(std::string_view op, const Shape& shape, const std::vector<T>& value) {
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (!std::isfinite(value[i])) {
      throw NonFiniteError(std::string(op), "element " + std::to_string(i) + " of " +
                                                shape_str(shape) + " is " +
                                                std::to_string(static_cast<double>(value[i])));
    }
  }
}

template <typename T>
Tensor<T> finish(std::string_view op, Shape shape, std::vector<T> value,
                 std::initializer_list<const Tensor<T>*> inputs, BackwardFn<T> fn) {
  check_finite(op, shape, value);
  auto node = std::make_shared<NodeT<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  bool needs_grad = false;
  for (const auto* in : inputs) needs_grad = needs_grad || in->requires_grad();
  if (needs_grad) {
    node->requires_grad = true;
    node->leaf = false;
    for (const auto* in : inputs) node->inputs.push_back(in->node());
    node->backward = std::move(fn);
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
Tensor<T> finish_many(std::string_view op, Shape shape, std::vector<T> value,
                      const std::vector<Tensor<T>>& inputs, BackwardFn<T> fn) {
  check_finite(op, shape, value);
  auto node = std::make_shared<NodeT<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  bool needs_grad = false;
  for (const auto& in : inputs) needs_grad = needs_grad || in.requires_grad();
  if (needs_grad) {
    node->requires_grad = true;
    node->leaf = false;
    for (const auto& in : inputs) node->inputs.push_back(in.node());
    node->backward = std::move(fn);
  }
  return Tensor<T>(std::move(node));
}

// Gradient buffer of input i, or nullptr if that input does not need one.
template <typename T>
T* grad_of(NodeT<T>& self, std::size_t i) {
  auto& in = *self.inputs[i];
  return in.requires_grad ? in.ensure_grad().data() : nullptr;
}

void require(bool cond, std::string_view op, const std::string& what) {
  if (!cond) throw ShapeError(std::string(op) + ": " + what);
}

// C[m,n] += A[m,k] * B[k,n]
template <typename T>
void gemm_acc(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    T* __restrict crow = c + i * n;
    const T* arow = a + i * k;
    std::size_t p = 0;
    // Four rows of B per pass keep C's row in registers for longer.
    for (; p + 4 <= k; p += 4) {
      const T a0 = arow[p], a1 = arow[p + 1], a2 = arow[p + 2], a3 = arow[p + 3];
      if (a0 == T(0) && a1 == T(0) && a2 == T(0) && a3 == T(0)) continue;
      const T* __restrict b0 = b + p * n;
      const T* __restrict b1 = b0 + n;
      const T* __restrict b2 = b1 + n;
      const T* __restrict b3 = b2 + n;
      for (std::size_t j = 0; j < n; ++j)
        crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
    }
    for (; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      const T* __restrict brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[k,n] += A[m,k]^T * B[m,n]
template <typename T>
void gemm_tn_acc(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const T* a0 = a + i * k;
    const T* __restrict b0 = b + i * n;
    const T* __restrict b1 = b0 + n;
    const T* __restrict b2 = b1 + n;
    const T* __restrict b3 = b2 + n;
    for (std::size_t p = 0; p < k; ++p) {
      const T x0 = a0[p], x1 = a0[k + p], x2 = a0[2 * k + p], x3 = a0[3 * k + p];
      if (x0 == T(0) && x1 == T(0) && x2 == T(0) && x3 == T(0)) continue;
      T* __restrict crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j)
        crow[j] += x0 * b0[j] + x1 * b1[j] + x2 * b2[j] + x3 * b3[j];
    }
  }
  for (; i < m; ++i) {
    const T* arow = a + i * k;
    const T* __restrict brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      T* __restrict crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
std::vector<T> transposed(std::size_t rows, std::size_t cols, const T* src) {
  std::vector<T> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = src[i * cols + j];
  return out;
}

template <typename T>
T gelu_value(T x) {
  const T c = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
  const T inner = c * (x + T(0.044715) * x * x * x);
  return T(0.5) * x * (T(1) + std::tanh(inner));
}

template <typename T>
T gelu_derivative(T x) {
  const T c = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
  const T inner = c * (x + T(0.044715) * x * x * x);
  const T t = std::tanh(inner);
  const T dinner = c * (T(1) + T(3) * T(0.044715) * x * x);
  return T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * dinner;
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul", "expects 2-D operands");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  require(b.dim(0) == k, "matmul",
          "inner dimensions differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<T> out(m * n, T(0));
  gemm_acc(m, n, k, a.data().data(), b.data().data(), out.data());
  return finish<T>("matmul", {m, n}, std::move(out), {&a, &b}, [m, n, k](NodeT<T>& self) {
    const T* av = self.inputs[0]->value.data();
    const T* bv = self.inputs[1]->value.data();
    const T* g = self.grad.data();
    if (T* ga = grad_of(self, 0)) {
      const auto bt = transposed(k, n, bv);
      gemm_acc(m, k, n, g, bt.data(), ga);
    }
    if (T* gb = grad_of(self, 1)) gemm_tn_acc(m, n, k, av, g, gb);
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require(a.rank() == 2, "transpose", "expects a 2-D operand");
  const std::size_t r = a.dim(0), c = a.dim(1);
  return finish<T>("transpose", {c, r}, transposed(r, c, a.data().data()), {&a},
                   [r, c](NodeT<T>& self) {
                     T* ga = grad_of(self, 0);
                     for (std::size_t i = 0; i < r; ++i)
                       for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += self.grad[j * r + i];
                   });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "add",
          "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return finish<T>("add", a.shape(), std::move(out), {&a, &b}, [](NodeT<T>& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (T* g = grad_of(self, k))
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "sub",
          "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return finish<T>("sub", a.shape(), std::move(out), {&a, &b}, [](NodeT<T>& self) {
    if (T* g = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    if (T* g = grad_of(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "mul",
          "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return finish<T>("mul", a.shape(), std::move(out), {&a, &b}, [](NodeT<T>& self) {
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    if (T* g = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bv[i];
    if (T* g = grad_of(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * av[i];
  });
}

template <typename T>
Tensor<T> affine_scalar(const Tensor<T>& x, T alpha, T beta) {
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * x.data()[i] + beta;
  return finish<T>("affine_scalar", x.shape(), std::move(out), {&x}, [alpha](NodeT<T>& self) {
    T* g = grad_of(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += alpha * self.grad[i];
  });
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  require(x.rank() >= 1, "add_bias", "scalar input");
  const std::size_t d = x.shape().back();
  require(bias.size() == d && bias.shape().back() == d, "add_bias",
          "bias " + shape_str(bias.shape()) + " does not match last axis of " +
              shape_str(x.shape()));
  std::vector<T> out(x.data().begin(), x.data().end());
  const T* b = bias.data().data();
  for (std::size_t i = 0; i < out.size(); i += d)
    for (std::size_t j = 0; j < d; ++j) out[i + j] += b[j];
  return finish<T>("add_bias", x.shape(), std::move(out), {&x, &bias}, [d](NodeT<T>& self) {
    if (T* g = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    if (T* g = grad_of(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); i += d)
        for (std::size_t j = 0; j < d; ++j) g[j] += self.grad[i + j];
  });
}

template <typename T>
Tensor<T> scale_rows(const Tensor<T>& x, const Tensor<T>& s) {
  require(x.rank() == 2, "scale_rows", "expects x[n, d]");
  const std::size_t n = x.dim(0), d = x.dim(1);
  require(s.size() == n, "scale_rows", "expects one scale per row");
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = x.data()[i * d + j] * s.data()[i];
  return finish<T>("scale_rows", x.shape(), std::move(out), {&x, &s}, [n, d](NodeT<T>& self) {
    const auto& xv = self.inputs[0]->value;
    const auto& sv = self.inputs[1]->value;
    if (T* g = grad_of(self, 0))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) g[i * d + j] += self.grad[i * d + j] * sv[i];
    if (T* g = grad_of(self, 1))
      for (std::size_t i = 0; i < n; ++i) {
        T acc = T(0);
        for (std::size_t j = 0; j < d; ++j) acc += self.grad[i * d + j] * xv[i * d + j];
        g[i] += acc;
      }
  });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = gelu_value(x.data()[i]);
  return finish<T>("gelu", x.shape(), std::move(out), {&x}, [](NodeT<T>& self) {
    const auto& xv = self.inputs[0]->value;
    T* g = grad_of(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * gelu_derivative(xv[i]);
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-x.data()[i]));
  return finish<T>("sigmoid", x.shape(), std::move(out), {&x}, [](NodeT<T>& self) {
    T* g = grad_of(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T y = self.value[i];
      g[i] += self.grad[i] * y * (T(1) - y);
    }
  });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  require(axis < x.rank(), "softmax", "axis out of range");
  const auto s = split_axis(x.shape(), axis);
  std::vector<T> out(x.size());
  const T* xv = x.data().data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.n * s.inner + in;
      T mx = xv[base];
      for (std::size_t k = 1; k < s.n; ++k) mx = std::max(mx, xv[base + k * s.inner]);
      T total = T(0);
      for (std::size_t k = 0; k < s.n; ++k) {
        const T e = std::exp(xv[base + k * s.inner] - mx);
        out[base + k * s.inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < s.n; ++k) out[base + k * s.inner] /= total;
    }
  }
  return finish<T>("softmax", x.shape(), std::move(out), {&x}, [s](NodeT<T>& self) {
    T* g = grad_of(self, 0);
    const auto& y = self.value;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.n * s.inner + in;
        T dot = T(0);
        for (std::size_t k = 0; k < s.n; ++k) {
          const std::size_t i = base + k * s.inner;
          dot += self.grad[i] * y[i];
        }
        for (std::size_t k = 0; k < s.n; ++k) {
          const std::size_t i = base + k * s.inner;
          g[i] += y[i] * (self.grad[i] - dot);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  require(x.rank() >= 1, "layer_norm", "scalar input");
  const std::size_t d = x.shape().back();
  require(gain.size() == d && bias.size() == d, "layer_norm", "gain/bias must match last axis");
  const std::size_t rows = x.size() / d;
  std::vector<T> xhat(x.size());
  std::vector<T> inv_std(rows);
  std::vector<T> out(x.size());
  const T* xv = x.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv + r * d;
    T mean = T(0);
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<T>(d);
    T var = T(0);
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<T>(d);
    inv_std[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (row[j] - mean) * inv_std[r];
      out[r * d + j] = xhat[r * d + j] * gain.data()[j] + bias.data()[j];
    }
  }
  return finish<T>(
      "layer_norm", x.shape(), std::move(out), {&x, &gain, &bias},
      [d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](NodeT<T>& self) {
        const auto& gv = self.inputs[1]->value;
        const T* gy = self.grad.data();
        if (T* gx = grad_of(self, 0)) {
          std::vector<T> dxhat(d);
          for (std::size_t r = 0; r < rows; ++r) {
            T mean_d = T(0), mean_dx = T(0);
            for (std::size_t j = 0; j < d; ++j) {
              dxhat[j] = gy[r * d + j] * gv[j];
              mean_d += dxhat[j];
              mean_dx += dxhat[j] * xhat[r * d + j];
            }
            mean_d /= static_cast<T>(d);
            mean_dx /= static_cast<T>(d);
            for (std::size_t j = 0; j < d; ++j)
              gx[r * d + j] += inv_std[r] * (dxhat[j] - mean_d - xhat[r * d + j] * mean_dx);
          }
        }
        if (T* gg = grad_of(self, 1))
          for (std::size_t i = 0; i < rows * d; ++i) gg[i % d] += gy[i] * xhat[i];
        if (T* gb = grad_of(self, 2))
          for (std::size_t i = 0; i < rows * d; ++i) gb[i % d] += gy[i];
      });
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding) {
  require(x.rank() == 3 && k.rank() == 4, "conv2d", "expects x[c,h,w] and k[o,c,kh,kw]");
  require(stride >= 1, "conv2d", "stride must be positive");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t o = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  require(k.dim(1) == c, "conv2d",
          "channel mismatch " + shape_str(x.shape()) + " vs " + shape_str(k.shape()));
  require(kh <= h + 2 * padding && kw <= w + 2 * padding, "conv2d", "kernel larger than input");
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.size() == o, "conv2d", "bias must have one entry per output channel");
  const std::size_t oh = (h + 2 * padding - kh) / stride + 1;
  const std::size_t ow = (w + 2 * padding - kw) / stride + 1;
  const std::size_t ckk = c * kh * kw, ohw = oh * ow;

  std::vector<T> cols(ckk * ohw, T(0));
  const T* xv = x.data().data();
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t u = 0; u < kh; ++u)
      for (std::size_t v = 0; v < kw; ++v) {
        T* dst = cols.data() + ((ci * kh + u) * kw + v) * ohw;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + u) -
                                    static_cast<std::ptrdiff_t>(padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + v) -
                                      static_cast<std::ptrdiff_t>(padding);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            dst[oy * ow + ox] = xv[(ci * h + iy) * w + ix];
          }
        }
      }

  std::vector<T> out(o * ohw, T(0));
  gemm_acc(o, ohw, ckk, k.data().data(), cols.data(), out.data());
  if (has_bias)
    for (std::size_t oc = 0; oc < o; ++oc)
      for (std::size_t p = 0; p < ohw; ++p) out[oc * ohw + p] += bias.data()[oc];

  auto bwd = [=, cols = std::move(cols)](NodeT<T>& self) {
    const T* gy = self.grad.data();
    const T* kv = self.inputs[1]->value.data();
    if (T* gk = grad_of(self, 1)) {
      const auto cols_t = transposed(ckk, ohw, cols.data());
      gemm_acc(o, ckk, ohw, gy, cols_t.data(), gk);
    }
    if (has_bias) {
      if (T* gb = grad_of(self, 2))
        for (std::size_t oc = 0; oc < o; ++oc)
          for (std::size_t p = 0; p < ohw; ++p) gb[oc] += gy[oc * ohw + p];
    }
    if (T* gx = grad_of(self, 0)) {
      std::vector<T> dcols(ckk * ohw, T(0));
      gemm_tn_acc(o, ohw, ckk, kv, gy, dcols.data());
      for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t u = 0; u < kh; ++u)
          for (std::size_t v = 0; v < kw; ++v) {
            const T* src = dcols.data() + ((ci * kh + u) * kw + v) * ohw;
            for (std::size_t oy = 0; oy < oh; ++oy) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + u) -
                                        static_cast<std::ptrdiff_t>(padding);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t ox = 0; ox < ow; ++ox) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + v) -
                                          static_cast<std::ptrdiff_t>(padding);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                gx[(ci * h + iy) * w + ix] += src[oy * ow + ox];
              }
            }
          }
    }
  };
  if (has_bias) return finish<T>("conv2d", {o, oh, ow}, std::move(out), {&x, &k, &bias}, bwd);
  return finish<T>("conv2d", {o, oh, ow}, std::move(out), {&x, &k}, bwd);
}

template <typename T>
Tensor<T> segment_max(const Tensor<T>& values, std::span<const std::size_t> segment_ids,
                      std::size_t num_segments) {
  require(values.rank() == 2, "segment_max", "expects values[n, d]");
  const std::size_t n = values.dim(0), d = values.dim(1);
  require(segment_ids.size() == n, "segment_max", "one segment id per row required");
  require(num_segments >= 1, "segment_max", "need at least one segment");
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> arg(num_segments * d, kNone);
  const T* v = values.data().data();
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t s = segment_ids[r];
    require(s < num_segments, "segment_max", "segment id out of range");
    for (std::size_t j = 0; j < d; ++j) {
      std::size_t& a = arg[s * d + j];
      if (a == kNone || v[r * d + j] > v[a * d + j]) a = r;
    }
  }
  std::vector<T> out(num_segments * d, T(0));
  for (std::size_t i = 0; i < out.size(); ++i)
    if (arg[i] != kNone) out[i] = v[arg[i] * d + (i % d)];
  return finish<T>("segment_max", {num_segments, d}, std::move(out), {&values},
                   [d, arg = std::move(arg)](NodeT<T>& self) {
                     T* g = grad_of(self, 0);
                     for (std::size_t i = 0; i < arg.size(); ++i)
                       if (arg[i] != kNone) g[arg[i] * d + (i % d)] += self.grad[i];
                   });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  require(numel(shape) == x.size(), "reshape",
          "cannot reshape " + shape_str(x.shape()) + " into " + shape_str(shape));
  std::vector<T> out(x.data().begin(), x.data().end());
  return finish<T>("reshape", std::move(shape), std::move(out), {&x}, [](NodeT<T>& self) {
    T* g = grad_of(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  require(!parts.empty(), "concat", "no inputs");
  const Shape& first = parts.front().shape();
  require(axis < first.size(), "concat", "axis out of range");
  Shape shape = first;
  shape[axis] = 0;
  for (const auto& p : parts) {
    require(p.rank() == first.size(), "concat", "rank mismatch");
    for (std::size_t i = 0; i < first.size(); ++i)
      if (i != axis)
        require(p.dim(i) == first[i], "concat",
                "shape mismatch " + shape_str(p.shape()) + " vs " + shape_str(first));
    shape[axis] += p.dim(axis);
  }
  const auto s = split_axis(shape, axis);
  std::vector<T> out(numel(shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t chunk = p.dim(axis) * s.inner;
    for (std::size_t o = 0; o < s.outer; ++o)
      std::copy_n(p.data().data() + o * chunk, chunk,
                  out.data() + o * s.n * s.inner + offset * s.inner);
    offset += p.dim(axis);
  }
  std::vector<std::size_t> widths;
  for (const auto& p : parts) widths.push_back(p.dim(axis));
  return finish_many<T>("concat", shape, std::move(out), parts,
                        [s, offsets, widths](NodeT<T>& self) {
                          for (std::size_t k = 0; k < widths.size(); ++k) {
                            T* g = grad_of(self, k);
                            if (!g) continue;
                            const std::size_t chunk = widths[k] * s.inner;
                            for (std::size_t o = 0; o < s.outer; ++o) {
                              const T* src = self.grad.data() + o * s.n * s.inner +
                                             offsets[k] * s.inner;
                              for (std::size_t i = 0; i < chunk; ++i) g[o * chunk + i] += src[i];
                            }
                          }
                        });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin, std::size_t end) {
  require(axis < x.rank(), "slice", "axis out of range");
  require(begin < end && end <= x.dim(axis), "slice", "empty or out-of-range slice");
  const auto s = split_axis(x.shape(), axis);
  Shape shape = x.shape();
  shape[axis] = end - begin;
  const std::size_t chunk = (end - begin) * s.inner;
  std::vector<T> out(s.outer * chunk);
  for (std::size_t o = 0; o < s.outer; ++o)
    std::copy_n(x.data().data() + o * s.n * s.inner + begin * s.inner, chunk,
                out.data() + o * chunk);
  return finish<T>("slice", std::move(shape), std::move(out), {&x},
                   [s, begin, chunk](NodeT<T>& self) {
                     T* g = grad_of(self, 0);
                     for (std::size_t o = 0; o < s.outer; ++o) {
                       T* dst = g + o * s.n * s.inner + begin * s.inner;
                       for (std::size_t i = 0; i < chunk; ++i) dst[i] += self.grad[o * chunk + i];
                     }
                   });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> idx) {
  require(x.rank() == 2, "gather_rows", "expects x[n, d]");
  require(!idx.empty(), "gather_rows", "no indices");
  const std::size_t n = x.dim(0), d = x.dim(1);
  std::vector<T> out(idx.size() * d);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] < n, "gather_rows", "index out of range");
    std::copy_n(x.data().data() + idx[i] * d, d, out.data() + i * d);
  }
  return finish<T>("gather_rows", {idx.size(), d}, std::move(out), {&x},
                   [d, rows = std::vector<std::size_t>(idx.begin(), idx.end())](NodeT<T>& self) {
                     T* g = grad_of(self, 0);
                     for (std::size_t i = 0; i < rows.size(); ++i)
                       for (std::size_t j = 0; j < d; ++j) g[rows[i] * d + j] += self.grad[i * d + j];
                   });
}

template <typename T>
Tensor<T> mask_rows(const Tensor<T>& x, const std::vector<bool>& keep) {
  require(x.rank() == 2, "mask_rows", "expects x[n, d]");
  const std::size_t n = x.dim(0), d = x.dim(1);
  require(keep.size() == n, "mask_rows", "one flag per row required");
  std::vector<T> out(x.size(), T(0));
  for (std::size_t i = 0; i < n; ++i)
    if (keep[i]) std::copy_n(x.data().data() + i * d, d, out.data() + i * d);
  return finish<T>("mask_rows", x.shape(), std::move(out), {&x}, [d, keep](NodeT<T>& self) {
    T* g = grad_of(self, 0);
    for (std::size_t i = 0; i < keep.size(); ++i)
      if (keep[i])
        for (std::size_t j = 0; j < d; ++j) g[i * d + j] += self.grad[i * d + j];
  });
}

template <typename T>
Tensor<T> repeat_rows(const Tensor<T>& x, std::size_t n) {
  require(x.rank() == 2 && x.dim(0) == 1, "repeat_rows", "expects x[1, d]");
  require(n >= 1, "repeat_rows", "n must be positive");
  const std::size_t d = x.dim(1);
  std::vector<T> out(n * d);
  for (std::size_t i = 0; i < n; ++i) std::copy_n(x.data().data(), d, out.data() + i * d);
  return finish<T>("repeat_rows", {n, d}, std::move(out), {&x}, [n, d](NodeT<T>& self) {
    T* g = grad_of(self, 0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) g[j] += self.grad[i * d + j];
  });
}

template <typename T>
Tensor<T> mean_rows(const Tensor<T>& x) {
  require(x.rank() == 2, "mean_rows", "expects x[n, d]");
  const std::size_t n = x.dim(0), d = x.dim(1);
  std::vector<T> out(d, T(0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[j] += x.data()[i * d + j];
  for (auto& v : out) v /= static_cast<T>(n);
  return finish<T>("mean_rows", {1, d}, std::move(out), {&x}, [n, d](NodeT<T>& self) {
    T* g = grad_of(self, 0);
    const T inv = T(1) / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) g[i * d + j] += self.grad[j] * inv;
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T total = T(0);
  for (T v : x.data()) total += v;
  return finish<T>("sum", {1}, {total}, {&x}, [](NodeT<T>& self) {
    T* g = grad_of(self, 0);
    const std::size_t n = self.inputs[0]->value.size();
    for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
  });
}

template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require(pred.shape() == target.shape(), "l1_loss",
          "shape mismatch " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  T total = T(0);
  for (std::size_t i = 0; i < pred.size(); ++i) total += std::abs(pred.data()[i] - target.data()[i]);
  const T inv = T(1) / static_cast<T>(pred.size());
  return finish<T>("l1_loss", {1}, {total * inv}, {&pred, &target}, [inv](NodeT<T>& self) {
    const auto& pv = self.inputs[0]->value;
    const auto& tv = self.inputs[1]->value;
    T* gp = grad_of(self, 0);
    T* gt = grad_of(self, 1);
    const T scale = self.grad[0] * inv;
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const T diff = pv[i] - tv[i];
      const T sgn = diff > T(0) ? T(1) : (diff < T(0) ? T(-1) : T(0));
      if (gp) gp[i] += scale * sgn;
      if (gt) gt[i] -= scale * sgn;
    }
  });
}

#define IMMF_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> transpose(const Tensor<T>&);                                            \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> affine_scalar(const Tensor<T>&, T, T);                                  \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> scale_rows(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> gelu(const Tensor<T>&);                                                 \
  template Tensor<T> sigmoid(const Tensor<T>&);                                              \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                 \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);    \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,            \
                            std::size_t, std::size_t);                                       \
  template Tensor<T> segment_max(const Tensor<T>&, std::span<const std::size_t>, std::size_t); \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                       \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                     \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);         \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::size_t>);            \
  template Tensor<T> mask_rows(const Tensor<T>&, const std::vector<bool>&);                  \
  template Tensor<T> repeat_rows(const Tensor<T>&, std::size_t);                             \
  template Tensor<T> mean_rows(const Tensor<T>&);                                            \
  template Tensor<T> sum(const Tensor<T>&);                                                  \
  template Tensor<T> l1_loss(const Tensor<T>&, const Tensor<T>&);

IMMF_INSTANTIATE_OPS(float)
IMMF_INSTANTIATE_OPS(double)

#undef IMMF_INSTANTIATE_OPS

}  // namespace immf::tensor
