#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "immf/tensor/tensor.hpp"

// Differentiable operations. Shapes are checked eagerly and every output is
// scanned for NaN/Inf; a non-finite result throws NonFiniteError naming the op.
// Broadcasting is limited to the last-axis affine (add_bias) and explicit row
// operations; everything else goes through reshape/concat/slice.
namespace immf::tensor {

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> transpose(const Tensor<T>& a);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
/// alpha * x + beta
template <typename T>
Tensor<T> affine_scalar(const Tensor<T>& x, T alpha, T beta = T(0));
/// x[..., d] + bias[d]
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);
/// x[n, d] * s[n, 1] row-wise.
template <typename T>
Tensor<T> scale_rows(const Tensor<T>& x, const Tensor<T>& s);

template <typename T>
Tensor<T> gelu(const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps = T(1e-5));

/// Cross-correlation of x[c, h, w] with k[o, c, kh, kw]. `bias` may be an
/// undefined tensor.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding = 0);

/// Column-wise max of values[n, d] per segment. Empty segments produce zeros.
/// The gradient flows to the first row attaining the max.
template <typename T>
Tensor<T> segment_max(const Tensor<T>& values, std::span<const std::size_t> segment_ids,
                      std::size_t num_segments);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);
template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin, std::size_t end);
/// Rows x[idx[i], :].
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> idx);
/// Rows with keep[i] == false are replaced by exact zeros.
template <typename T>
Tensor<T> mask_rows(const Tensor<T>& x, const std::vector<bool>& keep);
/// x[1, d] replicated into n rows.
template <typename T>
Tensor<T> repeat_rows(const Tensor<T>& x, std::size_t n);
/// Mean over the rows of x[n, d] -> [1, d].
template <typename T>
Tensor<T> mean_rows(const Tensor<T>& x);
template <typename T>
Tensor<T> sum(const Tensor<T>& x);
/// mean(|pred - target|) -> [1].
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// Element-wise conversion into another precision; a new leaf with the same
/// requires_grad flag.
template <typename U, typename T>
Tensor<U> cast_leaf(const Tensor<T>& x) {
  std::vector<U> data(x.data().begin(), x.data().end());
  return x.requires_grad() ? Tensor<U>::parameter(x.shape(), std::move(data))
                           : Tensor<U>::constant(x.shape(), std::move(data));
}

}  // namespace immf::tensor
