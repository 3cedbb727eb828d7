#pragma once

#include <string>

#include "immf/tensor/nn.hpp"

namespace immf::fusion {

using tensor::ParamSet;
using tensor::Tensor;

void init_gim(tensor::Initializer& init, const std::string& prefix, std::size_t dim);

/// One self-attention block over the two-token set {G_im, G_pc}, mean-pooled.
/// Both inputs are [1, D]; a masked modality passes zeros.
template <typename T>
Tensor<T> gim(const ParamSet<T>& ps, const std::string& prefix, const Tensor<T>& g_im,
              const Tensor<T>& g_pc, tensor::AttentionTrace* trace = nullptr);

/// Row i = template_coords[i] ++ G. template_coords [Q, 3], G [1, D] -> [Q, 3 + D].
template <typename T>
Tensor<T> positional_encode(const Tensor<T>& g, const Tensor<T>& template_coords);

}  // namespace immf::fusion
